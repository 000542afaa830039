//! Geometry of the space of Riemannian metrics on a closed manifold, under the
//! Ebin metric `g_E` and its volume-conformal family `g_p = g_E / V^p`.
//!
//! The manifold is a weighted point cloud (see [`manifold`]); a metric is an
//! SPD matrix per point. On top of that the crate provides the Levi-Civita
//! connections, geodesics (closed form for `g_N = g_1`, RK4 for every `p`),
//! sectional curvature, the duality isometry `g ↦ V^{-4/n} g`, and distance
//! bounds with completion probes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod connection;
pub mod curvature;
pub mod distance;
pub mod error;
pub mod fiber;
pub mod geodesics;
pub mod io;
pub mod manifold;
pub mod metrics;
pub mod path_energy;

pub use error::{Error, Result};
pub use fiber::{SpdMatrix, SymMatrix};
pub use manifold::{DensityField, DiscreteManifold, QuadPoint};
pub use metrics::{FamilyIndex, MetricField, TangentField};
