//! The closed manifold `M`, modeled as a finite set of weighted quadrature points.
//!
//! Nothing in the geometry of the space of metrics differentiates `g` in the
//! spatial directions: the metrics, connections and curvatures are all
//! pointwise in the fiber with at most a global integral (the total volume)
//! on top. A point cloud without any adjacency therefore carries the whole
//! theory. Each point has a reference-measure mass `wᵢ` and a reference
//! metric `g̃ᵢ`, and `∫ φ dV_g = Σᵢ wᵢ φᵢ √det(g̃ᵢ⁻¹ gᵢ)`.
//!
//! Sums over points use fixed-order pairwise summation so that results do
//! not depend on thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::SpdMatrix;
use crate::metrics::{MetricField, TangentField};

/// Below this many points, per-point maps run sequentially.
const PAR_THRESHOLD: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadPoint {
    pub weight: f64,
    pub reference_metric: SpdMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteManifold {
    dim: usize,
    points: Vec<QuadPoint>,
}

impl DiscreteManifold {
    pub fn new(dim: usize, points: Vec<QuadPoint>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("fiber dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidInput("a manifold needs at least one point".into()));
        }
        for (i, pt) in points.iter().enumerate() {
            if !(pt.weight.is_finite() && pt.weight > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "point {i}: weight must be positive and finite, got {}",
                    pt.weight
                )));
            }
            if pt.reference_metric.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: pt.reference_metric.dim() });
            }
        }
        Ok(DiscreteManifold { dim, points })
    }

    /// Given weights with identity reference metrics.
    pub fn with_weights(dim: usize, weights: &[f64]) -> Result<Self> {
        let points =
            weights.iter().map(|&w| QuadPoint { weight: w, reference_metric: SpdMatrix::identity(dim) }).collect();
        Self::new(dim, points)
    }

    /// `count` equal weights summing to one, identity reference metrics.
    pub fn uniform(dim: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("a manifold needs at least one point".into()));
        }
        Self::with_weights(dim, &vec![1.0 / count as f64; count])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[QuadPoint] {
        &self.points
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.points[i].weight
    }

    pub fn reference(&self, i: usize) -> &SpdMatrix {
        &self.points[i].reference_metric
    }

    pub fn weights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.weight).collect()
    }

    pub fn references(&self) -> Vec<SpdMatrix> {
        self.points.iter().map(|p| p.reference_metric.clone()).collect()
    }

    /// Reference volume `Σᵢ wᵢ`.
    pub fn reference_volume(&self) -> f64 {
        pairwise_sum(&self.weights())
    }
}

/// A scalar function on `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Self {
        DensityField { values }
    }

    pub fn constant(len: usize, c: f64) -> Self {
        DensityField { values: vec![c; len] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<Vec<f64>> for DensityField {
    fn from(values: Vec<f64>) -> Self {
        DensityField { values }
    }
}

/// Pairwise (cascade) summation in a fixed association order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().fold(0.0, |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Maps `f` over point indices, in parallel for large point sets. Output order
/// is the index order regardless of scheduling.
pub(crate) fn map_points<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if len >= PAR_THRESHOLD {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

pub(crate) fn try_map_points<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_points(len, f).into_iter().collect()
}

fn check_manifold(man: &DiscreteManifold, g: &MetricField) -> Result<()> {
    if man.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: man.dim(), found: g.dim() });
    }
    if man.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: man.len(), found: g.len() });
    }
    if g.manifold() != man {
        return Err(Error::ManifoldMismatch);
    }
    Ok(())
}

/// `∫ φ dV_g = Σᵢ wᵢ φᵢ √det(g̃ᵢ⁻¹ gᵢ)`.
pub fn integrate(man: &DiscreteManifold, phi: &DensityField, g: &MetricField) -> Result<f64> {
    check_manifold(man, g)?;
    if phi.len() != man.len() {
        return Err(Error::DimensionMismatch { expected: man.len(), found: phi.len() });
    }
    Ok(g.integrate_values(phi.values()))
}

/// Total volume `V_g = ∫ dV_g`.
pub fn total_volume(man: &DiscreteManifold, g: &MetricField) -> Result<f64> {
    check_manifold(man, g)?;
    Ok(g.volume())
}

/// Differential of the total volume: `DV_g(h) = ½ ∫ tr(g⁻¹h) dV_g`.
pub fn volume_differential(man: &DiscreteManifold, g: &MetricField, h: &TangentField) -> Result<f64> {
    check_manifold(man, g)?;
    g.check_tangent(h)?;
    let f = g.traces(h);
    Ok(0.5 * g.integrate_values(&f))
}
