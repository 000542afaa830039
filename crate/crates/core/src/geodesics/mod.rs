//! Geodesics of `g_p`: the closed-form `g_N` solution with its normal form,
//! an RK4 integrator for the nonlocal geodesic equation of any `g_p`, and
//! constants of motion.

mod closed_form;
mod motion;
mod normal_form;
mod ode;

pub use closed_form::{blowup_time, density_ratio, geodesic_eval, sample_closed_form, unwound_angle};
pub use motion::{motion_constants, MotionReport};
pub use normal_form::{normal_form, GeodesicNormalForm, PointCase};
pub use ode::{
    check_geodesic, geodesic_residual, geodesic_rhs, integrate_geodesic, integrate_geodesic_sampled,
    DEFAULT_RESIDUAL_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::metrics::{FamilyIndex, MetricField, TangentField};

/// A time-sampled path in the space of metrics.
#[derive(Clone, Debug)]
pub struct PathPolyline {
    pub times: Vec<f64>,
    pub fields: Vec<MetricField>,
    pub family: FamilyIndex,
    /// Velocities at the samples, when the producer knows them exactly.
    pub velocities: Option<Vec<TangentField>>,
}

impl PathPolyline {
    pub fn new(times: Vec<f64>, fields: Vec<MetricField>, family: FamilyIndex) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: fields.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("path times must be strictly increasing".into()));
        }
        if let Some(first) = fields.first() {
            for f in &fields[1..] {
                first.check_metric(f)?;
            }
        }
        Ok(PathPolyline { times, fields, family, velocities: None })
    }

    pub fn with_velocities(mut self, velocities: Vec<TangentField>) -> Result<Self> {
        if velocities.len() != self.fields.len() {
            return Err(Error::DimensionMismatch { expected: self.fields.len(), found: velocities.len() });
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The common time step, if the grid is uniform to 1e-9 relative.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::InvalidInput("path has fewer than two samples".into()));
        }
        let dt = (self.times[self.len() - 1] - self.times[0]) / (self.len() - 1) as f64;
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1e-300) {
                return Err(Error::InvalidInput("path time grid is not uniform".into()));
            }
        }
        Ok(dt)
    }

    /// Volumes `V(t)` at the samples.
    pub fn volumes(&self) -> Vec<f64> {
        self.fields.iter().map(|g| g.volume()).collect()
    }

    /// Minimum over points of the density ratio `ρ(t, x) / ρ(0, x)` at each sample.
    pub fn min_density_ratios(&self) -> Vec<f64> {
        let rho0 = match self.fields.first() {
            Some(g) => g.densities(),
            None => return Vec::new(),
        };
        self.fields
            .iter()
            .map(|g| g.densities().iter().zip(&rho0).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min))
            .collect()
    }
}
