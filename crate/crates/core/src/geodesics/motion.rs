//! Constants of motion along `g_p` geodesics.
//!
//! `c(t) = V^{-p} ∫ tr(g⁻¹g_t) dV = g_p(g, g_t)` has slope
//! `g_p(∇_{g_t} g, g_t) = (n/4)(1 − p) ‖g_t‖²_p`, because the tautological
//! field satisfies `∇_h g = (n/4)(1 − p) h`. For `p = 1` this says `log V`
//! is affine in `t`.

use crate::error::Result;
use crate::fiber::SymMatrix;
use crate::metrics::{inner, TangentField};

use super::ode::{check_geodesic, DEFAULT_RESIDUAL_THRESHOLD};
use super::PathPolyline;

#[derive(Clone, Debug)]
pub struct MotionReport {
    pub p: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub volume: Vec<f64>,
    /// `c(t) = V^{-p} ∫ tr(g⁻¹g_t) dV`.
    pub c: Vec<f64>,
    /// Central differences of `c` (one-sided at the ends).
    pub fd_slope: Vec<f64>,
    /// Least-squares slope of `c` against `t`.
    pub fitted_slope: f64,
    /// Mean of `‖g_t‖²_p` over the samples.
    pub speed_sq: f64,
    /// `(n/4)(1 − p) ‖g_t‖²_p`.
    pub expected_slope: f64,
    /// Max deviation of `log V` from its secant line (reported for every `p`,
    /// expected to vanish for `p = 1`).
    pub log_v_affine_deviation: f64,
    /// Geodesic residual of the input path.
    pub residual: f64,
}

impl MotionReport {
    pub fn slope_relative_error(&self) -> f64 {
        let scale = self.expected_slope.abs().max(1e-300);
        (self.fitted_slope - self.expected_slope).abs() / scale
    }

    pub const HEADER: &'static str = "c(t) = V^-p * integral tr(g^-1 g_t) dV; expected slope (n/4)(1-p)|g_t|_p^2";
}

fn velocities(path: &PathPolyline) -> Result<Vec<TangentField>> {
    if let Some(v) = &path.velocities {
        return Ok(v.clone());
    }
    let m = path.len();
    let man = path.fields[0].manifold_arc().clone();
    (0..m)
        .map(|j| {
            let (a, b) = if j == 0 {
                (0, 1)
            } else if j == m - 1 {
                (m - 2, m - 1)
            } else {
                (j - 1, j + 1)
            };
            let dt = path.times[b] - path.times[a];
            let mats = (0..path.fields[0].len())
                .map(|i| {
                    SymMatrix::symmetrized((path.fields[b].mat(i).as_matrix() - path.fields[a].mat(i).as_matrix()) / dt)
                })
                .collect();
            TangentField::new(man.clone(), mats)
        })
        .collect()
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Samples the constants of motion along a geodesic polyline.
///
/// Velocities are taken from the path when present (the RK4 integrator
/// records them), otherwise by central differences.
pub fn motion_constants(path: &PathPolyline) -> Result<MotionReport> {
    let residual = check_geodesic(path, DEFAULT_RESIDUAL_THRESHOLD)?;
    let p = path.family.p;
    let n = path.fields[0].dim();
    let vels = velocities(path)?;
    let mut volume = Vec::with_capacity(path.len());
    let mut c = Vec::with_capacity(path.len());
    let mut speed = 0.0;
    for (g, v) in path.fields.iter().zip(&vels) {
        let vol = g.volume();
        volume.push(vol);
        c.push(vol.powf(-p) * g.integrate_values(&g.traces(v)));
        speed += inner(p, g, v, v)?;
    }
    let speed_sq = speed / path.len() as f64;
    let m = path.len();
    let fd_slope = (0..m)
        .map(|j| {
            let (a, b) = if j == 0 {
                (0, 1)
            } else if j == m - 1 {
                (m - 2, m - 1)
            } else {
                (j - 1, j + 1)
            };
            (c[b] - c[a]) / (path.times[b] - path.times[a])
        })
        .collect();
    let fitted_slope = least_squares_slope(&path.times, &c);
    let logv: Vec<f64> = volume.iter().map(|v| v.ln()).collect();
    let (t0, t1) = (path.times[0], path.times[m - 1]);
    let (l0, l1) = (logv[0], logv[m - 1]);
    let log_v_affine_deviation = path
        .times
        .iter()
        .zip(&logv)
        .map(|(t, l)| (l - (l0 + (l1 - l0) * (t - t0) / (t1 - t0))).abs())
        .fold(0.0, f64::max);
    Ok(MotionReport {
        p,
        n,
        times: path.times.clone(),
        volume,
        c,
        fd_slope,
        fitted_slope,
        speed_sq,
        expected_slope: 0.25 * n as f64 * (1.0 - p) * speed_sq,
        log_v_affine_deviation,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::integrate_geodesic;
    use crate::manifold::DiscreteManifold;
    use crate::metrics::{norm, MetricField};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn unit_speed(p: f64) -> (MetricField, TangentField) {
        let man = Arc::new(DiscreteManifold::with_weights(2, &[0.5, 0.5]).unwrap());
        let g = MetricField::from_matrices(
            man.clone(),
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.5]), DMatrix::identity(2, 2)],
        )
        .unwrap();
        let h = TangentField::new(
            man,
            vec![
                SymMatrix::from_upper(2, &[0.2, 0.1, 0.3]).unwrap(),
                SymMatrix::from_upper(2, &[0.4, -0.2, 0.1]).unwrap(),
            ],
        )
        .unwrap();
        let s = norm(p, &g, &h).unwrap();
        (g, h.scale(1.0 / s))
    }

    #[test]
    fn slopes_match_the_family() {
        for p in [0.0, 1.0, 2.0] {
            let (g, h) = unit_speed(p);
            let path = integrate_geodesic(p, &g, &h, 0.5, 1e-3).unwrap();
            let rep = motion_constants(&path).unwrap();
            let expect = 0.5 * (1.0 - p);
            assert!((rep.speed_sq - 1.0).abs() < 1e-8);
            assert!((rep.fitted_slope - expect).abs() < 1e-7, "p = {p}: {}", rep.fitted_slope);
            if p == 1.0 {
                assert!(rep.log_v_affine_deviation < 1e-9);
            }
        }
    }
}
