//! The closed-form `g_N` geodesic.
//!
//! With `τ = b₀t/2`, the density ratio `ρ(t,x)/ρ(0,x)` is `P(t,x) e^{a₀t/2}` where
//!
//! ```text
//! P = C₁ cos(b₀t) + C₂ sin(b₀t) + C₃ = (cos τ + (q/b₀) sin τ)² + (r/b₀)² sin² τ,
//! ```
//!
//! and the metric is
//!
//! ```text
//! g(t) = P^{2/n} e^{a₀t/n} g₀ exp((2/r) Θ(t) g₀⁻¹A),   tan Θ = r sin τ / (b₀ cos τ + q sin τ).
//! ```
//!
//! `Θ` is the continuous branch starting at 0; it gains `π` every `2π/b₀`.
//! It is computed by unwinding in `τ` (one half-turn of the argument per
//! `π` of `τ`) and then checked against the interval rule: after `k` zero
//! crossings of the denominator, `Θ ∈ [kπ − π/2, kπ + π/2]`, the crossings
//! happening at `t = (θ + 2πm)/b₀`.
//!
//! When `b₀ = 0` the velocity is `λ g₀` with constant `λ = a₀/n` and the
//! geodesic is the ray `e^{a₀t/n} g₀`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fiber::push_exponential;
use crate::metrics::{FamilyIndex, MetricField};

use super::normal_form::{GeodesicNormalForm, PointCase};
use super::PathPolyline;

const BRANCH_TOL: f64 = 1e-9;

/// `P(t, x)`, the density ratio without the `e^{a₀t/2}` factor.
pub fn density_ratio(nf: &GeodesicNormalForm, i: usize, t: f64) -> f64 {
    if nf.conformal_ray {
        return 1.0;
    }
    let tau = 0.5 * nf.b0 * t;
    let (s, c) = tau.sin_cos();
    let u = c + nf.q[i] / nf.b0 * s;
    let w = nf.r[i] / nf.b0 * s;
    u * u + w * w
}

/// The continuous angle `Θ(t)` at point `i`.
pub fn unwound_angle(nf: &GeodesicNormalForm, i: usize, t: f64) -> f64 {
    if nf.conformal_ray {
        return 0.0;
    }
    let tau = 0.5 * nf.b0 * t;
    let k = (tau / PI).floor();
    let (s, c) = (tau - k * PI).sin_cos();
    let base = (nf.r[i] * s).atan2(nf.b0 * c + nf.q[i] * s);
    base + k * PI
}

fn check_branch(nf: &GeodesicNormalForm, i: usize, t: f64, angle: f64) -> Result<()> {
    let theta = match nf.theta[i] {
        Some(th) => th,
        None => return Ok(()),
    };
    let k = ((nf.b0 * t - theta) / (2.0 * PI)).ceil().max(0.0);
    let lo = k * PI - 0.5 * PI - BRANCH_TOL;
    let hi = k * PI + 0.5 * PI + BRANCH_TOL;
    if angle < lo || angle > hi {
        return Err(Error::Branch { point: i, t, angle, branch: k as i64 });
    }
    Ok(())
}

/// First positive zero of the density over points with `A(x) = 0`; `+∞` if
/// `b₀ = 0` or `A(x) ≠ 0` everywhere.
///
/// At such a point `P = (cos τ + (q/b₀) sin τ)²`, so the zero is the root of
/// `b₀ cos τ + q sin τ` in `τ ∈ (0, π)`, found by bisection.
pub fn blowup_time(nf: &GeodesicNormalForm) -> f64 {
    if nf.conformal_ray || nf.b0 == 0.0 {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    for i in 0..nf.len() {
        if nf.cases[i] != PointCase::PureConformal {
            continue;
        }
        let q = nf.q[i];
        let b = nf.b0;
        let phi = |tau: f64| b * tau.cos() + q * tau.sin();
        let (mut lo, mut hi) = (0.0_f64, PI);
        // phi(0) = b > 0 and phi(π) = −b < 0.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(2.0 * lo / b);
    }
    best
}

/// The closed-form metric at time `t ∈ [0, t₀)`.
pub fn geodesic_eval(nf: &GeodesicNormalForm, g0: &MetricField, t: f64) -> Result<MetricField> {
    if g0.len() != nf.len() {
        return Err(Error::DimensionMismatch { expected: nf.len(), found: g0.len() });
    }
    let t0 = blowup_time(nf);
    if !(t >= 0.0 && t < t0) {
        return Err(Error::OutOfDomain { t, t_max: t0 });
    }
    let n = nf.n as f64;
    let growth = (nf.a0 * t / n).exp();
    if nf.conformal_ray {
        return g0.scaled(growth);
    }
    let mats = (0..nf.len())
        .map(|i| {
            let factor = density_ratio(nf, i, t).powf(2.0 / n) * growth;
            let base = match nf.cases[i] {
                PointCase::PureConformal => g0.mat(i).clone(),
                PointCase::Generic => {
                    let angle = unwound_angle(nf, i, t);
                    check_branch(nf, i, t, angle)?;
                    push_exponential(g0.mat(i), &nf.abar[i], 2.0 * angle / nf.r[i]).map_err(|e| e.at_point(i))?
                }
            };
            base.scale(factor).map_err(|_| Error::LeftCone { t, point: i })
        })
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(g0.manifold_arc().clone(), mats)
}

/// Samples the closed form on a time grid.
pub fn sample_closed_form(nf: &GeodesicNormalForm, g0: &MetricField, times: &[f64]) -> Result<PathPolyline> {
    let fields = times.iter().map(|&t| geodesic_eval(nf, g0, t)).collect::<Result<Vec<_>>>()?;
    PathPolyline::new(times.to_vec(), fields, FamilyIndex::NORMALIZED)
}
