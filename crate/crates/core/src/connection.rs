//! Levi-Civita connections of `g_p` on constant vector fields.
//!
//! For constant fields (`D_h k = 0`) the connection at `g` is a symmetric
//! bilinear form `Γ_g(h, k) = ∇_h k`. For the Ebin metric, pointwise,
//!
//! ```text
//! Γ_E(h, k) = −½(h g⁻¹ k + k g⁻¹ h) + ¼(tr(g⁻¹k) h + tr(g⁻¹h) k − tr(g⁻¹hg⁻¹k) g)
//! ```
//!
//! and since `g_p = e^{2f} g_E` with `f = −(p/2) log V`, the conformal change
//! formula (with `∇^E f = −(p / 4V) g`) gives
//!
//! ```text
//! Γ_p(h, k) = Γ_E(h, k) + (p/4) (N(h,k) g − N(g,h) k − N(g,k) h),   N = g_E / V.
//! ```
//!
//! The tautological field `g ↦ g` has `D_h g = h`, so `∇_h g = h + Γ_p(h, g)
//! = (n/4)(1 − p) h`; it is parallel exactly for `p = 1`.

use crate::error::{Error, Result};
use crate::fiber::{SpdMatrix, SymMatrix};
use crate::geodesics::{check_geodesic, PathPolyline, DEFAULT_RESIDUAL_THRESHOLD};
use crate::manifold::map_points;
use crate::metrics::{ebin_inner, FamilyIndex, MetricField, TangentField};

/// `∇_h k` at a base point, for constant fields `h`, `k`.
pub type ConnectionValue = TangentField;

/// Pointwise Ebin Christoffel form `Γ_E(h, k)`.
pub fn ebin_christoffel(g: &SpdMatrix, h: &SymMatrix, k: &SymMatrix) -> SymMatrix {
    let gi = g.inverse();
    let hm = h.as_matrix();
    let km = k.as_matrix();
    let hgk = hm * &gi * km;
    let sym = &hgk + hgk.transpose();
    let tr_h = (&gi * hm).trace();
    let tr_k = (&gi * km).trace();
    let tr_hk = (&gi * hm * &gi * km).trace();
    let out = sym * -0.5 + (hm * tr_k + km * tr_h - g.as_matrix() * tr_hk) * 0.25;
    SymMatrix::symmetrized(out)
}

/// `∇^{g_p}_h k` at `g` for constant fields.
pub fn connection(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &TangentField,
    k: &TangentField,
) -> Result<ConnectionValue> {
    let p = p.into().p;
    g.check_tangent(h)?;
    g.check_tangent(k)?;
    let base = map_points(g.len(), |i| ebin_christoffel(g.mat(i), h.mat(i), k.mat(i)));
    let base = TangentField::new(g.manifold_arc().clone(), base)?;
    if p == 0.0 {
        return Ok(base);
    }
    let v = g.volume();
    let taut = TangentField::tautological(g);
    let n_hk = ebin_inner(g, h, k)? / v;
    let n_gh = ebin_inner(g, &taut, h)? / v;
    let n_gk = ebin_inner(g, &taut, k)? / v;
    let c = 0.25 * p;
    base.axpy(c * n_hk, &taut)?.axpy(-c * n_gh, k)?.axpy(-c * n_gk, h)
}

/// `∇_h` of the tautological field at `g`: `h + Γ_p(h, g)`.
pub fn tautological_derivative(p: impl Into<FamilyIndex>, g: &MetricField, h: &TangentField) -> Result<TangentField> {
    let taut = TangentField::tautological(g);
    connection(p, g, h, &taut)?.axpy(1.0, h)
}

/// Volume functionals whose Hessians along geodesics are known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeFunctional {
    /// `log V`, affine along `g_N` geodesics.
    LogV,
    /// `V^{1−p}`, with second derivative `n(1−p)²/8 · ‖γ′‖²_p` along `g_p` geodesics.
    VolumePower,
}

/// Second time derivatives of a volume functional along a geodesic polyline,
/// by the 5-point central stencil on a uniform grid. Returns `(t, value)` for
/// every sample with two neighbours on each side.
///
/// The path must pass the geodesic residual check for its own family.
pub fn hessian_scalar(
    p: impl Into<FamilyIndex>,
    functional: VolumeFunctional,
    path: &PathPolyline,
) -> Result<Vec<(f64, f64)>> {
    let p = p.into();
    if p != path.family {
        return Err(Error::InvalidInput(format!("path was produced for p = {}, not p = {}", path.family.p, p.p)));
    }
    check_geodesic(path, DEFAULT_RESIDUAL_THRESHOLD)?;
    let dt = path.uniform_step()?;
    if path.len() < 5 {
        return Err(Error::InvalidInput("need at least 5 samples for the 5-point stencil".into()));
    }
    let phi: Vec<f64> = path
        .fields
        .iter()
        .map(|g| {
            let v = g.volume();
            match functional {
                VolumeFunctional::LogV => v.ln(),
                VolumeFunctional::VolumePower => v.powf(1.0 - p.p),
            }
        })
        .collect();
    let out = (2..phi.len() - 2)
        .map(|j| {
            let d2 =
                (-phi[j + 2] + 16.0 * phi[j + 1] - 30.0 * phi[j] + 16.0 * phi[j - 1] - phi[j - 2]) / (12.0 * dt * dt);
            (path.times[j], d2)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::DiscreteManifold;
    use crate::metrics::inner;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn fixture() -> (MetricField, TangentField, TangentField) {
        let man = Arc::new(DiscreteManifold::with_weights(2, &[0.4, 0.6]).unwrap());
        let g = MetricField::from_matrices(
            man.clone(),
            vec![
                DMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.8]),
                DMatrix::from_row_slice(2, 2, &[0.6, -0.2, -0.2, 2.0]),
            ],
        )
        .unwrap();
        let h = TangentField::new(
            man.clone(),
            vec![
                SymMatrix::from_upper(2, &[0.2, 0.7, -0.1]).unwrap(),
                SymMatrix::from_upper(2, &[1.0, 0.1, 0.3]).unwrap(),
            ],
        )
        .unwrap();
        let k = TangentField::new(
            man,
            vec![
                SymMatrix::from_upper(2, &[-0.5, 0.2, 0.4]).unwrap(),
                SymMatrix::from_upper(2, &[0.3, -0.6, 0.9]).unwrap(),
            ],
        )
        .unwrap();
        (g, h, k)
    }

    #[test]
    fn tautological_field_examples() {
        let (g, h, _) = fixture();
        let d0 = tautological_derivative(0.0, &g, &h).unwrap();
        assert!(d0.max_deviation(&h.scale(0.5)) < 1e-13);
        let d1 = tautological_derivative(1.0, &g, &h).unwrap();
        assert!(d1.max_frobenius() < 1e-13);
    }

    #[test]
    fn torsion_free() {
        let (g, h, k) = fixture();
        for p in [0.0, 1.0, 2.5] {
            let a = connection(p, &g, &h, &k).unwrap();
            let b = connection(p, &g, &k, &h).unwrap();
            assert!(a.max_deviation(&b) < 1e-15);
        }
    }

    #[test]
    fn metric_compatible() {
        let (g, h, k) = fixture();
        for p in [0.0, 1.0, -0.7, 3.0] {
            let eps = 1e-5;
            let f = |e: f64| inner(p, &g.offset(&h, e).unwrap(), &k, &k).unwrap();
            let d1 = (f(eps) - f(-eps)) / (2.0 * eps);
            let d2 = (f(eps / 2.0) - f(-eps / 2.0)) / eps;
            let fd = (4.0 * d2 - d1) / 3.0;
            let an = 2.0 * inner(p, &g, &connection(p, &g, &h, &k).unwrap(), &k).unwrap();
            assert!((fd - an).abs() < 1e-8 * (1.0 + an.abs()), "p={p}: {fd} vs {an}");
        }
    }

    #[test]
    fn ebin_christoffel_matches_independent_transcription() {
        let (g, h, _) = fixture();
        // Traceless h at each point: project out the trace part.
        for i in 0..g.len() {
            let gm = g.mat(i);
            let (h0, _) = crate::fiber::trace_split(gm, h.mat(i)).unwrap();
            let gi = gm.as_matrix().clone().try_inverse().unwrap();
            let hm = h0.as_matrix();
            let t = (&gi * hm * &gi * hm).trace();
            let expect = -(hm * &gi * hm) - gm.as_matrix() * (0.25 * t);
            let got = ebin_christoffel(gm, &h0, &h0);
            assert!((got.as_matrix() - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn conformal_change_consistency() {
        let (g, h, k) = fixture();
        let v = g.volume();
        let taut = TangentField::tautological(&g);
        for p in [0.5, 1.0, 2.0, -1.5] {
            let diff = connection(p, &g, &h, &k).unwrap().axpy(-1.0, &connection(0.0, &g, &h, &k).unwrap()).unwrap();
            // X(f) with f = −(p/2) log V, and ∇^E f = −(p/4V) g.
            let dv_h = crate::manifold::volume_differential(g.manifold(), &g, &h).unwrap();
            let dv_k = crate::manifold::volume_differential(g.manifold(), &g, &k).unwrap();
            let hf = -0.5 * p * dv_h / v;
            let kf = -0.5 * p * dv_k / v;
            let ghk = ebin_inner(&g, &h, &k).unwrap();
            let expect = k.scale(hf).axpy(kf, &h).unwrap().axpy(ghk * p / (4.0 * v), &taut).unwrap();
            assert!(diff.max_deviation(&expect) < 1e-12);
        }
    }
}
