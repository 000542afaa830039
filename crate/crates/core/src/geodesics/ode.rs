//! The geodesic equation `γ″ = −Γ_p(γ′, γ′)` and its RK4 integration.
//!
//! Writing `C = g⁻¹g_t`, the second derivative is
//!
//! ```text
//! g_tt = g [C² − ½ tr(C) C + ¼ tr(C²) I − (p/4) ‖g_t‖²_N I + (p/2) ⟨g_t, g⟩_N C],
//! ```
//!
//! which for `p = 1` is the `g_N` geodesic equation with both nonlocal terms.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fiber::{SpdMatrix, SymMatrix};
use crate::manifold::pairwise_sum;
use crate::metrics::{FamilyIndex, MetricField, TangentField};

use super::PathPolyline;

/// Default bound on the relative residual of a path accepted as a geodesic.
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 1e-5;

/// Per-point data the right-hand side needs, in raw matrices.
struct Frame<'a> {
    p: f64,
    weights: &'a [f64],
    ref_dets: &'a [f64],
}

impl Frame<'_> {
    /// `g_tt` for raw `(g, g_t)`; on failure returns the index of a point
    /// where `g` is not positive definite.
    fn rhs(&self, g: &[DMatrix<f64>], v: &[DMatrix<f64>]) -> std::result::Result<Vec<DMatrix<f64>>, usize> {
        let np = g.len();
        let mut inv = Vec::with_capacity(np);
        let mut mass = Vec::with_capacity(np);
        for (i, gi) in g.iter().enumerate() {
            let chol = gi.clone().cholesky().ok_or(i)?;
            let det = chol.determinant();
            inv.push(chol.inverse());
            mass.push(self.weights[i] * (det / self.ref_dets[i]).sqrt());
        }
        let mut c = Vec::with_capacity(np);
        let mut tr_c = Vec::with_capacity(np);
        let mut tr_c2 = Vec::with_capacity(np);
        for i in 0..np {
            let ci = &inv[i] * &v[i];
            tr_c.push(ci.trace());
            tr_c2.push((&ci * &ci).trace());
            c.push(ci);
        }
        let vol = pairwise_sum(&mass);
        let terms: Vec<f64> = mass.iter().zip(&tr_c).map(|(m, t)| m * t).collect();
        let n_gv = pairwise_sum(&terms) / vol;
        let terms: Vec<f64> = mass.iter().zip(&tr_c2).map(|(m, t)| m * t).collect();
        let n_vv = pairwise_sum(&terms) / vol;
        let p = self.p;
        Ok((0..np)
            .map(|i| {
                let vcv = &v[i] * &c[i];
                let out = vcv + &v[i] * (-0.5 * tr_c[i] + 0.5 * p * n_gv) + &g[i] * (0.25 * tr_c2[i] - 0.25 * p * n_vv);
                let t = out.transpose();
                (out + t) * 0.5
            })
            .collect())
    }
}

/// `g_tt` at `(g, g_t)` for the family `p`.
pub fn geodesic_rhs(p: impl Into<FamilyIndex>, g: &MetricField, gt: &TangentField) -> Result<TangentField> {
    g.check_tangent(gt)?;
    let man = g.manifold();
    let weights = man.weights();
    let ref_dets: Vec<f64> = man.points().iter().map(|pt| pt.reference_metric.det()).collect();
    let frame = Frame { p: p.into().p, weights: &weights, ref_dets: &ref_dets };
    let gm: Vec<_> = g.mats().iter().map(|m| m.as_matrix().clone()).collect();
    let vm: Vec<_> = gt.mats().iter().map(|m| m.as_matrix().clone()).collect();
    let out = frame
        .rhs(&gm, &vm)
        .map_err(|point| Error::NotPositiveDefinite { point, min_eigenvalue: g.mat(point).min_eigenvalue() })?;
    TangentField::new(g.manifold_arc().clone(), out.into_iter().map(SymMatrix::symmetrized).collect())
}

/// Classical RK4 on `(g, g_t)` from `t = 0` to `t_max`, recording every step.
pub fn integrate_geodesic(
    p: impl Into<FamilyIndex>,
    g0: &MetricField,
    h0: &TangentField,
    t_max: f64,
    dt: f64,
) -> Result<PathPolyline> {
    integrate_geodesic_sampled(p, g0, h0, t_max, dt, 1)
}

/// RK4 recording every `stride`-th step (and always the last one).
pub fn integrate_geodesic_sampled(
    p: impl Into<FamilyIndex>,
    g0: &MetricField,
    h0: &TangentField,
    t_max: f64,
    dt: f64,
    stride: usize,
) -> Result<PathPolyline> {
    let family = p.into();
    g0.check_tangent(h0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput(format!("t_max must be finite and nonnegative, got {t_max}")));
    }
    let stride = stride.max(1);
    let man = g0.manifold_arc().clone();
    let weights = man.weights();
    let ref_dets: Vec<f64> = man.points().iter().map(|pt| pt.reference_metric.det()).collect();
    let frame = Frame { p: family.p, weights: &weights, ref_dets: &ref_dets };

    let steps = (t_max / dt - 1e-9).ceil().max(0.0) as usize;
    let mut g: Vec<DMatrix<f64>> = g0.mats().iter().map(|m| m.as_matrix().clone()).collect();
    let mut v: Vec<DMatrix<f64>> = h0.mats().iter().map(|m| m.as_matrix().clone()).collect();
    let mut times = vec![0.0];
    let mut fields = vec![g0.clone()];
    let mut vels = vec![h0.clone()];
    let mut t = 0.0;

    let axpy = |x: &[DMatrix<f64>], a: f64, y: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
        x.iter().zip(y).map(|(xi, yi)| xi + yi * a).collect()
    };
    for step in 1..=steps {
        let h = if step == steps { t_max - t } else { dt };
        let fail = |point: usize, at: f64| Error::LeftCone { t: at, point };
        let a1 = frame.rhs(&g, &v).map_err(|i| fail(i, t))?;
        let g2 = axpy(&g, 0.5 * h, &v);
        let v2 = axpy(&v, 0.5 * h, &a1);
        let a2 = frame.rhs(&g2, &v2).map_err(|i| fail(i, t + 0.5 * h))?;
        let g3 = axpy(&g, 0.5 * h, &v2);
        let v3 = axpy(&v, 0.5 * h, &a2);
        let a3 = frame.rhs(&g3, &v3).map_err(|i| fail(i, t + 0.5 * h))?;
        let g4 = axpy(&g, h, &v3);
        let v4 = axpy(&v, h, &a3);
        let a4 = frame.rhs(&g4, &v4).map_err(|i| fail(i, t + h))?;
        for i in 0..g.len() {
            g[i] += (&v[i] + &v2[i] * 2.0 + &v3[i] * 2.0 + &v4[i]) * (h / 6.0);
            v[i] += (&a1[i] + &a2[i] * 2.0 + &a3[i] * 2.0 + &a4[i]) * (h / 6.0);
        }
        t = if step == steps { t_max } else { step as f64 * dt };
        if step % stride == 0 || step == steps {
            let mats = g
                .iter()
                .enumerate()
                .map(|(i, m)| SpdMatrix::with_eps(SymMatrix::symmetrized(m.clone()), 0.0).map_err(|_| fail(i, t)))
                .collect::<Result<Vec<_>>>()?;
            fields.push(MetricField::new(man.clone(), mats)?);
            vels.push(TangentField::new(man.clone(), v.iter().map(|m| SymMatrix::symmetrized(m.clone())).collect())?);
            times.push(t);
        } else {
            for (i, m) in g.iter().enumerate() {
                if m.clone().cholesky().is_none() {
                    return Err(fail(i, t));
                }
            }
        }
    }
    PathPolyline::new(times, fields, family)?.with_velocities(vels)
}

/// Relative residual of the geodesic equation along a sampled path.
///
/// Derivatives come from 5-point central stencils on a uniform grid (3-point
/// ones on a non-uniform grid). The residual is
/// `max_j ‖D²g_j − g_tt(g_j, Dg_j)‖ / max_j (‖D²g_j‖ + ‖g_tt‖)`, with Frobenius
/// norms taken over all points.
pub fn geodesic_residual(path: &PathPolyline) -> Result<f64> {
    let m = path.len();
    if m < 3 {
        return Err(Error::InvalidInput("need at least 3 samples to check the geodesic equation".into()));
    }
    let raw: Vec<Vec<DMatrix<f64>>> =
        path.fields.iter().map(|f| f.mats().iter().map(|x| x.as_matrix().clone()).collect()).collect();
    let np = raw[0].len();
    let uniform = path.uniform_step().ok().filter(|_| m >= 5);
    let man = path.fields[0].manifold_arc().clone();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    let range = if uniform.is_some() { 2..m - 2 } else { 1..m - 1 };
    for j in range {
        let (d1, d2): (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) = match uniform {
            Some(h) => (0..np)
                .map(|i| {
                    let f = |k: usize| &raw[k][i];
                    let d1 = (f(j - 2) - f(j - 1) * 8.0 + f(j + 1) * 8.0 - f(j + 2)) / (12.0 * h);
                    let d2 = (-f(j + 2) + f(j + 1) * 16.0 - f(j) * 30.0 + f(j - 1) * 16.0 - f(j - 2)) / (12.0 * h * h);
                    (d1, d2)
                })
                .unzip(),
            None => {
                let h1 = path.times[j] - path.times[j - 1];
                let h2 = path.times[j + 1] - path.times[j];
                (0..np)
                    .map(|i| {
                        let (a, b, c) = (&raw[j - 1][i], &raw[j][i], &raw[j + 1][i]);
                        let d1 = (c - b) * (h1 / (h2 * (h1 + h2))) + (b - a) * (h2 / (h1 * (h1 + h2)));
                        let d2 = ((c - b) / h2 - (b - a) / h1) * (2.0 / (h1 + h2));
                        (d1, d2)
                    })
                    .unzip()
            }
        };
        let vel = TangentField::new(man.clone(), d1.into_iter().map(SymMatrix::symmetrized).collect())?;
        let acc = geodesic_rhs(path.family, &path.fields[j], &vel)?;
        let mut diff = 0.0;
        let mut size = 0.0;
        for i in 0..np {
            diff += (&d2[i] - acc.mat(i).as_matrix()).norm_squared();
            size += d2[i].norm() + acc.mat(i).as_matrix().norm();
        }
        worst = worst.max(diff.sqrt());
        scale = scale.max(size);
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

/// Refuses paths whose geodesic residual exceeds `threshold`.
pub fn check_geodesic(path: &PathPolyline, threshold: f64) -> Result<f64> {
    let residual = geodesic_residual(path)?;
    if residual > threshold {
        return Err(Error::NotGeodesic { residual, threshold });
    }
    Ok(residual)
}
