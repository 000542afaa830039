//! Sectional curvature of `g_p`.
//!
//! Sign convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]} Z` and the
//! curvature of the plane spanned by orthonormal `h, k` is `⟨R(h,k)k, h⟩`, so
//! round spheres are positively curved (the opposite of Besse's sign).
//!
//! For constant fields `[h, k] = 0` and `∇_h k = Γ(h, k)`, hence
//!
//! ```text
//! R(h,k)k = D_h[Γ(k,k)] − D_k[Γ(h,k)] + Γ(h, Γ(k,k)) − Γ(k, Γ(h,k)),
//! ```
//!
//! where `D_h` differentiates the base point. [`curvature_numeric`] takes the
//! `D` terms by central differences of [`connection`] values, extrapolated
//! over the steps `ε` and `ε/2`.

use crate::connection::connection;
use crate::error::{Error, Result};
use crate::metrics::{inner, orthonormalize, FamilyIndex, MetricField, TangentField};

/// Options for the finite-difference curvature.
#[derive(Clone, Debug)]
pub struct CurvatureOptions {
    /// Base step; must lie in `[1e-6, 1e-3]`.
    pub eps: f64,
    /// Largest tolerated `|K(ε/2) − K(ε)| / (1 + |K|)` before extrapolation.
    pub max_disagreement: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions { eps: 1e-4, max_disagreement: 1e-5 }
    }
}

/// A tangent plane at `g`, spanned by `h, k`.
#[derive(Clone, Debug)]
pub struct PlaneSpec {
    pub g: MetricField,
    pub h: TangentField,
    pub k: TangentField,
    pub family: FamilyIndex,
    pub orthonormalized: bool,
}

impl PlaneSpec {
    /// Orthonormalizes `(h, k)` in `g_p` (modified Gram–Schmidt).
    pub fn orthonormal(p: impl Into<FamilyIndex>, g: &MetricField, h: &TangentField, k: &TangentField) -> Result<Self> {
        let family = p.into();
        let e = orthonormalize(family, g, &[h.clone(), k.clone()])?;
        let mut it = e.into_iter();
        let h = it.next().expect("two fields");
        let k = it.next().expect("two fields");
        Ok(PlaneSpec { g: g.clone(), h, k, family, orthonormalized: true })
    }

    /// Largest deviation of the `g_p` Gram matrix of `(h, k)` from the identity.
    pub fn gram_deviation(&self, p: impl Into<FamilyIndex>) -> Result<f64> {
        let p = p.into();
        let hh = inner(p, &self.g, &self.h, &self.h)?;
        let kk = inner(p, &self.g, &self.k, &self.k)?;
        let hk = inner(p, &self.g, &self.h, &self.k)?;
        Ok((hh - 1.0).abs().max((kk - 1.0).abs()).max(hk.abs()))
    }

    /// The plane rotated by angle `phi` inside itself.
    pub fn rotated(&self, phi: f64) -> Result<PlaneSpec> {
        let (s, c) = phi.sin_cos();
        let h = self.h.scale(c).axpy(s, &self.k)?;
        let k = self.k.scale(c).axpy(-s, &self.h)?;
        Ok(PlaneSpec { g: self.g.clone(), h, k, family: self.family, orthonormalized: self.orthonormalized })
    }
}

/// Kulkarni–Nomizu expansion
/// `G(a,c)H(b,d) + G(b,d)H(a,c) − G(a,d)H(b,c) − G(b,c)H(a,d)`.
pub fn kn_product<G, H>(
    gf: G,
    hf: H,
    a: &TangentField,
    b: &TangentField,
    c: &TangentField,
    d: &TangentField,
) -> Result<f64>
where
    G: Fn(&TangentField, &TangentField) -> Result<f64>,
    H: Fn(&TangentField, &TangentField) -> Result<f64>,
{
    Ok(gf(a, c)? * hf(b, d)? + gf(b, d)? * hf(a, c)? - gf(a, d)? * hf(b, c)? - gf(b, c)? * hf(a, d)?)
}

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Sectional curvature of `g_p` on a `g_p`-orthonormal plane from the Ebin value:
///
/// ```text
/// sec_p = V^{-p} sec_E − ((2p − p²)/16) (N(g,k)² + N(g,h)² − n V^{p−1}),
/// ```
///
/// with `N = g_E / V` and `sec_E = ⟨R^E(h,k)k, h⟩_E` evaluated on the same
/// (`g_p`-orthonormal, hence not `g_E`-normalized) vectors, as returned by
/// `curvature_numeric(0, …)`.
pub fn sec_formula(p: impl Into<FamilyIndex>, plane: &PlaneSpec, sec_e: f64) -> Result<f64> {
    let p = p.into();
    let deviation = plane.gram_deviation(p)?;
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    let g = &plane.g;
    let v = g.volume();
    let n = g.dim() as f64;
    let taut = TangentField::tautological(g);
    let n_gh = inner(1.0, g, &taut, &plane.h)?;
    let n_gk = inner(1.0, g, &taut, &plane.k)?;
    let pp = p.p;
    Ok(v.powf(-pp) * sec_e - (2.0 * pp - pp * pp) / 16.0 * (n_gk * n_gk + n_gh * n_gh - n * v.powf(pp - 1.0)))
}

/// `R(h,k)k` with the base-point derivatives taken at step `eps`.
fn curvature_vector(
    p: FamilyIndex,
    g: &MetricField,
    h: &TangentField,
    k: &TangentField,
    eps: f64,
) -> Result<TangentField> {
    let d = |dir: &TangentField, a: &TangentField, b: &TangentField| -> Result<TangentField> {
        let plus = connection(p, &g.offset(dir, eps)?, a, b)?;
        let minus = connection(p, &g.offset(dir, -eps)?, a, b)?;
        Ok(plus.axpy(-1.0, &minus)?.scale(0.5 / eps))
    };
    let gkk = connection(p, g, k, k)?;
    let ghk = connection(p, g, h, k)?;
    let second = connection(p, g, h, &gkk)?.axpy(-1.0, &connection(p, g, k, &ghk)?)?;
    d(h, k, k)?.axpy(-1.0, &d(k, h, k)?)?.axpy(1.0, &second)
}

/// `⟨R(h,k)k, h⟩_p` by finite differences of connection values.
///
/// This is the unnormalized curvature form; it equals the sectional
/// curvature when `(h, k)` is `g_p`-orthonormal (see [`sectional_curvature`]
/// for arbitrary spanning pairs).
pub fn curvature_numeric(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &TangentField,
    k: &TangentField,
    eps: f64,
) -> Result<f64> {
    curvature_numeric_with(p, g, h, k, &CurvatureOptions { eps, ..Default::default() })
}

pub fn curvature_numeric_with(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &TangentField,
    k: &TangentField,
    opts: &CurvatureOptions,
) -> Result<f64> {
    let p = p.into();
    if !(1e-6..=1e-3).contains(&opts.eps) {
        return Err(Error::InvalidInput(format!("curvature step {} outside [1e-6, 1e-3]", opts.eps)));
    }
    g.check_tangent(h)?;
    g.check_tangent(k)?;
    let coarse = inner(p, g, &curvature_vector(p, g, h, k, opts.eps)?, h)?;
    let fine = inner(p, g, &curvature_vector(p, g, h, k, 0.5 * opts.eps)?, h)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let disagreement = (fine - coarse).abs() / (1.0 + value.abs());
    if disagreement > opts.max_disagreement {
        return Err(Error::Extrapolation { disagreement, bound: opts.max_disagreement });
    }
    Ok(value)
}

/// Sectional curvature of the plane spanned by `h, k` (any basis).
pub fn sectional_curvature(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &TangentField,
    k: &TangentField,
    eps: f64,
) -> Result<f64> {
    let p = p.into();
    let num = curvature_numeric(p, g, h, k, eps)?;
    let gram = inner(p, g, h, h)? * inner(p, g, k, k)? - inner(p, g, h, k)?.powi(2);
    if !(gram > 0.0) {
        return Err(Error::InvalidInput("h and k do not span a plane".into()));
    }
    Ok(num / gram)
}
