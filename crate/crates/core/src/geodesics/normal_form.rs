use crate::error::Result;
use crate::fiber::{trace_split, SymMatrix};
use crate::metrics::{inner, MetricField, TangentField};

/// Below this relative size the traceless part `A(x)` counts as zero.
const A_ZERO_RTOL: f64 = 1e-12;
/// Below this relative size `b₀²` counts as zero (the conformal-ray case).
const B0_ZERO_RTOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointCase {
    /// `A(x) = 0`: the point moves inside its conformal class.
    PureConformal,
    Generic,
}

/// Global scalars and pointwise data of the closed-form `g_N` geodesic
/// starting at `g₀` with velocity `h₀`.
///
/// With `f = tr(g₀⁻¹h₀)`, `A = h₀ − (f/n) g₀` and `V₀ = V_{g₀}`:
///
/// * `σ² = ‖h₀‖²_N`, `a₀ = V₀⁻¹ ∫ f dV_{g₀}`, `b₀ = ½ √(nσ² − a₀²)`;
/// * `q(x) = f(x)/2 − a₀/2`, `r(x) = √((n/4) tr((g₀⁻¹A)²))`;
/// * `θ(x) ∈ (0, 2π]` is `b₀` times the first zero of `b₀ cos(b₀t/2) + q sin(b₀t/2)`.
#[derive(Clone, Debug)]
pub struct GeodesicNormalForm {
    pub n: usize,
    pub sigma: f64,
    pub a0: f64,
    pub b0: f64,
    pub volume0: f64,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    /// `None` when `b₀ = 0`.
    pub theta: Vec<Option<f64>>,
    /// Traceless direction `A(x)`, unnormalized.
    pub abar: Vec<SymMatrix>,
    pub cases: Vec<PointCase>,
    /// `b₀ = 0`: `h₀ = λ g₀` with `λ` constant, and the geodesic is a ray.
    pub conformal_ray: bool,
}

impl GeodesicNormalForm {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `A(x) / √tr((g₀⁻¹A)²)`, or zero where `A(x) = 0`.
    pub fn normalized_direction(&self, i: usize) -> SymMatrix {
        if self.cases[i] == PointCase::PureConformal {
            return SymMatrix::zeros(self.n);
        }
        let nrm = 2.0 * self.r[i] / (self.n as f64).sqrt();
        self.abar[i].scale(1.0 / nrm)
    }
}

/// `θ ∈ (0, 2π]` from `q` and `b₀ > 0`.
pub(crate) fn branch_angle(q: f64, b0: f64) -> f64 {
    let c = ((q * q - b0 * b0) / (q * q + b0 * b0)).clamp(-1.0, 1.0);
    if q >= 0.0 {
        2.0 * std::f64::consts::PI - c.acos()
    } else {
        c.acos()
    }
}

pub fn normal_form(g0: &MetricField, h0: &TangentField) -> Result<GeodesicNormalForm> {
    g0.check_tangent(h0)?;
    let n = g0.dim();
    let nf = n as f64;
    let v0 = g0.volume();
    let sigma2 = inner(1.0, g0, h0, h0)?;
    let mut f = Vec::with_capacity(g0.len());
    let mut abar = Vec::with_capacity(g0.len());
    for i in 0..g0.len() {
        let (a, fi) = trace_split(g0.mat(i), h0.mat(i))?;
        f.push(fi);
        abar.push(a);
    }
    let a0 = g0.integrate_values(&f) / v0;
    let b0sq = (nf * sigma2 - a0 * a0) / 4.0;
    let conformal_ray = b0sq <= B0_ZERO_RTOL * nf * sigma2;
    let b0 = if conformal_ray { 0.0 } else { b0sq.sqrt() };
    let mut q = Vec::with_capacity(g0.len());
    let mut r = Vec::with_capacity(g0.len());
    let mut cases = Vec::with_capacity(g0.len());
    let mut theta = Vec::with_capacity(g0.len());
    for i in 0..g0.len() {
        let qi = if conformal_ray { 0.0 } else { 0.5 * f[i] - 0.5 * a0 };
        let ai = g0.mat(i).trace_pair(&abar[i], &abar[i]).max(0.0);
        let scale = g0.mat(i).trace_pair(h0.mat(i), h0.mat(i)).max(0.0);
        let zero = conformal_ray || ai <= A_ZERO_RTOL * A_ZERO_RTOL * scale;
        let ri = if zero { 0.0 } else { (0.25 * nf * ai).sqrt() };
        q.push(qi);
        r.push(ri);
        cases.push(if zero { PointCase::PureConformal } else { PointCase::Generic });
        theta.push(if conformal_ray { None } else { Some(branch_angle(qi, b0)) });
    }
    Ok(GeodesicNormalForm {
        n,
        sigma: sigma2.max(0.0).sqrt(),
        a0,
        b0,
        volume0: v0,
        q,
        r,
        theta,
        abar,
        cases,
        conformal_ray,
    })
}
