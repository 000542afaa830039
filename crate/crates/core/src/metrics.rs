//! Metric and tangent fields, the family `g_p = g_E / V^p`, and the duality map.
//!
//! `g_E(h, k) = ∫ tr(g⁻¹hg⁻¹k) dV_g` is the Ebin metric; `p = 1` gives the
//! normalized metric `g_N` and `p = 2` its dual under `F(g) = V^{-4/n} g`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fiber::{SpdMatrix, SymMatrix};
use crate::manifold::{map_points, pairwise_sum, try_map_points, DensityField, DiscreteManifold};

/// Exponent `p` of the family `g_p = g_E / V^p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyIndex {
    pub p: f64,
}

impl FamilyIndex {
    pub const EBIN: FamilyIndex = FamilyIndex { p: 0.0 };
    pub const NORMALIZED: FamilyIndex = FamilyIndex { p: 1.0 };
    pub const DUAL_EBIN: FamilyIndex = FamilyIndex { p: 2.0 };

    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("family exponent must be finite, got {p}")));
        }
        Ok(FamilyIndex { p })
    }

    /// The index exchanged with this one by the duality map.
    pub fn dual(self) -> FamilyIndex {
        FamilyIndex { p: 2.0 - self.p }
    }
}

impl From<f64> for FamilyIndex {
    fn from(p: f64) -> Self {
        FamilyIndex { p }
    }
}

/// One SPD matrix per point of a manifold: an element of the space of metrics.
#[derive(Clone, Debug)]
pub struct MetricField {
    man: Arc<DiscreteManifold>,
    mats: Vec<SpdMatrix>,
}

/// One symmetric matrix per point: a tangent vector to the space of metrics.
#[derive(Clone, Debug)]
pub struct TangentField {
    man: Arc<DiscreteManifold>,
    mats: Vec<SymMatrix>,
}

fn check_shape(man: &DiscreteManifold, len: usize, dims: impl Iterator<Item = usize>) -> Result<()> {
    if len != man.len() {
        return Err(Error::DimensionMismatch { expected: man.len(), found: len });
    }
    for d in dims {
        if d != man.dim() {
            return Err(Error::DimensionMismatch { expected: man.dim(), found: d });
        }
    }
    Ok(())
}

fn same_manifold(a: &Arc<DiscreteManifold>, b: &Arc<DiscreteManifold>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl MetricField {
    pub fn new(man: Arc<DiscreteManifold>, mats: Vec<SpdMatrix>) -> Result<Self> {
        check_shape(&man, mats.len(), mats.iter().map(|m| m.dim()))?;
        Ok(MetricField { man, mats })
    }

    /// Validates raw matrices; errors name the offending point.
    pub fn from_matrices(man: Arc<DiscreteManifold>, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let spd = mats
            .into_iter()
            .enumerate()
            .map(|(i, m)| SpdMatrix::from_matrix(m).map_err(|e| e.at_point(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(man, spd)
    }

    /// The reference metric `g̃` itself.
    pub fn reference(man: Arc<DiscreteManifold>) -> Self {
        let mats = man.references();
        MetricField { man, mats }
    }

    pub fn manifold(&self) -> &DiscreteManifold {
        &self.man
    }

    pub fn manifold_arc(&self) -> &Arc<DiscreteManifold> {
        &self.man
    }

    pub fn dim(&self) -> usize {
        self.man.dim()
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn mats(&self) -> &[SpdMatrix] {
        &self.mats
    }

    pub fn mat(&self, i: usize) -> &SpdMatrix {
        &self.mats[i]
    }

    /// Pointwise densities `√det(g̃ᵢ⁻¹ gᵢ)` of `dV_g` against the reference measure.
    pub fn densities(&self) -> Vec<f64> {
        self.mats.iter().zip(self.man.points()).map(|(g, pt)| g.density_against(&pt.reference_metric)).collect()
    }

    /// Volume masses `wᵢ √det(g̃ᵢ⁻¹ gᵢ)`.
    pub fn masses(&self) -> Vec<f64> {
        self.densities().iter().zip(self.man.points()).map(|(d, pt)| d * pt.weight).collect()
    }

    /// `Σᵢ wᵢ φᵢ √det(g̃ᵢ⁻¹ gᵢ)` for a value list already known to have the right length.
    pub fn integrate_values(&self, phi: &[f64]) -> f64 {
        let terms: Vec<f64> = self.masses().iter().zip(phi).map(|(m, f)| m * f).collect();
        pairwise_sum(&terms)
    }

    pub fn volume(&self) -> f64 {
        pairwise_sum(&self.masses())
    }

    /// Pointwise `tr(g⁻¹h)`.
    pub fn traces(&self, h: &TangentField) -> Vec<f64> {
        map_points(self.len(), |i| self.mats[i].trace_of(&h.mats[i]))
    }

    /// Pointwise `tr(g⁻¹hg⁻¹k)`.
    pub fn trace_pairs(&self, h: &TangentField, k: &TangentField) -> Vec<f64> {
        map_points(self.len(), |i| self.mats[i].trace_pair(&h.mats[i], &k.mats[i]))
    }

    pub fn check_tangent(&self, h: &TangentField) -> Result<()> {
        if !same_manifold(&self.man, &h.man) {
            return Err(Error::ManifoldMismatch);
        }
        Ok(())
    }

    pub fn check_metric(&self, other: &MetricField) -> Result<()> {
        if !same_manifold(&self.man, &other.man) {
            return Err(Error::ManifoldMismatch);
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Result<MetricField> {
        self.conformal(&vec![c; self.len()])
    }

    /// Pointwise conformal change `φᵢ gᵢ`.
    pub fn conformal(&self, factors: &[f64]) -> Result<MetricField> {
        if factors.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: factors.len() });
        }
        let mats = try_map_points(self.len(), |i| {
            let c = factors[i];
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::NotPositiveDefinite { point: i, min_eigenvalue: c });
            }
            self.mats[i].scale(c).map_err(|e| e.at_point(i))
        })?;
        Ok(MetricField { man: self.man.clone(), mats })
    }

    /// `g + t·h`, failing with the point index if the result leaves the cone.
    pub fn offset(&self, h: &TangentField, t: f64) -> Result<MetricField> {
        self.check_tangent(h)?;
        let mats = try_map_points(self.len(), |i| {
            let m = self.mats[i].sym() + &h.mats[i].scale(t);
            SpdMatrix::with_eps(m, 0.0).map_err(|e| e.at_point(i))
        })?;
        Ok(MetricField { man: self.man.clone(), mats })
    }

    /// Tangent field `h − g` (as matrices).
    pub fn difference(&self, other: &MetricField) -> Result<TangentField> {
        self.check_metric(other)?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| b.sym() - a.sym()).collect();
        Ok(TangentField { man: self.man.clone(), mats })
    }

    /// Max pointwise Frobenius distance to another field.
    pub fn max_deviation(&self, other: &MetricField) -> f64 {
        self.mats.iter().zip(&other.mats).map(|(a, b)| (a.as_matrix() - b.as_matrix()).norm()).fold(0.0, f64::max)
    }
}

impl TangentField {
    pub fn new(man: Arc<DiscreteManifold>, mats: Vec<SymMatrix>) -> Result<Self> {
        check_shape(&man, mats.len(), mats.iter().map(|m| m.dim()))?;
        Ok(TangentField { man, mats })
    }

    pub fn from_matrices(man: Arc<DiscreteManifold>, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let sym = mats
            .into_iter()
            .enumerate()
            .map(|(i, m)| SymMatrix::new(m).map_err(|e| e.at_point(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(man, sym)
    }

    pub fn zeros(man: Arc<DiscreteManifold>) -> Self {
        let mats = vec![SymMatrix::zeros(man.dim()); man.len()];
        TangentField { man, mats }
    }

    /// The tautological field: `g` viewed as a tangent vector at `g`.
    pub fn tautological(g: &MetricField) -> Self {
        TangentField { man: g.man.clone(), mats: g.mats.iter().map(|m| m.sym().clone()).collect() }
    }

    /// Pure-trace field `φᵢ gᵢ`.
    pub fn pure_trace(g: &MetricField, phi: &[f64]) -> Result<Self> {
        if phi.len() != g.len() {
            return Err(Error::DimensionMismatch { expected: g.len(), found: phi.len() });
        }
        let mats = g.mats.iter().zip(phi).map(|(m, c)| m.sym().scale(*c)).collect();
        Ok(TangentField { man: g.man.clone(), mats })
    }

    pub fn manifold(&self) -> &DiscreteManifold {
        &self.man
    }

    pub fn manifold_arc(&self) -> &Arc<DiscreteManifold> {
        &self.man
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.man.dim()
    }

    pub fn mats(&self) -> &[SymMatrix] {
        &self.mats
    }

    pub fn mat(&self, i: usize) -> &SymMatrix {
        &self.mats[i]
    }

    pub fn scale(&self, c: f64) -> TangentField {
        TangentField { man: self.man.clone(), mats: self.mats.iter().map(|m| m.scale(c)).collect() }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &TangentField) -> Result<TangentField> {
        if !same_manifold(&self.man, &other.man) {
            return Err(Error::ManifoldMismatch);
        }
        let mats = self.mats.iter().zip(&other.mats).map(|(x, y)| x + &y.scale(a)).collect();
        Ok(TangentField { man: self.man.clone(), mats })
    }

    /// Pointwise scaling `φᵢ hᵢ`.
    pub fn pointwise_scale(&self, phi: &[f64]) -> TangentField {
        let mats = self.mats.iter().zip(phi).map(|(m, c)| m.scale(*c)).collect();
        TangentField { man: self.man.clone(), mats }
    }

    pub fn max_frobenius(&self) -> f64 {
        self.mats.iter().map(|m| m.frobenius_norm()).fold(0.0, f64::max)
    }

    pub fn max_deviation(&self, other: &TangentField) -> f64 {
        self.mats.iter().zip(&other.mats).map(|(a, b)| (a.as_matrix() - b.as_matrix()).norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.mats.iter().all(|m| m.is_zero())
    }
}

/// Ebin inner product `∫ tr(g⁻¹hg⁻¹k) dV_g`.
pub fn ebin_inner(g: &MetricField, h: &TangentField, k: &TangentField) -> Result<f64> {
    g.check_tangent(h)?;
    g.check_tangent(k)?;
    Ok(g.integrate_values(&g.trace_pairs(h, k)))
}

/// `g_p(h, k) = V_g^{-p} g_E(h, k)`.
pub fn inner(p: impl Into<FamilyIndex>, g: &MetricField, h: &TangentField, k: &TangentField) -> Result<f64> {
    let p = p.into().p;
    Ok(g.volume().powf(-p) * ebin_inner(g, h, k)?)
}

pub fn norm(p: impl Into<FamilyIndex>, g: &MetricField, h: &TangentField) -> Result<f64> {
    Ok(inner(p, g, h, h)?.max(0.0).sqrt())
}

/// The metric conformal to `g` whose volume density against the reference
/// measure is `mu0` pointwise: `(μ₀ / ρ_g)^{2/n} g`. This inverts the
/// splitting of a metric into (volume form, unimodular part).
pub fn conformal_normalize(g: &MetricField, mu0: &DensityField) -> Result<MetricField> {
    if mu0.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), found: mu0.len() });
    }
    let n = g.dim() as f64;
    let rho = g.densities();
    let mut factors = Vec::with_capacity(g.len());
    for (i, (&m, r)) in mu0.values().iter().zip(&rho).enumerate() {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidInput(format!("point {i}: target density must be positive, got {m}")));
        }
        factors.push((m / r).powf(2.0 / n));
    }
    g.conformal(&factors)
}

/// `F(g) = V_g^{-4/n} g`, an involutive isometry between `g_p` and `g_{2-p}`.
pub fn duality_map(g: &MetricField) -> Result<MetricField> {
    let n = g.dim() as f64;
    g.scaled(g.volume().powf(-4.0 / n))
}

/// `dF_g(h) = V^{-4/n} h − (2/n) V^{-4/n-1} g_E(g, h) g`.
pub fn duality_differential(g: &MetricField, h: &TangentField) -> Result<TangentField> {
    let n = g.dim() as f64;
    let v = g.volume();
    let taut = TangentField::tautological(g);
    let geh = ebin_inner(g, &taut, h)?;
    let q = v.powf(-4.0 / n);
    h.scale(q).axpy(-(2.0 / n) * q / v * geh, &taut)
}

/// Modified Gram–Schmidt in the `g_p` inner product.
pub fn orthonormalize(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    fields: &[TangentField],
) -> Result<Vec<TangentField>> {
    let p = p.into();
    let mut out: Vec<TangentField> = Vec::with_capacity(fields.len());
    for (j, f) in fields.iter().enumerate() {
        let mut v = f.clone();
        for e in &out {
            let c = inner(p, g, &v, e)?;
            v = v.axpy(-c, e)?;
        }
        let nv = norm(p, g, &v)?;
        if !(nv > 1e-300) {
            return Err(Error::InvalidInput(format!("field {j} is linearly dependent on the previous ones")));
        }
        out.push(v.scale(1.0 / nv));
    }
    Ok(out)
}
