//! Pointwise symmetric-matrix algebra on a single fiber `S²₊T*ₓM`.
//!
//! Every matrix function here goes through a symmetric eigendecomposition
//! (of `g`, or of the congruence `g^{-1/2} S g^{-1/2}`), so results that must
//! be symmetric come out symmetric to rounding.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::path_energy::{self, PathEnergyOptions, PathProblem};

/// Default lower bound on the smallest eigenvalue of an SPD matrix.
pub const DEFAULT_SPD_EPS: f64 = 1e-12;

/// Relative asymmetry tolerated when accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A real symmetric `n × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates squareness, finiteness and symmetry, then stores the exact
    /// symmetrization.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { point: 0 });
        }
        let scale = m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let asym = (&m - m.transpose()).iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if scale > 0.0 && asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { point: 0, asymmetry: asym / scale });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes `(m + mᵀ)/2` without any checks.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(d)))
    }

    /// Builds from the row-major upper triangle `[a11, a12, …, a1n, a22, …, ann]`.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * (n + 1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: upper.len() });
        }
        if upper.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { point: 0 });
        }
        let mut m = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = upper[idx];
                m[(j, i)] = upper[idx];
                idx += 1;
            }
        }
        Ok(SymMatrix(m))
    }

    /// Row-major upper triangle.
    pub fn to_upper(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// Self-congruence `a m aᵀ`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Self {
        SymMatrix::symmetrized(a * &self.0 * a.transpose())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(&self.0 * rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

/// A symmetric positive-definite matrix together with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    mat: SymMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    pub fn new(m: SymMatrix) -> Result<Self> {
        Self::with_eps(m, DEFAULT_SPD_EPS)
    }

    /// Accepts `m` if its smallest eigenvalue exceeds `eps`.
    pub fn with_eps(m: SymMatrix, eps: f64) -> Result<Self> {
        let eig = SymmetricEigen::new(m.0.clone());
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) || eig.eigenvectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigen("non-finite eigenpairs".into()));
        }
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > eps) {
            return Err(Error::NotPositiveDefinite { point: 0, min_eigenvalue: min });
        }
        Ok(SpdMatrix { mat: m, eigenvalues: eig.eigenvalues.iter().cloned().collect(), eigenvectors: eig.eigenvectors })
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrix::new(m)?)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(SymMatrix::identity(n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.mat
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat.0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn det(&self) -> f64 {
        self.eigenvalues.iter().product()
    }

    pub fn ln_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| f(l)),
        ));
        let m = v * d * v.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.spectral_map(|l| 1.0 / l)
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.spectral_map(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        self.spectral_map(|l| 1.0 / l.sqrt())
    }

    /// `c·g` for `c > 0`; the eigenvectors are reused, so no cone check is
    /// needed beyond the sign of `c`.
    pub fn scale(&self, c: f64) -> Result<SpdMatrix> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::NotPositiveDefinite { point: 0, min_eigenvalue: c * self.min_eigenvalue() });
        }
        Ok(SpdMatrix {
            mat: self.mat.scale(c),
            eigenvalues: self.eigenvalues.iter().map(|l| l * c).collect(),
            eigenvectors: self.eigenvectors.clone(),
        })
    }

    /// `tr(g⁻¹ h)`.
    pub fn trace_of(&self, h: &SymMatrix) -> f64 {
        (self.inverse() * h.as_matrix()).trace()
    }

    /// `tr(g⁻¹ h g⁻¹ k)`.
    pub fn trace_pair(&self, h: &SymMatrix, k: &SymMatrix) -> f64 {
        let gi = self.inverse();
        let a = &gi * h.as_matrix();
        let b = &gi * k.as_matrix();
        (a * b).trace()
    }

    /// `√det(g̃⁻¹ g)`: the density of `dV_g` against `dV_g̃`.
    pub fn density_against(&self, gtilde: &SpdMatrix) -> f64 {
        (self.det() / gtilde.det()).sqrt()
    }
}

/// Pure-trace / traceless decomposition `h = h0 + (f/n) g` with `f = tr(g⁻¹h)`.
pub fn trace_split(g: &SpdMatrix, h: &SymMatrix) -> Result<(SymMatrix, f64)> {
    check_same_dim(g.dim(), h.dim())?;
    let n = g.dim() as f64;
    let f = g.trace_of(h);
    let h0 = h - &g.sym().scale(f / n);
    Ok((h0, f))
}

/// `g · exp(t g⁻¹ S)`, evaluated as `g^{1/2} exp(t g^{-1/2} S g^{-1/2}) g^{1/2}`.
pub fn push_exponential(g: &SpdMatrix, s: &SymMatrix, t: f64) -> Result<SpdMatrix> {
    check_same_dim(g.dim(), s.dim())?;
    if s.is_zero() || t == 0.0 {
        return Ok(g.clone());
    }
    let half = g.sqrt();
    let inv_half = g.inv_sqrt();
    let inner = SymMatrix::symmetrized(&inv_half * s.as_matrix() * &inv_half).scale(t);
    let eig = SymmetricEigen::new(inner.0);
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("exponent eigenvalues are not finite".into()));
    }
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
    let e = v * d * v.transpose();
    let out = SymMatrix::symmetrized(&half * e * &half);
    SpdMatrix::with_eps(out, 0.0)
}

/// Weighted fiber inner product `tr(a⁻¹ b a⁻¹ c) √det(g̃⁻¹ a)`.
pub fn fiber_inner(a: &SpdMatrix, b: &SymMatrix, c: &SymMatrix, gtilde: &SpdMatrix) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    check_same_dim(a.dim(), c.dim())?;
    check_same_dim(a.dim(), gtilde.dim())?;
    Ok(a.trace_pair(b, c) * a.density_against(gtilde))
}

/// Options for the fiber path optimizer.
#[derive(Clone, Debug)]
pub struct FiberDistanceOptions {
    pub segments: usize,
    pub energy: PathEnergyOptions,
}

impl Default for FiberDistanceOptions {
    fn default() -> Self {
        FiberDistanceOptions { segments: 32, energy: PathEnergyOptions::default() }
    }
}

/// Result of a fiber distance computation: the optimal polyline and its length.
#[derive(Clone, Debug)]
pub struct FiberPath {
    pub nodes: Vec<SpdMatrix>,
    pub length: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Distance between `a` and `b` in the weighted fiber metric, estimated as
/// the length of an energy-minimizing `m`-segment polyline.
pub fn fiber_distance(a: &SpdMatrix, b: &SpdMatrix, gtilde: &SpdMatrix, m: usize) -> Result<f64> {
    let opts = FiberDistanceOptions { segments: m, ..Default::default() };
    Ok(fiber_geodesic(a, b, gtilde, &opts)?.length)
}

/// Energy-minimizing polyline between two fiber points.
pub fn fiber_geodesic(
    a: &SpdMatrix,
    b: &SpdMatrix,
    gtilde: &SpdMatrix,
    opts: &FiberDistanceOptions,
) -> Result<FiberPath> {
    check_same_dim(a.dim(), b.dim())?;
    check_same_dim(a.dim(), gtilde.dim())?;
    if opts.segments < 8 {
        return Err(Error::InvalidInput(format!("fiber distance needs at least 8 segments, got {}", opts.segments)));
    }
    if a.as_matrix() == b.as_matrix() {
        return Ok(FiberPath { nodes: vec![a.clone(); opts.segments + 1], length: 0.0, iterations: 0, grad_norm: 0.0 });
    }
    let problem = PathProblem::new(vec![1.0], vec![gtilde.clone()], 0.0);
    let sol =
        path_energy::minimize(&problem, std::slice::from_ref(a), std::slice::from_ref(b), opts.segments, &opts.energy)?;
    let nodes = sol.nodes.into_iter().map(|mut v| v.remove(0)).collect();
    Ok(FiberPath { nodes, length: sol.length, iterations: sol.iterations, grad_norm: sol.grad_norm })
}

pub(crate) fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        SymMatrix::symmetrized(m)
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SpdMatrix {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        SpdMatrix::from_matrix(m).unwrap()
    }

    /// Cofactor-expansion determinant, independent of the eigen route.
    fn det_cofactor(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut acc = 0.0;
        for j in 0..n {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * m[(0, j)] * det_cofactor(&minor);
        }
        acc
    }

    #[test]
    fn upper_triangle_layout() {
        let s = SymMatrix::from_upper(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(s.as_matrix()[(1, 0)], 2.0);
        assert_eq!(s.as_matrix()[(2, 1)], 5.0);
        assert_eq!(s.to_upper(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(SymMatrix::from_upper(2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::NotSymmetric { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::from_matrix(m), Err(Error::NotPositiveDefinite { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1e-3, 0.0, 0.0, 1.0]);
        assert!(SpdMatrix::with_eps(SymMatrix::new(m.clone()).unwrap(), 1e-2).is_err());
        assert!(SpdMatrix::with_eps(SymMatrix::new(m).unwrap(), 1e-4).is_ok());
    }

    #[test]
    fn trace_split_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_spd(&mut rng, 3);
        let (h0, f) = trace_split(&g, g.sym()).unwrap();
        assert!(h0.frobenius_norm() < 1e-13);
        assert!((f - 3.0).abs() < 1e-13);

        let id = SpdMatrix::identity(2);
        let h = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let (h0, f) = trace_split(&id, &h).unwrap();
        assert_eq!(h0, h);
        assert_eq!(f, 0.0);

        for _ in 0..20 {
            let g = random_spd(&mut rng, 3);
            let h = random_sym(&mut rng, 3);
            let (h0, f) = trace_split(&g, &h).unwrap();
            assert!(g.trace_of(&h0).abs() < 1e-12);
            let back = &h0 + &g.sym().scale(f / 3.0);
            assert!((&back - &h).frobenius_norm() < 1e-13);
        }
    }

    #[test]
    fn push_exponential_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_spd(&mut rng, 3);
        assert_eq!(push_exponential(&g, &SymMatrix::zeros(3), 0.7).unwrap(), g);

        let id = SpdMatrix::identity(2);
        let s = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let out = push_exponential(&id, &s, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((out.as_matrix()[(0, 0)] - e).abs() < 1e-14);
        assert!((out.as_matrix()[(1, 1)] - 1.0 / e).abs() < 1e-15);
        assert!(out.as_matrix()[(0, 1)].abs() < 1e-15);

        for _ in 0..20 {
            let g = random_spd(&mut rng, 3);
            let s = random_sym(&mut rng, 3);
            let t: f64 = rng.gen_range(-1.5..1.5);
            let out = push_exponential(&g, &s, t).unwrap();
            let expected = det_cofactor(g.as_matrix()) * (t * g.trace_of(&s)).exp();
            let got = det_cofactor(out.as_matrix());
            assert!(((got - expected) / expected).abs() < 1e-10);
        }
    }

    #[test]
    fn push_exponential_group_property() {
        // g(t+s) = push(push(g, S, t), S', s) where S' = g(t) g⁻¹ S is the pushed direction.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let g = random_spd(&mut rng, 3);
            let s = random_sym(&mut rng, 3);
            let (t1, t2) = (0.4, -0.9);
            let gt = push_exponential(&g, &s, t1).unwrap();
            let pushed = SymMatrix::symmetrized(gt.as_matrix() * g.inverse() * s.as_matrix());
            let composed = push_exponential(&gt, &pushed, t2).unwrap();
            let direct = push_exponential(&g, &s, t1 + t2).unwrap();
            let err = (composed.as_matrix() - direct.as_matrix()).norm() / direct.as_matrix().norm();
            assert!(err < 1e-10, "group property error {err}");
        }
    }

    #[test]
    fn fiber_inner_examples() {
        let id = SpdMatrix::identity(2);
        let v = fiber_inner(&id, id.sym(), id.sym(), &id).unwrap();
        assert!((v - 2.0).abs() < 1e-15);

        let a = SpdMatrix::from_matrix(DMatrix::from_element(1, 1, 2.5)).unwrap();
        let h = SymMatrix::from_diagonal(&[0.7]);
        let one = SpdMatrix::identity(1);
        let v = fiber_inner(&a, &h, &h, &one).unwrap();
        assert!((v - 0.49 * 2.5_f64.powf(-1.5)).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = random_spd(&mut rng, 3);
            let gt = random_spd(&mut rng, 3);
            let b = random_sym(&mut rng, 3);
            let c = random_sym(&mut rng, 3);
            let ai = a.as_matrix().clone().try_inverse().unwrap();
            let tr = (&ai * b.as_matrix() * &ai * c.as_matrix()).trace();
            let dens = (det_cofactor(a.as_matrix()) / det_cofactor(gt.as_matrix())).sqrt();
            let got = fiber_inner(&a, &b, &c, &gt).unwrap();
            assert!((got - tr * dens).abs() < 1e-12 * (1.0 + (tr * dens).abs()));
            let sym = fiber_inner(&a, &c, &b, &gt).unwrap();
            assert!((got - sym).abs() < 1e-13 * (1.0 + got.abs()));
        }
    }

    #[test]
    fn fiber_inner_frame_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_spd(&mut rng, 3);
            let gt = random_spd(&mut rng, 3);
            let b = random_sym(&mut rng, 3);
            let c = random_sym(&mut rng, 3);
            let p = DMatrix::from_fn(3, 3, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
            let a2 = SpdMatrix::new(a.sym().congruence(&p)).unwrap();
            let gt2 = SpdMatrix::new(gt.sym().congruence(&p)).unwrap();
            let v1 = fiber_inner(&a, &b, &c, &gt).unwrap();
            let v2 = fiber_inner(&a2, &b.congruence(&p), &c.congruence(&p), &gt2).unwrap();
            assert!((v1 - v2).abs() < 1e-10 * (1.0 + v1.abs()));
        }
    }

    #[test]
    fn fiber_distance_one_dimensional_closed_form() {
        let one = SpdMatrix::identity(1);
        let spd1 = |x: f64| SpdMatrix::from_matrix(DMatrix::from_element(1, 1, x)).unwrap();
        let d = fiber_distance(&spd1(1.0), &spd1(16.0), &one, 16).unwrap();
        assert!((d - 4.0).abs() < 1e-6, "d = {d}");
        for &(a, b) in &[(0.3, 2.0), (5.0, 0.01), (1.0, 1.5)] {
            let d = fiber_distance(&spd1(a), &spd1(b), &one, 16).unwrap();
            let exact = 4.0 * (a.powf(0.25) - b.powf(0.25)).abs();
            assert!((d - exact).abs() < 1e-6, "a={a} b={b} d={d} exact={exact}");
        }
        assert_eq!(fiber_distance(&spd1(2.0), &spd1(2.0), &one, 8).unwrap(), 0.0);
        assert!(fiber_distance(&spd1(2.0), &spd1(3.0), &one, 4).is_err());
    }
}
