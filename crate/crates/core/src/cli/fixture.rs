//! Seeded random fields.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fiber::{SpdMatrix, SymMatrix};
use crate::manifold::DiscreteManifold;
use crate::metrics::{MetricField, TangentField};

pub const DEFAULT_SPREAD: f64 = 3.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthogonal factor of a Gaussian matrix, with the signs of `R`'s diagonal
/// folded in so the result is Haar distributed.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q diag(λ) Qᵀ` with `log λ` uniform in `[−log spread, log spread]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Result<SpdMatrix> {
    let ls = spread.ln();
    let eig: Vec<f64> = (0..n).map(|_| (ls * rng.gen_range(-1.0..=1.0)).exp()).collect();
    let q = random_orthogonal(rng, n);
    if eig.iter().all(|&l| l == eig[0]) {
        return SpdMatrix::identity(n).scale(eig[0]);
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
    SpdMatrix::new(SymMatrix::symmetrized(&q * d * q.transpose()))
}

/// Symmetric matrix with independent standard normal upper-triangle entries.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample(StandardNormal);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    SymMatrix::symmetrized(m)
}

pub fn random_tangent<R: Rng>(rng: &mut R, man: &Arc<DiscreteManifold>, scale: f64) -> Result<TangentField> {
    let mats = (0..man.len()).map(|_| random_symmetric(rng, man.dim()).scale(scale)).collect();
    TangentField::new(man.clone(), mats)
}

/// Random SPD field on `points` equally weighted points with identity
/// reference metrics (unit reference volume).
pub fn generate_fixture(n: usize, points: usize, seed: u64, spread: f64) -> Result<MetricField> {
    if n == 0 || points == 0 {
        return Err(Error::InvalidInput(format!("need n ≥ 1 and points ≥ 1, got n = {n}, points = {points}")));
    }
    if !(spread >= 1.0 && spread.is_finite()) {
        return Err(Error::InvalidInput(format!("spread must be finite and at least 1, got {spread}")));
    }
    let man = Arc::new(DiscreteManifold::uniform(n, points)?);
    let mut rng = rng(seed);
    let mats = (0..points).map(|_| random_spd(&mut rng, n, spread)).collect::<Result<Vec<_>>>()?;
    MetricField::new(man, mats)
}

/// Random metric field on an existing manifold.
pub fn random_metric<R: Rng>(rng: &mut R, man: &Arc<DiscreteManifold>, spread: f64) -> Result<MetricField> {
    let mats = (0..man.len()).map(|_| random_spd(rng, man.dim(), spread)).collect::<Result<Vec<_>>>()?;
    MetricField::new(man.clone(), mats)
}
