//! Discrete path-energy minimization between two metric fields.
//!
//! A path is an `m`-segment polyline in the space of fields. Each segment is
//! the straight line between consecutive nodes and its length is integrated
//! with Gauss–Legendre quadrature, so the reported length is the length of a
//! genuine piecewise-linear path (an upper bound for the distance). Interior
//! nodes are moved by L-BFGS on the discrete energy `m Σ L_j²`; a trial step
//! that leaves the positive-definite cone is rejected by the line search.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fiber::{push_exponential, SpdMatrix, SymMatrix};

type Fields = Vec<DMatrix<f64>>;

/// Gauss–Legendre nodes and weights on `[0, 1]` (5 points).
pub const GL5_NODES: [f64; 5] =
    [0.046_910_077_030_668_004, 0.230_765_344_947_158_45, 0.5, 0.769_234_655_052_841_6, 0.953_089_922_969_332];
pub const GL5_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_45,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

/// The metric `‖D‖²_X = V_X^{-p} Σᵢ wᵢ √det(g̃ᵢ⁻¹Xᵢ) tr(Xᵢ⁻¹DᵢXᵢ⁻¹Dᵢ)` on fields of
/// `weights.len()` points. A single point with unit weight and `p = 0` is the
/// fiber metric.
#[derive(Clone, Debug)]
pub struct PathProblem {
    weights: Vec<f64>,
    ref_dets: Vec<f64>,
    p: f64,
}

impl PathProblem {
    pub fn new(weights: Vec<f64>, references: Vec<SpdMatrix>, p: f64) -> Self {
        assert_eq!(weights.len(), references.len());
        let ref_dets = references.iter().map(|g| g.det()).collect();
        PathProblem { weights, ref_dets, p }
    }

    pub fn points(&self) -> usize {
        self.weights.len()
    }

    /// Squared norm of `d` at `x`; `None` outside the cone.
    pub fn norm_sq(&self, x: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> Option<f64> {
        let mut vol = 0.0;
        let mut acc = 0.0;
        for i in 0..self.points() {
            let chol = x[i].clone().cholesky()?;
            let inv = chol.inverse();
            let det = chol.determinant();
            let rho = (det / self.ref_dets[i]).sqrt();
            let a = &inv * &d[i];
            vol += self.weights[i] * rho;
            acc += self.weights[i] * rho * (&a * &a).trace();
        }
        Some(vol.powf(-self.p) * acc)
    }

    /// Squared norm with its gradients with respect to base point and direction.
    fn norm_sq_grad(&self, x: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> Option<(f64, Fields, Fields)> {
        let np = self.points();
        let mut vol = 0.0;
        let mut sum = 0.0;
        let mut parts = Vec::with_capacity(np);
        for i in 0..np {
            let chol = x[i].clone().cholesky()?;
            let inv = chol.inverse();
            let det = chol.determinant();
            if !(det > 0.0) {
                return None;
            }
            let rho = (det / self.ref_dets[i]).sqrt();
            let a = &inv * &d[i];
            let tr = (&a * &a).trace();
            vol += self.weights[i] * rho;
            sum += self.weights[i] * rho * tr;
            parts.push((inv, a, rho, tr));
        }
        let scale = vol.powf(-self.p);
        let q = scale * sum;
        let mut gx = Vec::with_capacity(np);
        let mut gd = Vec::with_capacity(np);
        for (i, (inv, a, rho, tr)) in parts.into_iter().enumerate() {
            let wr = self.weights[i] * rho;
            // a = M⁻¹D, so M⁻¹DM⁻¹ = a M⁻¹ and M⁻¹DM⁻¹DM⁻¹ = a a M⁻¹.
            let adm = &a * &inv;
            let aadm = &a * &adm;
            let mut grad_x = (&inv * (0.5 * tr) - aadm * 2.0) * (scale * wr);
            if self.p != 0.0 {
                grad_x -= &inv * (0.5 * self.p * scale / vol * sum * wr);
            }
            gx.push(symmetrize(grad_x));
            gd.push(symmetrize(adm * (2.0 * scale * wr)));
        }
        Some((q, gx, gd))
    }

    /// Length of the straight segment from `x0` to `x1` (5-point Gauss–Legendre).
    pub fn segment_length(&self, x0: &[DMatrix<f64>], x1: &[DMatrix<f64>]) -> Option<f64> {
        let d: Vec<_> = x0.iter().zip(x1).map(|(a, b)| b - a).collect();
        let mut len = 0.0;
        for (s, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            let m: Vec<_> = x0.iter().zip(&d).map(|(a, di)| a + di * *s).collect();
            len += w * self.norm_sq(&m, &d)?.max(0.0).sqrt();
        }
        Some(len)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

#[derive(Clone, Debug)]
pub struct PathEnergyOptions {
    pub max_iterations: usize,
    /// Stop when the whitened gradient's sup-norm falls below `gtol · max(1, E)`.
    pub gtol: f64,
    pub history: usize,
}

impl Default for PathEnergyOptions {
    fn default() -> Self {
        PathEnergyOptions { max_iterations: 20_000, gtol: 1e-9, history: 12 }
    }
}

#[derive(Clone, Debug)]
pub struct PathSolution {
    /// `m + 1` nodes, each a field of `points` matrices.
    pub nodes: Vec<Vec<SpdMatrix>>,
    pub length: f64,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Pointwise affine-invariant interpolation `a^{1/2}(a^{-1/2} b a^{-1/2})^t a^{1/2}`.
pub fn affine_interpolation(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    let ih = a.inv_sqrt();
    let h = a.sqrt();
    let c = SpdMatrix::with_eps(SymMatrix::symmetrized(&ih * b.as_matrix() * &ih), 0.0)?;
    let log_c = c.spectral_map(f64::ln);
    let dir = SymMatrix::symmetrized(&h * log_c * &h);
    push_exponential(a, &dir, t)
}

/// Parametrization of the interior nodes: `X = P (I + Y) Pᵀ` with `P` the
/// square root of the initial node, `Y` symmetric (upper triangle stored).
struct Layout {
    n: usize,
    points: usize,
    interior: usize,
    frames: Vec<Vec<DMatrix<f64>>>,
}

impl Layout {
    fn tri(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn len(&self) -> usize {
        self.interior * self.points * self.tri()
    }

    fn node(&self, params: &[f64], j: usize) -> Vec<DMatrix<f64>> {
        let tri = self.tri();
        (0..self.points)
            .map(|i| {
                let off = (j * self.points + i) * tri;
                let mut y = DMatrix::identity(self.n, self.n);
                let mut idx = off;
                for r in 0..self.n {
                    for c in r..self.n {
                        y[(r, c)] += params[idx];
                        if r != c {
                            y[(c, r)] += params[idx];
                        }
                        idx += 1;
                    }
                }
                let p = &self.frames[j][i];
                p * y * p.transpose()
            })
            .collect()
    }

    fn scatter(&self, grad: &mut [f64], j: usize, i: usize, g: &DMatrix<f64>) {
        let p = &self.frames[j][i];
        let gy = p.transpose() * g * p;
        let mut idx = (j * self.points + i) * self.tri();
        for r in 0..self.n {
            for c in r..self.n {
                grad[idx] += if r == c { gy[(r, c)] } else { 2.0 * gy[(r, c)] };
                idx += 1;
            }
        }
    }
}

struct Objective<'a> {
    problem: &'a PathProblem,
    layout: Layout,
    start: Vec<DMatrix<f64>>,
    end: Vec<DMatrix<f64>>,
    segments: usize,
}

impl Objective<'_> {
    fn nodes(&self, params: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        let mut out = Vec::with_capacity(self.segments + 1);
        out.push(self.start.clone());
        for j in 0..self.layout.interior {
            out.push(self.layout.node(params, j));
        }
        out.push(self.end.clone());
        out
    }

    fn energy(&self, params: &[f64]) -> Option<f64> {
        let nodes = self.nodes(params);
        let mut e = 0.0;
        for j in 0..self.segments {
            let l = self.problem.segment_length(&nodes[j], &nodes[j + 1])?;
            e += l * l;
        }
        Some(e * self.segments as f64)
    }

    fn energy_grad(&self, params: &[f64]) -> Option<(f64, Vec<f64>)> {
        let nodes = self.nodes(params);
        let mut grad = vec![0.0; params.len()];
        let m = self.segments as f64;
        let mut e = 0.0;
        for j in 0..self.segments {
            let x0 = &nodes[j];
            let x1 = &nodes[j + 1];
            let d: Vec<_> = x0.iter().zip(x1.iter()).map(|(a, b)| b - a).collect();
            let np = self.problem.points();
            let mut len = 0.0;
            let mut g0: Vec<DMatrix<f64>> = vec![DMatrix::zeros(self.layout.n, self.layout.n); np];
            let mut g1 = g0.clone();
            for (s, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
                let xm: Vec<_> = x0.iter().zip(&d).map(|(a, di)| a + di * *s).collect();
                let (q, gx, gd) = self.problem.norm_sq_grad(&xm, &d)?;
                let nrm = q.max(0.0).sqrt();
                len += w * nrm;
                if nrm > 0.0 {
                    let c = w / (2.0 * nrm);
                    for i in 0..np {
                        g0[i] += (&gx[i] * (1.0 - s) - &gd[i]) * c;
                        g1[i] += (&gx[i] * *s + &gd[i]) * c;
                    }
                }
            }
            e += len * len;
            let c = 2.0 * m * len;
            for i in 0..np {
                if j >= 1 {
                    self.layout.scatter(&mut grad, j - 1, i, &(&g0[i] * c));
                }
                if j < self.layout.interior {
                    self.layout.scatter(&mut grad, j, i, &(&g1[i] * c));
                }
            }
        }
        Some((e * m, grad))
    }
}

/// Minimizes the discrete path energy between two fields with fixed endpoints.
pub fn minimize(
    problem: &PathProblem,
    start: &[SpdMatrix],
    end: &[SpdMatrix],
    segments: usize,
    opts: &PathEnergyOptions,
) -> Result<PathSolution> {
    let init: Vec<Vec<SpdMatrix>> = (0..=segments)
        .map(|j| {
            let t = j as f64 / segments as f64;
            start.iter().zip(end).map(|(a, b)| affine_interpolation(a, b, t)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    minimize_from(problem, init, opts)
}

/// Minimizes starting from a given polyline (first and last nodes are held fixed).
pub fn minimize_from(
    problem: &PathProblem,
    init: Vec<Vec<SpdMatrix>>,
    opts: &PathEnergyOptions,
) -> Result<PathSolution> {
    let segments = init.len() - 1;
    if segments < 1 {
        return Err(Error::InvalidInput("a path needs at least one segment".into()));
    }
    let points = problem.points();
    let n = init[0][0].dim();
    let frames: Vec<Vec<DMatrix<f64>>> =
        init[1..segments].iter().map(|node| node.iter().map(|x| x.sqrt()).collect()).collect();
    let layout = Layout { n, points, interior: segments - 1, frames };
    let obj = Objective {
        problem,
        layout,
        start: init[0].iter().map(|x| x.as_matrix().clone()).collect(),
        end: init[segments].iter().map(|x| x.as_matrix().clone()).collect(),
        segments,
    };
    let x0 = vec![0.0; obj.layout.len()];
    let (params, iterations, grad_norm) = lbfgs(&obj, x0, opts)?;
    let raw = obj.nodes(&params);
    let nodes = raw
        .iter()
        .map(|node| node.iter().map(|m| SpdMatrix::with_eps(SymMatrix::symmetrized(m.clone()), 0.0)).collect())
        .collect::<Result<Vec<Vec<SpdMatrix>>>>()?;
    let mut length = 0.0;
    for j in 0..segments {
        length += problem
            .segment_length(&raw[j], &raw[j + 1])
            .ok_or_else(|| Error::InvalidInput("optimized path left the cone".into()))?;
    }
    let energy = obj.energy(&params).unwrap_or(f64::INFINITY);
    Ok(PathSolution { nodes, length, energy, iterations, grad_norm })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn lbfgs(obj: &Objective<'_>, mut x: Vec<f64>, opts: &PathEnergyOptions) -> Result<(Vec<f64>, usize, f64)> {
    if x.is_empty() {
        return Ok((x, 0, 0.0));
    }
    let (mut f, mut g) = obj
        .energy_grad(&x)
        .ok_or_else(|| Error::InvalidInput("initial path leaves the positive-definite cone".into()))?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut stalled = 0;
    for iter in 0..opts.max_iterations {
        let gn = sup_norm(&g);
        if gn <= opts.gtol * f.max(1.0) {
            return Ok((x, iter, gn));
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1e-2 / gn.max(1e-300)
        };
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v * 1e-2 / gn).collect();
            slope = dot(&g, &dir);
        }
        // Backtracking Armijo line search; infeasible trials count as failures.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            if let Some((ft, gt)) = obj.energy_grad(&trial) {
                if ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn_vec)) = accepted else {
            // No descent possible at working precision: treat as converged if the
            // gradient is already small relative to the energy scale.
            if gn <= 1e3 * opts.gtol * f.max(1.0) {
                return Ok((x, iter, gn));
            }
            return Err(Error::NonConvergence { iterations: iter, grad_norm: gn });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_vec.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if s_hist.len() == opts.history {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = f - fn_;
        x = xn;
        f = fn_;
        g = gn_vec;
        if decrease <= 1e-15 * f.abs() {
            stalled += 1;
            if stalled >= 8 {
                return Ok((x, iter + 1, sup_norm(&g)));
            }
        } else {
            stalled = 0;
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iterations, grad_norm: sup_norm(&g) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(m: &[f64], n: usize) -> SpdMatrix {
        SpdMatrix::from_matrix(DMatrix::from_row_slice(n, n, m)).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_quintics_exactly() {
        let exact = 1.0 / 6.0;
        let approx: f64 = GL5_NODES.iter().zip(GL5_WEIGHTS.iter()).map(|(x, w)| w * x.powi(5)).sum();
        assert!((approx - exact).abs() < 1e-15);
        let wsum: f64 = GL5_WEIGHTS.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let problem =
            PathProblem::new(vec![0.3, 0.7], vec![SpdMatrix::identity(2), spd(&[2.0, 0.1, 0.1, 1.0], 2)], 0.7);
        let a = [spd(&[1.0, 0.2, 0.2, 2.0], 2), spd(&[0.5, 0.0, 0.0, 0.8], 2)];
        let b = vec![spd(&[3.0, -0.4, -0.4, 1.0], 2), spd(&[1.5, 0.3, 0.3, 0.9], 2)];
        let init: Vec<Vec<SpdMatrix>> = (0..=4)
            .map(|j| a.iter().zip(&b).map(|(x, y)| affine_interpolation(x, y, j as f64 / 4.0).unwrap()).collect())
            .collect();
        let frames = init[1..4].iter().map(|node| node.iter().map(|x| x.sqrt()).collect()).collect();
        let obj = Objective {
            problem: &problem,
            layout: Layout { n: 2, points: 2, interior: 3, frames },
            start: a.iter().map(|x| x.as_matrix().clone()).collect(),
            end: b.iter().map(|x| x.as_matrix().clone()).collect(),
            segments: 4,
        };
        let x: Vec<f64> = (0..obj.layout.len()).map(|i| 0.01 * ((i as f64) * 0.7).sin()).collect();
        let (_, g) = obj.energy_grad(&x).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (obj.energy(&xp).unwrap() - obj.energy(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "component {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn affine_interpolation_endpoints() {
        let a = spd(&[1.0, 0.2, 0.2, 2.0], 2);
        let b = spd(&[3.0, -0.4, -0.4, 1.0], 2);
        let x0 = affine_interpolation(&a, &b, 0.0).unwrap();
        let x1 = affine_interpolation(&a, &b, 1.0).unwrap();
        assert!((x0.as_matrix() - a.as_matrix()).norm() < 1e-13);
        assert!((x1.as_matrix() - b.as_matrix()).norm() < 1e-13);
    }
}
