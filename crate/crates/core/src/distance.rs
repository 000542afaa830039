//! Distances in the space of metrics, reported as certified intervals.
//!
//! Lower bounds come from the volume: along any path the volume functional
//! `V^{(1−p)/2}` (or `log V` for `p = 1`) changes at most at a fixed rate per
//! unit `g_p`-length. Upper bounds are lengths of explicit paths: straight
//! lines, conformal rays, the three-piece cutoff paths that shrink the metric
//! on the set where `g ≠ h`, and path-energy optima.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fiber::{fiber_distance, SpdMatrix};
use crate::geodesics::PathPolyline;
use crate::manifold::{pairwise_sum, try_map_points, DiscreteManifold};
use crate::metrics::{FamilyIndex, MetricField};
use crate::path_energy::{self, PathEnergyOptions, PathProblem, GL5_NODES, GL5_WEIGHTS};

/// Quadrature used for the speed along each straight segment of a polyline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LengthRule {
    /// Speed at the segment midpoint times the segment duration.
    Midpoint,
    /// 5-point Gauss–Legendre in the segment parameter.
    GaussLegendre,
}

fn problem_for(p: FamilyIndex, man: &DiscreteManifold) -> PathProblem {
    PathProblem::new(man.weights(), man.references(), p.p)
}

fn raw(g: &MetricField) -> Vec<nalgebra::DMatrix<f64>> {
    g.mats().iter().map(|m| m.as_matrix().clone()).collect()
}

/// `g_p`-lengths of the straight segments between consecutive samples.
pub fn segment_lengths(p: impl Into<FamilyIndex>, path: &PathPolyline, rule: LengthRule) -> Result<Vec<f64>> {
    let p = p.into();
    if path.len() < 2 {
        return Err(Error::InvalidInput("a path needs at least two samples".into()));
    }
    let problem = problem_for(p, path.fields[0].manifold());
    let nodes: Vec<_> = path.fields.iter().map(raw).collect();
    (0..path.len() - 1)
        .map(|j| {
            let (a, b) = (&nodes[j], &nodes[j + 1]);
            let len = match rule {
                LengthRule::GaussLegendre => problem.segment_length(a, b),
                LengthRule::Midpoint => {
                    let d: Vec<_> = a.iter().zip(b).map(|(x, y)| y - x).collect();
                    let mid: Vec<_> = a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect();
                    problem.norm_sq(&mid, &d).map(|q| q.max(0.0).sqrt())
                }
            };
            len.ok_or_else(|| Error::InvalidInput(format!("segment {j} leaves the positive-definite cone")))
        })
        .collect()
}

/// Length of a polyline in `g_p`: the sum over its straight segments, each
/// integrated with 5-point Gauss–Legendre.
pub fn path_length(p: impl Into<FamilyIndex>, path: &PathPolyline) -> Result<f64> {
    path_length_with(p, path, LengthRule::GaussLegendre)
}

pub fn path_length_with(p: impl Into<FamilyIndex>, path: &PathPolyline, rule: LengthRule) -> Result<f64> {
    Ok(pairwise_sum(&segment_lengths(p, path, rule)?))
}

/// Volume lower bound on `d_p(g, h)`:
/// `(4 / (|1−p|√n)) |V_h^{(1−p)/2} − V_g^{(1−p)/2}|` for `p ≠ 1`,
/// `(2/√n) |log(V_h / V_g)|` for `p = 1`.
pub fn volume_lower_bound(p: impl Into<FamilyIndex>, g: &MetricField, h: &MetricField) -> Result<f64> {
    let p = p.into().p;
    g.check_metric(h)?;
    let n = g.dim() as f64;
    Ok(volume_lower_bound_from(p, n, g.volume(), h.volume()))
}

pub(crate) fn volume_lower_bound_from(p: f64, n: f64, vg: f64, vh: f64) -> f64 {
    if p == 1.0 {
        2.0 / n.sqrt() * (vh / vg).ln().abs()
    } else {
        let e = 0.5 * (1.0 - p);
        4.0 / ((1.0 - p).abs() * n.sqrt()) * (vh.powf(e) - vg.powf(e)).abs()
    }
}

/// Closed-form `g_p`-length of the ray `c ↦ c·g₀` between `c_a` and `c_b`:
/// `√(n V₀^{1−p}) |c_b^m − c_a^m| / |m|` with `m = n(1−p)/4` (the logarithm when `m = 0`).
/// Either endpoint may be `0` or `∞` when the corresponding limit is finite.
pub fn conformal_ray_length(p: f64, n: usize, v0: f64, c_a: f64, c_b: f64) -> f64 {
    let nf = n as f64;
    let m = nf * (1.0 - p) / 4.0;
    let pre = (nf * v0.powf(1.0 - p)).sqrt();
    if m == 0.0 {
        pre * (c_b / c_a).ln().abs()
    } else {
        pre * (c_b.powf(m) - c_a.powf(m)).abs() / m.abs()
    }
}

/// Geometric time grid from `1` to `c`: `c^{j/m}`.
fn geometric_factors(c: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|j| c.powf(j as f64 / m as f64)).collect()
}

/// The conformal ray from `g` to `c·g`, sampled geometrically in the factor.
pub fn conformal_ray(p: impl Into<FamilyIndex>, g: &MetricField, c: f64, samples: usize) -> Result<PathPolyline> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("ray factor must be positive, got {c}")));
    }
    let m = samples.max(1);
    let fields = geometric_factors(c, m).into_iter().map(|f| g.scaled(f)).collect::<Result<Vec<_>>>()?;
    let times = (0..=m).map(|j| j as f64 / m as f64).collect();
    PathPolyline::new(times, fields, p.into())
}

/// The straight line `(1−t) g + t h`.
pub fn linear_path(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &MetricField,
    samples: usize,
) -> Result<PathPolyline> {
    g.check_metric(h)?;
    let m = samples.max(1);
    let d = g.difference(h)?;
    let times: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
    let fields = times.iter().map(|&t| g.offset(&d, t)).collect::<Result<Vec<_>>>()?;
    PathPolyline::new(times, fields, p.into())
}

/// Cutoff data for the three-piece paths: the cutoff function equals `s` on
/// `F`, `1` off `E`, and `√s` on `E \ F` (any value in `[s, 1]` is allowed
/// there; on a point cloud smoothness imposes nothing).
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffSpec {
    pub e: Vec<usize>,
    pub f: Vec<usize>,
    pub s: f64,
}

impl CutoffSpec {
    pub fn new(mut e: Vec<usize>, mut f: Vec<usize>, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidInput(format!("cutoff level must lie in (0, 1], got {s}")));
        }
        e.sort_unstable();
        e.dedup();
        f.sort_unstable();
        f.dedup();
        if let Some(x) = f.iter().find(|x| e.binary_search(x).is_err()) {
            return Err(Error::InvalidInput(format!("F must be a subset of E; point {x} is not in E")));
        }
        Ok(CutoffSpec { e, f, s })
    }

    /// `F = E`.
    pub fn full(e: Vec<usize>, s: f64) -> Result<Self> {
        Self::new(e.clone(), e, s)
    }

    /// `E = carr(h − g)`, the points where the two metrics differ.
    pub fn support(g: &MetricField, h: &MetricField) -> Vec<usize> {
        (0..g.len()).filter(|&i| g.mat(i).as_matrix() != h.mat(i).as_matrix()).collect()
    }

    /// Pointwise values of the cutoff function.
    pub fn values(&self, len: usize) -> Vec<f64> {
        let mut out = vec![1.0; len];
        for &i in &self.e {
            out[i] = self.s.sqrt();
        }
        for &i in &self.f {
            out[i] = self.s;
        }
        out
    }
}

/// The concatenated path `ĝ * ḡ * g̃⁻¹` and the lengths of its pieces.
#[derive(Clone, Debug)]
pub struct AppendixPath {
    pub path: PathPolyline,
    /// Lengths of `ĝ`, `ḡ`, `g̃` in that order.
    pub segment_lengths: [f64; 3],
    pub total: f64,
}

/// `ĝ(t) = ((1−t) + t f) g`, `ḡ(t) = f ((1−t) g + t h)`, `g̃(t) = ((1−t) + t f) h`,
/// joined as `ĝ`, then `ḡ`, then `g̃` backwards, so the path runs from `g` to
/// `h` with time in `[0, 3]`. `ĝ` and `g̃` are sampled geometrically in the
/// conformal factor on `F`; each piece is a straight line in matrix space.
pub fn appendix_path(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &MetricField,
    cutoff: &CutoffSpec,
    samples: usize,
) -> Result<AppendixPath> {
    let p = p.into();
    g.check_metric(h)?;
    let len = g.len();
    if let Some(&bad) = cutoff.e.iter().chain(&cutoff.f).find(|&&i| i >= len) {
        return Err(Error::InvalidInput(format!("cutoff refers to point {bad}, but there are {len} points")));
    }
    for i in CutoffSpec::support(g, h) {
        if cutoff.e.binary_search(&i).is_err() {
            return Err(Error::Cutoff { point: i });
        }
    }
    let m = samples.max(1);
    let f = cutoff.values(len);
    let s = cutoff.s;
    let hat_t: Vec<f64> = if s < 1.0 {
        (0..=m).map(|j| (1.0 - s.powf(j as f64 / m as f64)) / (1.0 - s)).collect()
    } else {
        (0..=m).map(|j| j as f64 / m as f64).collect()
    };
    let shrink = |base: &MetricField, t: f64| {
        let factors: Vec<f64> = f.iter().map(|fi| (1.0 - t) + t * fi).collect();
        base.conformal(&factors)
    };
    let hat = hat_t.iter().map(|&t| shrink(g, t)).collect::<Result<Vec<_>>>()?;
    let d = g.difference(h)?;
    let bar = (0..=m).map(|j| g.offset(&d, j as f64 / m as f64)?.conformal(&f)).collect::<Result<Vec<_>>>()?;
    let tilde = hat_t.iter().map(|&t| shrink(h, t)).collect::<Result<Vec<_>>>()?;

    let hat_path = PathPolyline::new(hat_t.clone(), hat, p)?;
    let bar_times: Vec<f64> = (0..=m).map(|j| 1.0 + j as f64 / m as f64).collect();
    let bar_path = PathPolyline::new(bar_times.clone(), bar, p)?;
    let tilde_path = PathPolyline::new(hat_t.clone(), tilde, p)?;
    let lengths = [path_length(p, &hat_path)?, path_length(p, &bar_path)?, path_length(p, &tilde_path)?];

    let mut times = hat_t.clone();
    let mut fields = hat_path.fields;
    times.extend_from_slice(&bar_times[1..]);
    fields.extend(bar_path.fields.into_iter().skip(1));
    for j in (0..m).rev() {
        times.push(3.0 - hat_t[j]);
        fields.push(tilde_path.fields[j].clone());
    }
    let path = PathPolyline::new(times, fields, p)?;
    Ok(AppendixPath { path, segment_lengths: lengths, total: lengths.iter().sum() })
}

/// The constant `C(p, n)` assembled from the cutoff-path estimates:
/// `p ≤ 0`: `4/√n` for `n ≤ 3` and `√n` for `n ≥ 4`;
/// `0 < p < 1`: `√n ∫₀¹ (1−τ)^{(1−p)n/4 − 1} dτ = 4/((1−p)√n)`;
/// `p > 1`: `C(2 − p, n)` by duality. `p = 1` has no such constant.
pub fn cutoff_constant(p: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if p == 1.0 {
        return Err(Error::InvalidInput("no volume-based upper bound exists for p = 1".into()));
    }
    if p > 1.0 {
        return cutoff_constant(2.0 - p, n);
    }
    if p <= 0.0 {
        Ok(if n <= 3 { 4.0 / nf.sqrt() } else { nf.sqrt() })
    } else {
        Ok(4.0 / ((1.0 - p) * nf.sqrt()))
    }
}

/// `Vol(E, g) = Σ_{i∈E} wᵢ ρᵢ`.
pub fn partial_volume(g: &MetricField, e: &[usize]) -> f64 {
    let masses = g.masses();
    pairwise_sum(&e.iter().map(|&i| masses[i]).collect::<Vec<_>>())
}

/// `C(p, n) (V_g^{-p/2} √Vol(E,g) + V_h^{-p/2} √Vol(E,h))` with `E = carr(h − g)`.
pub fn appendix_bound(p: impl Into<FamilyIndex>, g: &MetricField, h: &MetricField) -> Result<f64> {
    let p = p.into().p;
    g.check_metric(h)?;
    let c = cutoff_constant(p, g.dim())?;
    let e = CutoffSpec::support(g, h);
    let part = |x: &MetricField| x.volume().powf(-0.5 * p) * partial_volume(x, &e).sqrt();
    Ok(c * (part(g) + part(h)))
}

/// Which volume sublevel set the diameter bound applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiameterSide {
    /// `{V ≤ v}`, for `p < 1`.
    Below,
    /// `{V ≥ v}`, for `p > 1`.
    Above,
}

/// `2 C(p, n) v^{(1−p)/2}`, bounding the `d_p`-diameter of `{V ≤ v}` (`p < 1`)
/// or `{V ≥ v}` (`p > 1`).
pub fn diameter_bound(p: impl Into<FamilyIndex>, n: usize, v: f64) -> Result<(f64, DiameterSide)> {
    let p = p.into().p;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!("volume level must be positive, got {v}")));
    }
    let c = cutoff_constant(p, n)?;
    let side = if p < 1.0 { DiameterSide::Below } else { DiameterSide::Above };
    Ok((2.0 * c * v.powf(0.5 * (1.0 - p)), side))
}

/// Options shared by the distance estimators.
#[derive(Clone, Debug)]
pub struct DistanceOptions {
    /// Samples per straight piece of the explicit paths.
    pub samples: usize,
    /// Cutoff level `s` for the three-piece path.
    pub cutoff_s: f64,
    /// Also run the whole-field path-energy optimizer.
    pub optimize: bool,
    /// Segments of the optimized polyline, and of each fiber path in `Ω₂`.
    pub segments: usize,
    pub energy: PathEnergyOptions,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            samples: 32,
            cutoff_s: 1e-3,
            optimize: false,
            segments: 16,
            energy: PathEnergyOptions::default(),
        }
    }
}

/// `Ω₂(g, h) = (Σᵢ wᵢ d_{xᵢ}(gᵢ, hᵢ)²)^{1/2}` with fiber distances from the
/// fiber path optimizer.
pub fn omega2(g: &MetricField, h: &MetricField, segments: usize) -> Result<f64> {
    g.check_metric(h)?;
    let man = g.manifold();
    let d = try_map_points(g.len(), |i| {
        fiber_distance(g.mat(i), h.mat(i), man.reference(i), segments).map_err(|e| e.at_point(i))
    })?;
    let terms: Vec<f64> = d.iter().zip(man.points()).map(|(di, pt)| pt.weight * di * di).collect();
    Ok(pairwise_sum(&terms).sqrt())
}

/// Energy-minimizing `segments`-piece polyline from `g` to `h` in `g_p`,
/// optimizing all points jointly. Returns the path and its length.
pub fn optimized_path(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &MetricField,
    segments: usize,
    opts: &PathEnergyOptions,
) -> Result<(PathPolyline, f64)> {
    let p = p.into();
    g.check_metric(h)?;
    let problem = problem_for(p, g.manifold());
    let sol = path_energy::minimize(&problem, g.mats(), h.mats(), segments.max(1), opts)?;
    let man: Arc<DiscreteManifold> = g.manifold_arc().clone();
    let fields = sol
        .nodes
        .into_iter()
        .map(|node: Vec<SpdMatrix>| MetricField::new(man.clone(), node))
        .collect::<Result<Vec<_>>>()?;
    let times = (0..fields.len()).map(|j| j as f64 / (fields.len() - 1) as f64).collect();
    Ok((PathPolyline::new(times, fields, p)?, sol.length))
}

/// A certified interval `[lower, upper]` for `d_p(g, h)`.
#[derive(Clone, Debug)]
pub struct DistanceReport {
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
    /// Method that produced `upper`.
    pub method: String,
    /// Every upper-bound candidate that was evaluated.
    pub candidates: Vec<(String, f64)>,
    /// Path realizing `upper`.
    pub witness: PathPolyline,
}

/// If `h = c·g` for one constant `c`, returns `c`.
pub fn conformal_ratio(g: &MetricField, h: &MetricField) -> Option<f64> {
    let c = h.mat(0).as_matrix()[(0, 0)] / g.mat(0).as_matrix()[(0, 0)];
    let ok = (0..g.len()).all(|i| {
        let diff = h.mat(i).as_matrix() - g.mat(i).as_matrix() * c;
        diff.norm() <= 1e-13 * h.mat(i).as_matrix().norm()
    });
    (ok && c > 0.0).then_some(c)
}

pub fn distance_report(
    p: impl Into<FamilyIndex>,
    g: &MetricField,
    h: &MetricField,
    opts: &DistanceOptions,
) -> Result<DistanceReport> {
    let p = p.into();
    g.check_metric(h)?;
    let lower = volume_lower_bound(p, g, h)?;
    let mut candidates: Vec<(String, f64, PathPolyline)> = Vec::new();

    let line = linear_path(p, g, h, opts.samples)?;
    candidates.push(("linear".into(), path_length(p, &line)?, line));

    let e = CutoffSpec::support(g, h);
    if !e.is_empty() {
        let cut = CutoffSpec::full(e, opts.cutoff_s)?;
        let app = appendix_path(p, g, h, &cut, opts.samples)?;
        candidates.push(("cutoff".into(), app.total, app.path));
    }
    if let Some(c) = conformal_ratio(g, h) {
        let ray = conformal_ray(p, g, c, opts.samples)?;
        let n = g.dim();
        candidates.push(("conformal-ray".into(), conformal_ray_length(p.p, n, g.volume(), 1.0, c), ray));
    }
    if opts.optimize {
        let (path, len) = optimized_path(p, g, h, opts.segments, &opts.energy)?;
        candidates.push(("optimized".into(), len, path));
    }
    let best = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("at least the linear candidate");
    let summary = candidates.iter().map(|(m, l, _)| (m.clone(), *l)).collect();
    let (method, upper, witness) = candidates.swap_remove(best);
    Ok(DistanceReport { p: p.p, lower, upper, method, candidates: summary, witness })
}

/// Direction of a completion probe sequence `h_k = c_k g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMode {
    /// `c_k = 4^{-k} → 0`.
    Collapse,
    /// `c_k = 4^k → ∞`.
    Blowup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Cauchy,
    NotCauchy,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRow {
    pub k: usize,
    pub c: f64,
    pub volume: f64,
    /// Volume lower bound on `d_p(h_0, h_k)`.
    pub lower: f64,
    /// Upper bound on `sup_{j>k} d_p(h_k, h_j)`: the ray length from `c_k` to
    /// the limit, `∞` when that integral diverges.
    pub upper_tail: f64,
    /// The same tail for the images `F(h_k)` in `g_{2−p}`.
    pub dual_upper_tail: f64,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub p: f64,
    pub mode: ProbeMode,
    pub n: usize,
    pub rows: Vec<ProbeRow>,
    pub verdict: Verdict,
}

/// Runs `h_k = c_k g` for `k = 0..=k_max` and classifies the sequence.
///
/// Cauchy: every tail bound is finite and they decrease strictly
/// (geometrically, for these sequences). Not Cauchy: the lower bounds from
/// `h_0` grow by at least half their mean increment at every step, so they
/// diverge linearly in `k`.
pub fn completion_probe(
    p: impl Into<FamilyIndex>,
    mode: ProbeMode,
    g: &MetricField,
    k_max: usize,
) -> Result<ProbeReport> {
    let p = p.into().p;
    let n = g.dim();
    let v0 = g.volume();
    // The dual sequence runs the other way: F(c g) = c^{-1} F(g).
    let tail = |pp: f64, collapse: bool, base_volume: f64, c: f64| {
        let m = n as f64 * (1.0 - pp) / 4.0;
        let converges = if collapse { m > 0.0 } else { m < 0.0 };
        if converges {
            let limit = if collapse { 0.0 } else { f64::INFINITY };
            conformal_ray_length(pp, n, base_volume, c, limit)
        } else {
            f64::INFINITY
        }
    };
    let fg = crate::metrics::duality_map(g)?;
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let c = match mode {
            ProbeMode::Collapse => 4f64.powi(-(k as i32)),
            ProbeMode::Blowup => 4f64.powi(k as i32),
        };
        let volume = v0 * c.powf(0.5 * n as f64);
        let lower = volume_lower_bound_from(p, n as f64, v0, volume);
        // F(c g) = c V_g^{-4/n} c^{-2} g = c^{-1} F(g).
        let collapse = mode == ProbeMode::Collapse;
        let dual_upper_tail = tail(2.0 - p, !collapse, fg.volume(), 1.0 / c);
        rows.push(ProbeRow { k, c, volume, lower, upper_tail: tail(p, collapse, v0, c), dual_upper_tail });
    }
    let cauchy =
        rows.iter().all(|r| r.upper_tail.is_finite()) && rows.windows(2).all(|w| w[1].upper_tail < w[0].upper_tail);
    let increments: Vec<f64> = rows.windows(2).map(|w| w[1].lower - w[0].lower).collect();
    let mean = increments.iter().sum::<f64>() / increments.len().max(1) as f64;
    let diverging = !increments.is_empty() && mean > 0.0 && increments.iter().all(|&d| d >= 0.5 * mean);
    let verdict = if cauchy {
        Verdict::Cauchy
    } else if diverging {
        Verdict::NotCauchy
    } else {
        Verdict::Inconclusive
    };
    Ok(ProbeReport { p, mode, n, rows, verdict })
}

/// Gauss–Legendre rule used for segment lengths, exposed for reports.
pub fn quadrature_rule() -> (&'static [f64; 5], &'static [f64; 5]) {
    (&GL5_NODES, &GL5_WEIGHTS)
}
