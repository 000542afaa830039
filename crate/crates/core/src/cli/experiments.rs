//! The named experiments. Each one builds a [`Report`] whose checks decide
//! the exit status; the case generators are public so the same inputs can be
//! rebuilt outside the CLI.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::connection::{hessian_scalar, VolumeFunctional};
use crate::curvature::{curvature_numeric, sec_formula, PlaneSpec};
use crate::distance::{
    appendix_bound, appendix_path, completion_probe, conformal_ray_length, diameter_bound, distance_report, omega2,
    optimized_path, volume_lower_bound, CutoffSpec, DistanceOptions, ProbeMode, Verdict,
};
use crate::error::{Error, Result};
use crate::fiber::{fiber_distance, SpdMatrix};
use crate::geodesics::{
    blowup_time, geodesic_eval, integrate_geodesic, integrate_geodesic_sampled, motion_constants, normal_form,
    DEFAULT_RESIDUAL_THRESHOLD,
};
use crate::manifold::DiscreteManifold;
use crate::metrics::{duality_differential, duality_map, inner, norm, FamilyIndex, MetricField, TangentField};

use super::fixture::{random_metric, random_tangent, rng};
use super::report::{num, Report, Table};
use super::ExperimentConfig;

/// Which points of a geodesic test case get a pure-trace velocity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    /// Random velocity everywhere.
    Generic,
    /// `h = φ g` at every point (`A ≡ 0`).
    PureTrace,
    /// Pure trace at even-indexed points only.
    Mixed,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Generic => "generic",
            CaseKind::PureTrace => "pure-trace",
            CaseKind::Mixed => "mixed",
        }
    }
}

/// Random initial velocity at `g` of the given kind, shifted by a multiple of
/// `g` so that `a₀ = V⁻¹ ∫ tr(g⁻¹h) dV` has the sign of `a0_sign`.
pub fn geodesic_case<R: Rng>(rng: &mut R, g: &MetricField, kind: CaseKind, a0_sign: f64) -> Result<TangentField> {
    let man = g.manifold_arc().clone();
    let base = random_tangent(rng, &man, 0.5)?;
    let mats = (0..g.len())
        .map(|i| {
            let pure = match kind {
                CaseKind::Generic => false,
                CaseKind::PureTrace => true,
                CaseKind::Mixed => i % 2 == 0,
            };
            if pure {
                let phi: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
                g.mat(i).sym().scale(phi)
            } else {
                base.mat(i).clone()
            }
        })
        .collect();
    let h = TangentField::new(man, mats)?;
    let mean = g.integrate_values(&g.traces(&h)) / g.volume();
    let target = a0_sign.signum() * (0.2 + 0.4 * rng.gen::<f64>());
    h.axpy((target - mean) / g.dim() as f64, &TangentField::tautological(g))
}

/// The `j`-th of the standard closed-form test cases: kinds cycle through
/// generic, pure-trace and mixed; the sign of `a₀` alternates every three.
pub fn standard_case<R: Rng>(rng: &mut R, g: &MetricField, j: usize) -> Result<(CaseKind, f64, TangentField)> {
    let kind = [CaseKind::Generic, CaseKind::PureTrace, CaseKind::Mixed][j % 3];
    let sign = if (j / 3).is_multiple_of(2) { 1.0 } else { -1.0 };
    let h = geodesic_case(rng, g, kind, sign)?;
    Ok((kind, sign, h))
}

#[derive(Clone, Debug)]
pub struct OdeComparison {
    pub a0: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Largest Frobenius deviation between the closed form and RK4 over all
    /// steps and points.
    pub max_deviation: f64,
    /// Largest deviation of `log V` from its secant along the RK4 path.
    pub log_v_deviation: f64,
}

/// Integrates the `g_N` geodesic with RK4 on `[0, min(t_max, 0.9 t₀)]`
/// (rounded down to whole steps) and compares against the closed form.
pub fn compare_closed_form(g: &MetricField, h: &TangentField, t_max: f64, dt: f64) -> Result<OdeComparison> {
    let nf = normal_form(g, h)?;
    let t0 = blowup_time(&nf);
    let steps = (t_max.min(0.9 * t0) / dt + 1e-9).floor() as usize;
    let t_end = steps as f64 * dt;
    let path = integrate_geodesic(FamilyIndex::NORMALIZED, g, h, t_end, dt)?;
    let mut max_deviation = 0.0_f64;
    for (t, field) in path.times.iter().zip(&path.fields) {
        let exact = geodesic_eval(&nf, g, *t)?;
        max_deviation = max_deviation.max(exact.max_deviation(field));
    }
    let logv: Vec<f64> = path.volumes().iter().map(|v| v.ln()).collect();
    let m = logv.len() - 1;
    let log_v_deviation =
        (0..=m).map(|j| (logv[j] - (logv[0] + (logv[m] - logv[0]) * j as f64 / m as f64)).abs()).fold(0.0, f64::max);
    Ok(OdeComparison { a0: nf.a0, t0, t_end, max_deviation, log_v_deviation })
}

pub(crate) fn base_metric(cfg: &ExperimentConfig) -> Result<MetricField> {
    match &cfg.input {
        Some(path) => crate::io::read_metric(path),
        None => super::fixture::generate_fixture(cfg.n, cfg.points, cfg.seed, cfg.spread),
    }
}

/// Randomness for the experiment, independent of the fixture stream.
fn case_rng(cfg: &ExperimentConfig) -> rand_chacha::ChaCha8Rng {
    rng(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1))
}

fn family_statement(p: f64) -> &'static str {
    if p == 1.0 {
        "log V is affine along g_N geodesics"
    } else {
        "V^-p * integral tr(g^-1 g_t) dV has slope (n/4)(1-p)|g_t|_p^2 along g_p geodesics"
    }
}

pub fn geodesic(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.p.unwrap_or(1.0);
    let g = base_metric(cfg)?;
    let mut rng = case_rng(cfg);
    let (_, _, h) = standard_case(&mut rng, &g, 0)?;
    let h = h.scale(1.0 / norm(p, &g, &h)?);
    let mut t_max = cfg.t_max.unwrap_or(2.0);
    if p == 1.0 {
        t_max = t_max.min(0.9 * blowup_time(&normal_form(&g, &h)?));
    }
    let stride = ((0.01 / cfg.dt).round() as usize).max(1);
    let sample = stride as f64 * cfg.dt;
    let t_end = (t_max / sample + 1e-9).floor() * sample;
    let path = integrate_geodesic_sampled(p, &g, &h, t_end, cfg.dt, stride)?;
    let motion = motion_constants(&path)?;

    let mut rep = Report::new("geodesic", family_statement(p));
    rep.param("p", p);
    rep.param("n", g.dim());
    rep.param("points", g.len());
    rep.param("seed", cfg.seed);
    rep.param("dt", cfg.dt);
    rep.param("t_end", num(t_end));
    let ratios = path.min_density_ratios();
    let mut table = Table::new("series", &["t", "V", "log V", "c(t)", "min density ratio"]);
    for j in 0..path.len() {
        table.push(vec![
            num(path.times[j]),
            num(motion.volume[j]),
            num(motion.volume[j].ln()),
            num(motion.c[j]),
            num(ratios[j]),
        ]);
    }
    rep.tables.push(table);
    rep.check_le("geodesic-residual", motion.residual, DEFAULT_RESIDUAL_THRESHOLD);
    if p == 1.0 {
        rep.check_le("log-v-affine", motion.log_v_affine_deviation, cfg.tol.unwrap_or(1e-8));
    } else {
        rep.check_le("c-slope", motion.slope_relative_error(), cfg.tol.unwrap_or(1e-6));
        // The sampled grid has uniform spacing `sample`.
        let hess = hessian_scalar(p, VolumeFunctional::VolumePower, &path)?;
        let expect = g.dim() as f64 * (1.0 - p).powi(2) / 8.0;
        let worst = hess.iter().map(|(_, v)| (v - expect).abs()).fold(0.0, f64::max) / expect;
        rep.check_le("volume-power-hessian", worst, 1e-4);
    }
    Ok(rep)
}

pub fn ode_compare(cfg: &ExperimentConfig) -> Result<Report> {
    let g = base_metric(cfg)?;
    let mut rng = case_rng(cfg);
    let tol = cfg.tol.unwrap_or(1e-6);
    let t_max = cfg.t_max.unwrap_or(2.0);
    let mut rep = Report::new("ode-compare", "closed-form g_N geodesics solve the geodesic equation");
    rep.param("cases", cfg.cases);
    rep.param("seed", cfg.seed);
    rep.param("dt", cfg.dt);
    let mut table = Table::new("cases", &["case", "kind", "a0", "t0", "t_end", "max deviation", "log V deviation"]);
    let mut worst = 0.0_f64;
    let mut worst_log = 0.0_f64;
    for j in 0..cfg.cases {
        let (kind, _, h) = standard_case(&mut rng, &g, j)?;
        let cmp = compare_closed_form(&g, &h, t_max, cfg.dt)?;
        worst = worst.max(cmp.max_deviation);
        worst_log = worst_log.max(cmp.log_v_deviation);
        table.push(vec![
            j.to_string(),
            kind.name().into(),
            num(cmp.a0),
            num(cmp.t0),
            num(cmp.t_end),
            num(cmp.max_deviation),
            num(cmp.log_v_deviation),
        ]);
    }
    rep.tables.push(table);
    rep.check_le("closed-form-vs-rk4", worst, tol);
    rep.check_le("log-v-affine", worst_log, 1e-8);
    Ok(rep)
}

/// A `g`-multiple `φ g` with `∫ φ dV = 0`.
pub fn volume_preserving_conformal<R: Rng>(rng: &mut R, g: &MetricField) -> Result<TangentField> {
    let phi: Vec<f64> = (0..g.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = g.integrate_values(&phi) / g.volume();
    let centered: Vec<f64> = phi.iter().map(|x| x - mean).collect();
    Ok(TangentField::tautological(g).pointwise_scale(&centered))
}

pub fn curvature(cfg: &ExperimentConfig) -> Result<Report> {
    let g = base_metric(cfg)?;
    let man = g.manifold_arc().clone();
    let mut rng = case_rng(cfg);
    let n = g.dim() as f64;
    let v = g.volume();
    let eps = 1e-4;
    let mut rep = Report::new("curvature", "sectional curvature of g_p and its closed form");
    rep.param("planes", cfg.cases);
    rep.param("seed", cfg.seed);
    let mut table = Table::new("planes", &["check", "plane", "p", "value", "expected"]);

    let mut worst_flat = 0.0_f64;
    let mut worst_h = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    let mut worst_formula = 0.0_f64;
    let mut max_n = f64::NEG_INFINITY;
    let taut = TangentField::tautological(&g);
    for j in 0..cfg.cases {
        // Pure-trace planes are flat for g_E.
        let phi: Vec<f64> = (0..g.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let psi: Vec<f64> = (0..g.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let plane = PlaneSpec::orthonormal(0.0, &g, &taut.pointwise_scale(&phi), &taut.pointwise_scale(&psi))?;
        let k0 = curvature_numeric(0.0, &g, &plane.h, &plane.k, eps)?;
        worst_flat = worst_flat.max(k0.abs());
        table.push(vec!["pure-trace".into(), j.to_string(), num(0.0), num(k0), num(0.0)]);

        // Volume-preserving conformal planes have g_N curvature n/16.
        let a = volume_preserving_conformal(&mut rng, &g)?;
        let b = volume_preserving_conformal(&mut rng, &g)?;
        let plane = PlaneSpec::orthonormal(1.0, &g, &a, &b)?;
        let k1 = curvature_numeric(1.0, &g, &plane.h, &plane.k, eps)?;
        worst_h = worst_h.max((k1 - n / 16.0).abs());
        max_n = max_n.max(k1);
        table.push(vec!["conformal-h".into(), j.to_string(), num(1.0), num(k1), num(n / 16.0)]);

        // Same vectors under p = 2 and p = 0.
        let h = random_tangent(&mut rng, &man, 1.0)?;
        let k = random_tangent(&mut rng, &man, 1.0)?;
        let plane = PlaneSpec::orthonormal(2.0, &g, &h, &k)?;
        let k2 = curvature_numeric(2.0, &g, &plane.h, &plane.k, eps)?;
        let ke = curvature_numeric(0.0, &g, &plane.h, &plane.k, eps)?;
        let ratio = k2 / ke;
        worst_ratio = worst_ratio.max((ratio - v.powi(-2)).abs());
        table.push(vec!["ratio-2-0".into(), j.to_string(), num(2.0), num(ratio), num(v.powi(-2))]);

        // Formula against finite differences.
        let p = [0.5, 1.0, 2.0, 3.0, -1.0][j % 5];
        let h = random_tangent(&mut rng, &man, 1.0)?;
        let k = random_tangent(&mut rng, &man, 1.0)?;
        let plane = PlaneSpec::orthonormal(p, &g, &h, &k)?;
        let numeric = curvature_numeric(p, &g, &plane.h, &plane.k, eps)?;
        let formula = sec_formula(p, &plane, curvature_numeric(0.0, &g, &plane.h, &plane.k, eps)?)?;
        worst_formula = worst_formula.max((numeric - formula).abs());
        table.push(vec!["formula".into(), j.to_string(), num(p), num(numeric), num(formula)]);

        // Random g_N planes stay below n/16.
        let h = random_tangent(&mut rng, &man, 1.0)?;
        let k = random_tangent(&mut rng, &man, 1.0)?;
        let plane = PlaneSpec::orthonormal(1.0, &g, &h, &k)?;
        let kn = curvature_numeric(1.0, &g, &plane.h, &plane.k, eps)?;
        max_n = max_n.max(kn);
        table.push(vec!["normalized-bound".into(), j.to_string(), num(1.0), num(kn), num(n / 16.0)]);
    }
    rep.tables.push(table);
    rep.check_le("pure-trace-flat", worst_flat, 1e-5);
    rep.check_le("conformal-h-n/16", worst_h, 1e-4);
    rep.check_le("ratio-v^-2", worst_ratio, 1e-4);
    rep.check_le("formula-vs-numeric", worst_formula, 1e-4);
    rep.check_le("normalized-upper-bound", max_n, n / 16.0 + 1e-6);
    Ok(rep)
}

/// A pair of metrics differing at a few points by a small relative amount.
pub fn nearby_pair<R: Rng>(rng: &mut R, g: &MetricField, changed: &[usize], size: f64) -> Result<MetricField> {
    let man = g.manifold_arc().clone();
    let d = random_tangent(rng, &man, 1.0)?;
    let mats = (0..g.len())
        .map(|i| {
            if changed.contains(&i) {
                let gm = g.mat(i);
                let rel = size / gm.trace_pair(d.mat(i), d.mat(i)).sqrt();
                let m = gm.as_matrix() + d.mat(i).as_matrix() * rel;
                SpdMatrix::from_matrix(m).map_err(|e| e.at_point(i))
            } else {
                Ok(g.mat(i).clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(man, mats)
}

pub const SANDWICH_FAMILIES: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
pub const APPENDIX_FAMILIES: [f64; 3] = [0.0, 0.5, -1.0];

pub fn distance(cfg: &ExperimentConfig) -> Result<Report> {
    let g0 = base_metric(cfg)?;
    let man: Arc<DiscreteManifold> = g0.manifold_arc().clone();
    let mut rng = case_rng(cfg);
    let families: Vec<f64> = match cfg.p {
        Some(p) => vec![p],
        None => SANDWICH_FAMILIES.to_vec(),
    };
    let opts = DistanceOptions::default();
    let mut rep = Report::new("distance", "volume lower bounds and path-length upper bounds for d_p");
    rep.param("pairs", cfg.cases);
    rep.param("seed", cfg.seed);

    let mut pairs =
        Table::new("pairs", &["pair", "p", "lower", "upper", "method", "breakdown", "upper / upper at p=0"]);
    let mut worst_slack = f64::INFINITY;
    let mut diameter_ok = true;
    for j in 0..cfg.cases {
        let g = random_metric(&mut rng, &man, cfg.spread)?;
        let h = random_metric(&mut rng, &man, cfg.spread)?;
        let base = distance_report(0.0, &g, &h, &opts)?.upper;
        for &p in &families {
            let r = distance_report(p, &g, &h, &opts)?;
            worst_slack = worst_slack.min(r.upper - r.lower);
            let breakdown = r.candidates.iter().map(|(m, l)| format!("{m}={}", num(*l))).collect::<Vec<_>>().join(";");
            pairs.push(vec![
                j.to_string(),
                num(p),
                num(r.lower),
                num(r.upper),
                r.method.clone(),
                breakdown,
                num(r.upper / base),
            ]);
            if p != 1.0 {
                let (dg, dh) = (g.volume(), h.volume());
                let v = if p < 1.0 { dg.max(dh) } else { dg.min(dh) };
                let (bound, _) = diameter_bound(p, g.dim(), v)?;
                // The pair bound is the s → 0 limit of the cutoff path lengths.
                diameter_ok &= r.upper.min(appendix_bound(p, &g, &h)?) <= bound;
            }
        }
    }
    rep.tables.push(pairs);
    rep.check("sandwich", worst_slack >= -1e-8, format!("min(upper - lower) = {}", num(worst_slack)));
    rep.check("diameter", diameter_ok, "min(upper, pair bound) <= 2 C(p,n) v^((1-p)/2)");

    let mut rays = Table::new("rays", &["p", "c", "lower", "ray length"]);
    let mut worst_ray = 0.0_f64;
    for &p in &families {
        for c in [0.25, 3.0] {
            let h = g0.scaled(c)?;
            let lower = volume_lower_bound(p, &g0, &h)?;
            let ray = conformal_ray_length(p, g0.dim(), g0.volume(), 1.0, c);
            worst_ray = worst_ray.max((lower - ray).abs());
            rays.push(vec![num(p), num(c), num(lower), num(ray)]);
        }
    }
    rep.tables.push(rays);
    rep.check_le("ray-tightness", worst_ray, 1e-6);

    let s = 1e-6;
    let changed = [1, g0.len() / 2];
    let h0 = nearby_pair(&mut rng, &g0, &changed, 0.05)?;
    let cut = CutoffSpec::full(CutoffSpec::support(&g0, &h0), s)?;
    let mut app = Table::new("cutoff path", &["p", "hat", "middle", "tilde", "total", "bound", "middle / total"]);
    let mut middle_ok = true;
    let mut bound_ok = true;
    let app_families: Vec<f64> = match cfg.p {
        Some(p) if p != 1.0 => vec![p],
        Some(_) => vec![],
        None => APPENDIX_FAMILIES.to_vec(),
    };
    for &p in &app_families {
        let a = appendix_path(p, &g0, &h0, &cut, opts.samples)?;
        let bound = appendix_bound(p, &g0, &h0)?;
        let frac = a.segment_lengths[1] / a.total;
        middle_ok &= frac < 1e-4;
        bound_ok &= a.total <= bound;
        let [l0, l1, l2] = a.segment_lengths;
        app.push(vec![num(p), num(l0), num(l1), num(l2), num(a.total), num(bound), num(frac)]);
    }
    rep.tables.push(app);
    rep.check("cutoff-middle-vanishes", middle_ok, "middle / total < 1e-4 at s = 1e-6");
    rep.check("cutoff-bound", bound_ok, "total <= C(p,n) (V_g^(-p/2) Vol(E,g)^(1/2) + V_h^(-p/2) Vol(E,h)^(1/2))");

    let mut dec = Table::new("decoupling", &["pair", "omega2", "whole-field optimum", "relative gap"]);
    let mut worst_gap = 0.0_f64;
    let decoupling_pairs = cfg.cases.min(3);
    for j in 0..decoupling_pairs {
        let g = random_metric(&mut rng, &man, cfg.spread)?;
        let h = random_metric(&mut rng, &man, cfg.spread)?;
        let w = omega2(&g, &h, 32)?;
        let (_, opt) = optimized_path(0.0, &g, &h, 16, &opts.energy)?;
        let gap = (w - opt).abs() / opt;
        worst_gap = worst_gap.max(gap);
        dec.push(vec![j.to_string(), num(w), num(opt), num(gap)]);
    }
    rep.tables.push(dec);
    rep.check_le("omega2-decoupling", worst_gap, 0.02);

    let one = SpdMatrix::identity(1);
    let mut worst_1d = 0.0_f64;
    for (a, b) in [(1.0, 16.0), (0.3, 2.5), (5.0, 0.01)] {
        let d = fiber_distance(&one.scale(a)?, &one.scale(b)?, &one, 32)?;
        let exact = 4.0 * (f64::powf(a, 0.25) - f64::powf(b, 0.25)).abs();
        worst_1d = worst_1d.max((d - exact).abs());
    }
    rep.check_le("fiber-1d", worst_1d, 1e-6);
    Ok(rep)
}

/// Probe mode names on the command line.
pub fn probe_mode_name(mode: ProbeMode) -> &'static str {
    match mode {
        ProbeMode::Collapse => "collapse",
        ProbeMode::Blowup => "blowup",
    }
}

/// The verdict the theory predicts for `c_k g` in `g_p`.
pub fn expected_verdict(p: f64, mode: ProbeMode) -> Verdict {
    match mode {
        ProbeMode::Collapse if p < 1.0 => Verdict::Cauchy,
        ProbeMode::Blowup if p > 1.0 => Verdict::Cauchy,
        _ => Verdict::NotCauchy,
    }
}

pub fn completion(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.p.unwrap_or(0.0);
    let g = base_metric(cfg)?;
    let mode = cfg.mode.into();
    let probe = completion_probe(p, mode, &g, cfg.k_max)?;
    let mut rep = Report::new("completion", "which conformal sequences c_k g are Cauchy for d_p");
    rep.param("p", p);
    rep.param("mode", probe_mode_name(mode));
    rep.param("k_max", cfg.k_max);
    rep.param("V0", num(g.volume()));
    let mut table = Table::new("probe", &["k", "c_k", "V", "lower", "upper tail", "dual upper tail"]);
    for r in &probe.rows {
        table.push(vec![
            r.k.to_string(),
            num(r.c),
            num(r.volume),
            num(r.lower),
            num(r.upper_tail),
            num(r.dual_upper_tail),
        ]);
    }
    rep.tables.push(table);
    let expected = expected_verdict(p, mode);
    rep.check("verdict", probe.verdict == expected, format!("found {:?}, expected {:?}", probe.verdict, expected));
    let last = probe.rows.last().expect("k_max + 1 rows");
    if expected == Verdict::Cauchy {
        if let Some(tol) = cfg.tol {
            rep.check_le("tail-bound", last.upper_tail, tol);
        }
        let dual =
            probe.rows.iter().map(|r| (r.dual_upper_tail - r.upper_tail).abs() / r.upper_tail).fold(0.0, f64::max);
        rep.check_le("dual-tail", dual, 1e-12);
    } else if p == 1.0 {
        let n = g.dim() as f64;
        let expect = n.sqrt() * last.k as f64 * 4f64.ln();
        rep.check(
            "lower-growth",
            (last.lower - expect).abs() <= 1e-9 * expect,
            format!("lower at k = {} is {}, expected sqrt(n) k log 4 = {}", last.k, num(last.lower), num(expect)),
        );
    }
    Ok(rep)
}

pub const DUALITY_FAMILIES: [f64; 4] = [0.0, 0.5, 1.0, 3.0];

pub fn duality(cfg: &ExperimentConfig) -> Result<Report> {
    let g0 = base_metric(cfg)?;
    let man = g0.manifold_arc().clone();
    let mut rng = case_rng(cfg);
    let mut rep = Report::new("duality", "F(g) = V^(-4/n) g is an involutive isometry from g_p to g_(2-p)");
    rep.param("triples", cfg.cases);
    rep.param("seed", cfg.seed);
    let mut table = Table::new("families", &["p", "max |F(F(g)) - g|", "max |V_F V - 1|", "max pullback error"]);
    let mut worst = [0.0_f64; 3];
    for &p in &DUALITY_FAMILIES {
        let mut row = [0.0_f64; 3];
        for _ in 0..cfg.cases {
            let g = random_metric(&mut rng, &man, cfg.spread)?;
            let h = random_tangent(&mut rng, &man, 1.0)?;
            let k = random_tangent(&mut rng, &man, 1.0)?;
            let f = duality_map(&g)?;
            row[0] = row[0].max(duality_map(&f)?.max_deviation(&g));
            row[1] = row[1].max((f.volume() * g.volume() - 1.0).abs());
            let lhs = inner(p, &f, &duality_differential(&g, &h)?, &duality_differential(&g, &k)?)?;
            let rhs = inner(2.0 - p, &g, &h, &k)?;
            let scale = inner(2.0 - p, &g, &h, &h)?.sqrt() * inner(2.0 - p, &g, &k, &k)?.sqrt();
            row[2] = row[2].max((lhs - rhs).abs() / scale);
        }
        for (w, r) in worst.iter_mut().zip(row) {
            *w = w.max(r);
        }
        table.push(vec![num(p), num(row[0]), num(row[1]), num(row[2])]);
    }
    rep.tables.push(table);
    rep.check_le("involution", worst[0], 1e-12);
    rep.check_le("volume-inversion", worst[1], 1e-12);
    rep.check_le("pullback", worst[2], 1e-10);
    Ok(rep)
}

/// Every experiment at its default settings, in a fixed order.
pub fn verify_all(cfg: &ExperimentConfig) -> Result<Report> {
    let with = |name: &str, p: Option<f64>, cases: usize| {
        let mut c = cfg.clone();
        c.experiment = name.into();
        c.p = p;
        c.cases = cases;
        c
    };
    let mut runs: Vec<(String, Report)> = Vec::new();
    for p in [1.0, 0.0, 2.0, 3.0] {
        runs.push((format!("geodesic p={p}"), geodesic(&with("geodesic", Some(p), 0))?));
    }
    runs.push(("ode-compare".into(), ode_compare(&with("ode-compare", None, 25))?));
    runs.push(("curvature".into(), curvature(&with("curvature", None, 4))?));
    runs.push(("distance".into(), distance(&with("distance", None, 3))?));
    for (p, mode) in [(0.0, ProbeMode::Collapse), (1.0, ProbeMode::Collapse), (2.0, ProbeMode::Blowup)] {
        let mut c = with("completion", Some(p), 0);
        c.mode = mode.into();
        runs.push((format!("completion p={p} {}", probe_mode_name(mode)), completion(&c)?));
    }
    runs.push(("duality".into(), duality(&with("duality", None, 25))?));

    let mut rep = Report::new("verify-all", "every invariant suite on one fixture");
    rep.param("seed", cfg.seed);
    rep.param("n", cfg.n);
    rep.param("points", cfg.points);
    let mut table = Table::new("summary", &["experiment", "check", "status", "detail"]);
    for (name, r) in &runs {
        for c in &r.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            table.push(vec![name.clone(), c.name.clone(), status.into(), c.detail.clone()]);
            rep.checks.push(super::report::Check {
                name: format!("{name}/{}", c.name),
                passed: c.passed,
                detail: c.detail.clone(),
            });
        }
    }
    rep.tables.push(table);
    Ok(rep)
}

pub(crate) fn unknown(name: &str) -> Error {
    Error::UnknownExperiment(name.to_string())
}
