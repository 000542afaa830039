//! Acceptance criteria, one line each. Runs as a plain binary so every line
//! is printed; exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use metricspace::cli::experiments::{
    compare_closed_form, nearby_pair, standard_case, volume_preserving_conformal, CaseKind,
};
use metricspace::cli::fixture::{generate_fixture, random_metric, random_tangent, rng, DEFAULT_SPREAD};
use metricspace::curvature::{curvature_numeric, sec_formula, PlaneSpec};
use metricspace::distance::{
    appendix_bound, appendix_path, completion_probe, conformal_ray, distance_report, omega2, optimized_path,
    path_length, CutoffSpec, DistanceOptions, ProbeMode, Verdict,
};
use metricspace::fiber::fiber_distance;
use metricspace::geodesics::{
    blowup_time, density_ratio, integrate_geodesic, motion_constants, normal_form, PointCase,
};
use metricspace::metrics::{duality_differential, duality_map, inner, norm};
use metricspace::path_energy::PathEnergyOptions;
use metricspace::{Error, MetricField, SpdMatrix, SymMatrix, TangentField};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

/// The default fixture: n = 2, 8 points, unit reference volume.
fn fixture() -> MetricField {
    generate_fixture(2, 8, 7, DEFAULT_SPREAD).unwrap()
}

/// Least-squares quadratic `a t² + b t + c`; returns `(a, max |residual|)`.
fn quadratic_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let x = DMatrix::from_fn(t.len(), 3, |i, j| t[i].powi(2 - j as i32));
    let coef = x.clone().svd(true, true).solve(&DVector::from_column_slice(y), 1e-14).unwrap();
    let res = (&x * &coef - DVector::from_column_slice(y)).amax();
    (coef[0], res)
}

const DT: f64 = 1e-3;
const CASES: usize = 25;

fn closed_form_cases() -> (MetricField, Vec<(CaseKind, f64, TangentField)>) {
    let g = fixture();
    let mut r = rng(101);
    let cases = (0..CASES).map(|j| standard_case(&mut r, &g, j).unwrap()).collect();
    (g, cases)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (g, cases) = closed_form_cases();
    let kinds_seen =
        [CaseKind::Generic, CaseKind::PureTrace, CaseKind::Mixed].iter().all(|k| cases.iter().any(|c| c.0 == *k));
    let signs_seen = cases.iter().any(|c| c.1 > 0.0) && cases.iter().any(|c| c.1 < 0.0);
    let mut worst = 0.0_f64;
    for (_, sign, h) in &cases {
        let cmp = compare_closed_form(&g, h, 2.0, DT).unwrap();
        assert_eq!(cmp.a0.signum(), *sign);
        worst = worst.max(cmp.max_deviation);
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-6 && elapsed < Duration::from_secs(30) && kinds_seen && signs_seen,
        format!("max deviation {worst:.3e} < 1e-6 over {CASES} cases, {:.1}s < 30s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let (g, cases) = closed_form_cases();
    let n = g.dim() as f64;
    let mut worst_log = 0.0_f64;
    let mut worst_slope = 0.0_f64;
    let mut truncated = 0;
    for (_, _, h) in &cases {
        let cmp = compare_closed_form(&g, h, 2.0, DT).unwrap();
        worst_log = worst_log.max(cmp.log_v_deviation);
        for p in [0.0, 2.0, 3.0] {
            // A g_p geodesic may reach the cone boundary before the g_N one does.
            let path = match integrate_geodesic(p, &g, h, cmp.t_end, DT) {
                Err(Error::LeftCone { t, .. }) => {
                    truncated += 1;
                    integrate_geodesic(p, &g, h, (0.9 * t / DT).floor() * DT, DT).unwrap()
                }
                other => other.unwrap(),
            };
            let m = motion_constants(&path).unwrap();
            let sigma2 = inner(p, &g, h, h).unwrap();
            let expect = 0.25 * n * (1.0 - p) * sigma2;
            worst_slope = worst_slope.max((m.fitted_slope - expect).abs() / expect.abs());
        }
    }
    outcome(
        worst_log < 1e-8 && worst_slope < 1e-6,
        format!(
            "log V secant deviation {worst_log:.3e} < 1e-8; c(t) slope relative error {worst_slope:.3e} < 1e-6 \
             ({truncated} of {} p != 1 runs stopped at 0.9 x cone exit)",
            3 * CASES
        ),
    )
}

fn criterion_3() -> Outcome {
    let g = fixture();
    let n = g.dim() as f64;
    let man = g.manifold_arc().clone();
    let mut r = rng(303);
    let (mut c0, mut r0, mut c3, mut r3) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..5 {
        let h = random_tangent(&mut r, &man, 0.5).unwrap();
        for (p, power, expect) in [(0.0, 1.0, n / 16.0), (3.0, -2.0, n * 4.0 / 16.0)] {
            let h = h.scale(1.0 / norm(p, &g, &h).unwrap());
            let path = integrate_geodesic(p, &g, &h, 1.0, DT).unwrap();
            let y: Vec<f64> = path.volumes().iter().map(|v| v.powf(power)).collect();
            let (a, res) = quadratic_fit(&path.times, &y);
            if p == 0.0 {
                c0 = c0.max((a - expect).abs() / expect);
                r0 = r0.max(res);
            } else {
                c3 = c3.max((a - expect).abs() / expect);
                r3 = r3.max(res);
            }
        }
    }
    outcome(
        r0 < 1e-6 && c0 < 1e-6 && r3 < 1e-4 && c3 < 1e-4,
        format!(
            "p=0: V residual {r0:.3e} < 1e-6, coefficient error {c0:.3e}; p=3: V^-2 residual {r3:.3e} < 1e-4, coefficient error {c3:.3e}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let g = fixture();
    let man = g.manifold_arc().clone();
    let mut r = rng(404);
    let base = random_tangent(&mut r, &man, 0.5).unwrap();
    let mut mats: Vec<SymMatrix> = base.mats().to_vec();
    mats[3] = g.mat(3).sym().scale(0.7);
    let h = TangentField::new(man, mats).unwrap();
    let nf = normal_form(&g, &h).unwrap();
    let zero_points: Vec<usize> = (0..nf.len()).filter(|&i| nf.cases[i] == PointCase::PureConformal).collect();
    assert_eq!(zero_points, vec![3]);

    // Root of b₀ cos(b₀t/2) + q sin(b₀t/2): b₀t/2 = atan2(b₀, −q) in (0, π).
    let (b0, q) = (nf.b0, nf.q[3]);
    let t0_oracle = 2.0 * b0.atan2(-q) / b0;
    let t0 = blowup_time(&nf);
    let t_late = 0.999 * t0;
    let ratio = density_ratio(&nf, 3, t_late) * (0.5 * nf.a0 * t_late).exp();
    let at_late = metricspace::geodesics::geodesic_eval(&nf, &g, t_late).unwrap();
    let measured = at_late.densities()[3] / g.densities()[3];
    outcome(
        (t0 - t0_oracle).abs() < 1e-8 && measured < 1e-3 && (measured - ratio).abs() <= 1e-10,
        format!("t0 = {t0:.12} vs root {t0_oracle:.12}; density ratio at 0.999 t0 = {measured:.3e} < 1e-3"),
    )
}

fn criterion_5() -> Outcome {
    let g0 = fixture();
    let man = g0.manifold_arc().clone();
    let mut r = rng(505);
    let (mut inv, mut vol, mut pull) = (0.0_f64, 0.0_f64, 0.0_f64);
    for p in [0.0, 0.5, 1.0, 3.0] {
        for _ in 0..100 {
            let g = random_metric(&mut r, &man, DEFAULT_SPREAD).unwrap();
            let h = random_tangent(&mut r, &man, 1.0).unwrap();
            let k = random_tangent(&mut r, &man, 1.0).unwrap();
            let f = duality_map(&g).unwrap();
            let ff = duality_map(&f).unwrap();
            let scale = g.mats().iter().map(|m| m.as_matrix().norm()).fold(0.0, f64::max);
            inv = inv.max(ff.max_deviation(&g) / scale);
            vol = vol.max((f.volume() * g.volume() - 1.0).abs());
            let lhs =
                inner(p, &f, &duality_differential(&g, &h).unwrap(), &duality_differential(&g, &k).unwrap()).unwrap();
            let rhs = inner(2.0 - p, &g, &h, &k).unwrap();
            let nrm = norm(2.0 - p, &g, &h).unwrap() * norm(2.0 - p, &g, &k).unwrap();
            pull = pull.max((lhs - rhs).abs() / nrm);
        }
    }
    outcome(
        inv < 1e-12 && vol < 1e-12 && pull < 1e-10,
        format!("F∘F {inv:.3e} < 1e-12; V_F·V − 1 {vol:.3e} < 1e-12; pullback {pull:.3e} < 1e-10"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let g = fixture();
    let man = g.manifold_arc().clone();
    let n = g.dim() as f64;
    let v = g.volume();
    let eps = 1e-4;
    let mut r = rng(606);
    let taut = TangentField::tautological(&g);
    let normal =
        |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..g.len()).map(|_| r.sample(StandardNormal)).collect() };

    let mut a = 0.0_f64;
    let mut b = 0.0_f64;
    let mut c = 0.0_f64;
    let mut d = 0.0_f64;
    let mut e = f64::NEG_INFINITY;
    for j in 0..20 {
        let (phi, psi) = (normal(&mut r), normal(&mut r));
        let pl = PlaneSpec::orthonormal(0.0, &g, &taut.pointwise_scale(&phi), &taut.pointwise_scale(&psi)).unwrap();
        a = a.max(curvature_numeric(0.0, &g, &pl.h, &pl.k, eps).unwrap().abs());

        let x = volume_preserving_conformal(&mut r, &g).unwrap();
        let y = volume_preserving_conformal(&mut r, &g).unwrap();
        let pl = PlaneSpec::orthonormal(1.0, &g, &x, &y).unwrap();
        let k1 = curvature_numeric(1.0, &g, &pl.h, &pl.k, eps).unwrap();
        b = b.max((k1 - n / 16.0).abs());
        e = e.max(k1);

        let x = random_tangent(&mut r, &man, 1.0).unwrap();
        let y = random_tangent(&mut r, &man, 1.0).unwrap();
        let pl = PlaneSpec::orthonormal(2.0, &g, &x, &y).unwrap();
        let ratio = curvature_numeric(2.0, &g, &pl.h, &pl.k, eps).unwrap()
            / curvature_numeric(0.0, &g, &pl.h, &pl.k, eps).unwrap();
        c = c.max((ratio - v.powi(-2)).abs());

        let p = [0.5, 1.0, 2.0, 3.0, -1.0][j % 5];
        let x = random_tangent(&mut r, &man, 1.0).unwrap();
        let y = random_tangent(&mut r, &man, 1.0).unwrap();
        let pl = PlaneSpec::orthonormal(p, &g, &x, &y).unwrap();
        let numeric = curvature_numeric(p, &g, &pl.h, &pl.k, eps).unwrap();
        let formula = sec_formula(p, &pl, curvature_numeric(0.0, &g, &pl.h, &pl.k, eps).unwrap()).unwrap();
        d = d.max((numeric - formula).abs());

        let x = random_tangent(&mut r, &man, 1.0).unwrap();
        let y = random_tangent(&mut r, &man, 1.0).unwrap();
        let pl = PlaneSpec::orthonormal(1.0, &g, &x, &y).unwrap();
        e = e.max(curvature_numeric(1.0, &g, &pl.h, &pl.k, eps).unwrap());
    }
    let elapsed = start.elapsed();
    outcome(
        a < 1e-5 && b < 1e-4 && c < 1e-4 && d < 1e-4 && e <= n / 16.0 + 1e-6 && elapsed < Duration::from_secs(60),
        format!(
            "(a) {a:.2e} (b) {b:.2e} (c) {c:.2e} (d) {d:.2e} (e) max {e:.9} <= {:.9}; {:.1}s < 60s",
            n / 16.0 + 1e-6,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let g0 = fixture();
    let man = g0.manifold_arc().clone();
    let mut r = rng(707);
    let opts = DistanceOptions::default();
    let mut slack = f64::INFINITY;
    let mut ray_gap = 0.0_f64;
    for _ in 0..50 {
        let g = random_metric(&mut r, &man, DEFAULT_SPREAD).unwrap();
        let h = random_metric(&mut r, &man, DEFAULT_SPREAD).unwrap();
        for p in [0.0, 0.5, 1.0, 2.0] {
            let rep = distance_report(p, &g, &h, &opts).unwrap();
            slack = slack.min(rep.upper - rep.lower);
        }
    }
    for p in [0.0, 0.5, 1.0, 2.0] {
        for c in [0.1, 0.5, 4.0] {
            let h = g0.scaled(c).unwrap();
            let rep = distance_report(p, &g0, &h, &opts).unwrap();
            // Numerical length of the sampled ray, independent of the closed form.
            let sampled = path_length(p, &conformal_ray(p, &g0, c, 256).unwrap()).unwrap();
            ray_gap = ray_gap.max((rep.upper - rep.lower).abs()).max((sampled - rep.lower).abs());
        }
    }
    outcome(
        slack >= -1e-8 && ray_gap < 1e-6,
        format!("min slack {slack:.3e} >= -1e-8 on 50 pairs x 4 p; ray gap {ray_gap:.3e} < 1e-6"),
    )
}

fn criterion_8() -> Outcome {
    let g = fixture();
    let mut r = rng(808);
    let h = nearby_pair(&mut r, &g, &[1, 4], 0.05).unwrap();
    let cut = CutoffSpec::full(CutoffSpec::support(&g, &h), 1e-6).unwrap();
    let mut worst_frac = 0.0_f64;
    let mut bound_ok = true;
    let mut lines = Vec::new();
    for p in [0.0, 0.5, -1.0] {
        let a = appendix_path(p, &g, &h, &cut, 32).unwrap();
        let bound = appendix_bound(p, &g, &h).unwrap();
        worst_frac = worst_frac.max(a.segment_lengths[1] / a.total);
        bound_ok &= a.total <= bound;
        lines.push(format!("p={p}: {:.6} <= {:.6}", a.total, bound));
    }
    outcome(worst_frac < 1e-4 && bound_ok, format!("middle/total {worst_frac:.3e} < 1e-4; totals {}", lines.join(", ")))
}

fn criterion_9() -> Outcome {
    let g0 = fixture();
    let man = g0.manifold_arc().clone();
    let mut r = rng(909);
    let energy = PathEnergyOptions::default();
    let mut gap = 0.0_f64;
    for _ in 0..10 {
        let g = random_metric(&mut r, &man, DEFAULT_SPREAD).unwrap();
        let h = random_metric(&mut r, &man, DEFAULT_SPREAD).unwrap();
        let w = omega2(&g, &h, 32).unwrap();
        let (_, opt) = optimized_path(0.0, &g, &h, 16, &energy).unwrap();
        gap = gap.max((w - opt).abs() / opt);
    }
    let one = SpdMatrix::identity(1);
    let mut d1 = 0.0_f64;
    for _ in 0..10 {
        let a: f64 = (3.0 * r.gen_range(-1.0..1.0f64)).exp();
        let b: f64 = (3.0 * r.gen_range(-1.0..1.0f64)).exp();
        let d = fiber_distance(&one.scale(a).unwrap(), &one.scale(b).unwrap(), &one, 32).unwrap();
        d1 = d1.max((d - 4.0 * (a.powf(0.25) - b.powf(0.25)).abs()).abs());
    }
    outcome(gap < 0.02 && d1 < 1e-6, format!("Ω₂ vs whole-field gap {gap:.3e} < 0.02; 1-d fiber error {d1:.3e} < 1e-6"))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let g = fixture();
    let n = g.dim();
    let p0 = completion_probe(0.0, ProbeMode::Collapse, &g, 20).unwrap();
    let p1 = completion_probe(1.0, ProbeMode::Collapse, &g, 20).unwrap();
    let p2 = completion_probe(2.0, ProbeMode::Blowup, &g, 20).unwrap();

    // Tail oracle: numerical length of the ray from c_20 down to c_20 · 4^{-40}.
    let c20 = p0.rows[20].c;
    let h20 = g.scaled(c20).unwrap();
    let oracle = path_length(0.0, &conformal_ray(0.0, &h20, 4f64.powi(-40), 4096).unwrap()).unwrap();
    let tail = p0.rows[20].upper_tail;
    let tail_ok = (oracle - tail).abs() <= 1e-6 * tail;
    let p0_ok = p0.verdict == Verdict::Cauchy && tail < 1e-6 && tail_ok;

    let lower = |k: usize| p1.rows[k].lower;
    let step = lower(1) - lower(0);
    let linear = (1..=20).all(|k| (lower(k) - k as f64 * step).abs() <= 1e-9 * lower(k));
    let expect_step = (n as f64).sqrt() * 4f64.ln();
    let p1_ok = p1.verdict == Verdict::NotCauchy && lower(20) > 10.0 && linear && (step - expect_step).abs() < 1e-12;

    let dual_ok = p2.rows.iter().zip(&p0.rows).all(|(a, b)| {
        (a.dual_upper_tail - a.upper_tail).abs() <= 1e-12 * a.upper_tail
            && a.upper_tail.is_finite()
            && b.upper_tail.is_finite()
    });
    let p2_ok = p2.verdict == Verdict::Cauchy && dual_ok;
    let elapsed = start.elapsed();
    outcome(
        p0_ok && p1_ok && p2_ok && elapsed < Duration::from_secs(30),
        format!(
            "p=0 collapse {:?}, tail at k=20 {tail:.3e} < 1e-6 [{}] (ray oracle {oracle:.3e}); \
             p=1 collapse {:?}, lower at k=20 {:.3} > 10, linear [{}]; p=2 blowup {:?} [{}]",
            p0.verdict,
            if tail < 1e-6 { "ok" } else { "violated" },
            p1.verdict,
            lower(20),
            if linear { "ok" } else { "violated" },
            p2.verdict,
            if p2_ok { "ok" } else { "violated" },
        ),
    )
}

fn criterion_11() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_metricspace");
    let run = || Command::new(exe).args(["verify-all", "--seed", "7"]).output().unwrap();
    let (a, b) = (run(), run());
    let ok = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(ok, format!("{} bytes, identical = {}, exit = {:?}", a.stdout.len(), a.stdout == b.stdout, a.status.code()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("closed-form vs RK4 geodesics", criterion_1),
        ("conserved quantities", criterion_2),
        ("volume quadraticity", criterion_3),
        ("blow-up", criterion_4),
        ("duality", criterion_5),
        ("curvature", criterion_6),
        ("distance sandwich", criterion_7),
        ("cutoff path construction", criterion_8),
        ("fiberwise distance vs decoupled optimum", criterion_9),
        ("completion probes", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {:>2} {:<40} {}  {}", i + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
