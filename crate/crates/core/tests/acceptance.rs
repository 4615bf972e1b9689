//! Acceptance runner: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported but do not fail the process unless
//! `HTSTEP_ACCEPTANCE_STRICT=1`. `HTSTEP_ACCEPTANCE_ONLY=1,3,9` selects a
//! subset.

use std::time::Instant;

use htstep::experiments::{convergence_study, dense_reference, l2_distance, ConvergenceStudy, MASS_ROUNDING};
use htstep::fokker_planck::{mass, FpProblem};
use htstep::integrators::{
    integrate, step_count, threshold_schedule, IntegrateOptions, SchemeSpec, StepRecord, ThresholdPolicy,
};
use htstep::reference::{integrate_rk4, run_to_steady};
use htstep::spectral::quad_integral_dense;
use htstep::suites::run_suite;
use htstep::{DenseTensor, HTensor, TreeShape, TruncationControl};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Criterion-1 runs, shared by criteria 1, 2 and 8.
struct OrderRuns {
    studies: Vec<(ConvergenceStudy, f64)>,
    reference_mass_drift: f64,
    reference_halving: f64,
}

const ORDER_DTS: [f64; 4] = [5e-4, 1e-3, 2e-3, 4e-3];

fn order_runs() -> OrderRuns {
    let p = FpProblem::preset("fp2d-paper", Some(40), TreeShape::Balanced).unwrap();
    let t_final = 1.0;
    let ref_dt = 1e-4;
    let f0 = p.f0.to_dense().unwrap();
    let mut drift = 0.0f64;
    let reference = integrate_rk4(&p.operator, &f0, ref_dt, step_count(t_final, ref_dt).unwrap(), |_, _, f| {
        drift = drift.max((quad_integral_dense(f, &p.grid)? - 1.0).abs());
        Ok(())
    })
    .unwrap();
    let half = dense_reference(&p, ref_dt / 2.0, t_final).unwrap();
    let halving = p.l2_norm_dense(&DenseTensor::linear_combine(1.0, &reference, -1.0, &half).unwrap());

    let mut studies = Vec::new();
    for (scheme, q_ref) in [
        (SchemeSpec::euler(), 0.6),
        (SchemeSpec::adams_bashforth(2).unwrap(), 2.0),
        (SchemeSpec::midpoint(), 5.0),
    ] {
        let policy = ThresholdPolicy::paper_small(&scheme);
        let study =
            convergence_study(&p, &scheme, &policy, &ORDER_DTS, t_final, &reference, &IntegrateOptions::default()).unwrap();
        for pt in &study.points {
            let res = match &pt.outcome {
                Ok(e) => format!("error {e:.3e}"),
                Err(m) => format!("FAILED ({m})"),
            };
            println!(
                "    {:<8} dt={:<7} {res}  max_rank={} steps={} {:.1}s",
                study.scheme, pt.dt, pt.max_rank, pt.steps, pt.wall_s
            );
        }
        studies.push((study, q_ref));
    }
    OrderRuns {
        studies,
        reference_mass_drift: drift,
        reference_halving: halving,
    }
}

fn criterion_1(runs: &OrderRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (study, q_ref) in &runs.studies {
        let range = if study.order == 1 { (0.75, 1.3) } else { (1.7, 2.4) };
        let complete = study.all_completed();
        let slope = study.slope();
        let q = study.q_hat();
        let ok = complete
            && slope.is_some_and(|s| s >= range.0 && s <= range.1)
            && q.is_some_and(|q| q <= 3.0 * q_ref);
        pass &= ok;
        let failed: Vec<String> = study.points.iter().filter(|p| p.outcome.is_err()).map(|p| p.dt.to_string()).collect();
        parts.push(format!(
            "{} slope={} (want [{}, {}]) Q={} (want <= 3 x {}){}",
            study.scheme,
            slope.map_or("n/a".into(), |s| format!("{s:.3}")),
            range.0,
            range.1,
            q.map_or("n/a".into(), |q| format!("{q:.3}")),
            q_ref,
            if failed.is_empty() { String::new() } else { format!(" unstable at dt={}", failed.join(",")) }
        ));
    }
    parts.push(format!("reference halving difference {:.2e}", runs.reference_halving));
    Outcome::new(pass, parts.join("; "))
}

fn all_records(runs: &OrderRuns) -> impl Iterator<Item = (&str, f64, &StepRecord)> {
    all_records_with_status(runs).map(|(s, dt, r, _)| (s, dt, r))
}

fn all_records_with_status(runs: &OrderRuns) -> impl Iterator<Item = (&str, f64, &StepRecord, bool)> {
    runs.studies.iter().flat_map(|(s, _)| {
        s.points
            .iter()
            .flat_map(move |p| p.records.iter().map(move |r| (s.scheme.as_str(), p.dt, r, p.outcome.is_ok())))
    })
}

fn criterion_2(runs: &OrderRuns) -> Outcome {
    let total = all_records(runs).count();
    let bad: Vec<String> = all_records(runs)
        .filter(|(_, _, r)| !r.compliant())
        .map(|(s, dt, r)| format!("{s} dt={dt} k={}", r.k))
        .collect();
    Outcome::new(
        bad.is_empty(),
        format!("{} violations over {total} recorded steps{}", bad.len(), if bad.is_empty() { String::new() } else { format!(": {}", bad.iter().take(5).cloned().collect::<Vec<_>>().join(", ")) }),
    )
}

fn criterion_3() -> Outcome {
    let dec = |s: &str| s.parse::<f64>().unwrap();
    let euler = SchemeSpec::euler();
    let mid = SchemeSpec::midpoint();
    let ab2 = SchemeSpec::adams_bashforth(2).unwrap();
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let dt = dec("6.25e-4");
    let e = threshold_schedule(&euler, dt, &ThresholdPolicy::paper_small(&euler)).unwrap();
    let a = threshold_schedule(&ab2, dt, &ThresholdPolicy::paper_small(&ab2)).unwrap();
    let m = threshold_schedule(&mid, dt, &ThresholdPolicy::paper_small(&mid)).unwrap();
    checks.extend([
        ("2D euler eps_r", e.alpha, dec("3.90625e-5")),
        ("2D euler eps_s", e.beta, dec("6.25e-2")),
        ("2D ab2 eps_alpha", a.alpha, dec("2.44140625e-7")),
        ("2D ab2 eps_beta", a.beta, dec("3.90625e-4")),
        ("2D ab2 eps_gamma0", a.gamma[0], dec("3.90625e-5")),
        ("2D ab2 eps_gamma1", a.gamma[1], dec("3.90625e-5")),
        ("2D midpoint eps_alpha", m.alpha, dec("2.44140625e-7")),
        ("2D midpoint eps_beta", m.beta, dec("3.90625e-4")),
        ("2D midpoint eps_gamma", m.gamma[0], dec("6.25e-2")),
    ]);

    let dt = dec("1e-3");
    let e = threshold_schedule(&euler, dt, &ThresholdPolicy::paper_small(&euler)).unwrap();
    let a = threshold_schedule(&ab2, dt, &ThresholdPolicy::paper_small(&ab2)).unwrap();
    checks.extend([
        ("4D euler eps_r", e.alpha, dec("1e-4")),
        ("4D euler eps_s", e.beta, dec("1e-1")),
        ("4D ab2 eps_alpha", a.alpha, dec("1e-6")),
        ("4D ab2 eps_beta", a.beta, dec("1e-3")),
        ("4D ab2 eps_gamma0", a.gamma[0], dec("1e-4")),
        ("4D ab2 eps_gamma1", a.gamma[1], dec("1e-4")),
    ]);
    let bad: Vec<String> =
        checks.iter().filter(|(_, got, want)| got != want).map(|(n, got, want)| format!("{n}: {got:e} != {want:e}")).collect();
    Outcome::new(bad.is_empty(), format!("{}/{} values exact{}", checks.len() - bad.len(), checks.len(), if bad.is_empty() { String::new() } else { format!(": {}", bad.join(", ")) }))
}

fn suite_outcome(runs: &[(&str, usize)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(name, cases) in runs {
        let rep = run_suite(name, SEED, cases).unwrap();
        pass &= rep.passed();
        parts.push(rep.summary_line());
        for f in rep.failures.iter().take(3) {
            parts.push(format!("  {f}"));
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_8(runs: &OrderRuns) -> Outcome {
    let p = FpProblem::preset("fp2d-paper", Some(40), TreeShape::Balanced).unwrap();
    let n = p.grid.n();
    let total = all_records(runs).count();
    let mut bad = Vec::new();
    let mut bad_in_completed = 0;
    let mut worst_ratio = 0.0f64;
    let mut worst_completed = 0.0f64;
    for (s, dt, r, completed) in all_records_with_status(runs) {
        let bound = htstep::experiments::mass_bound(r, dt, n, 2);
        let drift = (r.mass - 1.0).abs();
        if r.k > 0 {
            worst_ratio = worst_ratio.max(drift / bound);
            if completed {
                worst_completed = worst_completed.max(drift / bound);
            }
        }
        if !(drift <= bound + MASS_ROUNDING) {
            bad.push(format!("{s} dt={dt} k={} drift={drift:.2e} bound={bound:.2e}", r.k));
            bad_in_completed += completed as usize;
        }
    }
    let ref_ok = runs.reference_mass_drift <= 1e-10;
    Outcome::new(
        bad.is_empty() && ref_ok,
        format!(
            "{} bound violations over {total} steps, {bad_in_completed} of them in runs that completed (largest drift/bound {worst_ratio:.3e}, {worst_completed:.3e} in completed runs); dense reference drift {:.2e}{}",
            bad.len(),
            runs.reference_mass_drift,
            if bad.is_empty() { String::new() } else { format!(": {}", bad.iter().take(3).cloned().collect::<Vec<_>>().join(", ")) }
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = FpProblem::preset("fp4d-paper", Some(20), TreeShape::Balanced).unwrap();
    let (dt, t_final) = (1e-3, 0.1);
    let clock = Instant::now();
    let reference = dense_reference(&p, dt, t_final).unwrap();
    let ref_s = clock.elapsed().as_secs_f64();
    let scheme = SchemeSpec::adams_bashforth(2).unwrap();
    let opts = IntegrateOptions {
        cell_volume: p.grid.cell_volume(4),
        ..Default::default()
    };
    let clock = Instant::now();
    let mut records: Vec<StepRecord> = Vec::new();
    let res = integrate(&p.operator, &p.f0, &scheme, dt, t_final, &ThresholdPolicy::paper_small(&scheme), &opts, &mut records, None);
    let run_s = clock.elapsed().as_secs_f64();
    let res = match res {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("run failed: {e}")),
    };
    let err = l2_distance(&p.grid, &res.final_state, &reference).unwrap();
    let max_rank = records.iter().map(|r| r.max_rank).max().unwrap();
    let ht_bytes = res.final_state.serialized_len();
    let dense_bytes = 8 * reference.len();
    let ratio = dense_bytes as f64 / ht_bytes as f64;
    let m = mass(&res.final_state, &p.grid).unwrap();
    // Ranks the exact solution itself needs at the final-step tolerance.
    let eps = records.last().unwrap().thresholds.alpha;
    let (compressed, _) = HTensor::from_dense(&reference, p.f0.tree(), &TruncationControl::Tolerance(eps)).unwrap();
    Outcome::new(
        err <= 1e-3 && max_rank <= 40 && ratio >= 10.0,
        format!(
            "L2 error {err:.3e} (<= 1e-3), max rank {max_rank} (<= 40), {ht_bytes} B vs {dense_bytes} B dense = {ratio:.1}x (>= 10); final ranks {:?}, mass {m:.12}; dense reference compressed to {eps:e} has ranks {:?}; reference {ref_s:.0}s, run {run_s:.0}s",
            res.final_state.ranks(),
            compressed.ranks()
        ),
    )
}

fn criterion_10() -> Outcome {
    let p = FpProblem::preset("fp2d-paper", Some(50), TreeShape::Balanced).unwrap();
    let clock = Instant::now();
    let ss = match run_to_steady(&p.operator, &p.f0.to_dense().unwrap(), &p.grid, 1e-3, 1e-13, 100_000) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, format!("reference did not reach steady state: {e}")),
    };
    let ref_s = clock.elapsed().as_secs_f64();
    let tail = htstep::reference::tail_decreasing(&ss.residuals, 100);

    let dt = 6.25e-4;
    let t_end = (ss.time / dt).ceil() * dt;
    let scheme = SchemeSpec::euler();
    let opts = IntegrateOptions {
        cell_volume: p.grid.cell_volume(2),
        ..Default::default()
    };
    let clock = Instant::now();
    let mut records: Vec<StepRecord> = Vec::new();
    let res = integrate(&p.operator, &p.f0, &scheme, dt, t_end, &ThresholdPolicy::paper_small(&scheme), &opts, &mut records, None);
    let run_s = clock.elapsed().as_secs_f64();
    let res = match res {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("t_ss = {:.3}; Euler run failed: {e}", ss.time)),
    };
    let err = l2_distance(&p.grid, &res.final_state, &ss.state).unwrap();
    let samples: Vec<String> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, t_end]
        .iter()
        .map(|&t| {
            let k = ((t / dt).round() as usize).min(records.len() - 1);
            format!("t={:.1}:{}", records[k].t, records[k].max_rank)
        })
        .collect();
    Outcome::new(
        (14.0..=34.0).contains(&ss.time) && err <= 1e-2,
        format!(
            "t_ss = {:.3} (want [14, 34]), residual tail decreasing: {tail}; adaptive Euler at t = {t_end:.4} vs steady state: L2 error {err:.3e} (<= 1e-2); max rank by time [{}]; reference {ref_s:.0}s, run {run_s:.0}s",
            ss.time,
            samples.join(" ")
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("HTSTEP_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |k: usize| only.as_ref().map_or(true, |v| v.contains(&k));
    let strict = std::env::var("HTSTEP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let names = [
        "order of convergence",
        "per-step threshold compliance",
        "threshold arithmetic",
        "truncation guarantees",
        "truncation Jacobian and consistency",
        "rank-increase equivalence",
        "DO/BO and SVD-form co-integration",
        "mass conservation",
        "4D experiment",
        "steady state",
    ];
    let runs = if want(1) || want(2) || want(8) {
        println!("running 2D convergence studies (n = 40, T = 1)");
        Some(order_runs())
    } else {
        None
    };
    let mut results = Vec::new();
    for k in 1..=10 {
        if !want(k) {
            continue;
        }
        let clock = Instant::now();
        let out = match k {
            1 => criterion_1(runs.as_ref().unwrap()),
            2 => criterion_2(runs.as_ref().unwrap()),
            3 => criterion_3(),
            4 => suite_outcome(&[("truncation", 500)]),
            5 => suite_outcome(&[("jacobian", 100), ("consistency", 100)]),
            6 => suite_outcome(&[("prop5-equivalence", 100)]),
            7 => suite_outcome(&[("dobo", 50)]),
            8 => criterion_8(runs.as_ref().unwrap()),
            9 => criterion_9(),
            10 => criterion_10(),
            _ => unreachable!(),
        };
        println!(
            "criterion {k:>2} [{}]: {} ({:.1}s) {}",
            names[k - 1],
            if out.pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64(),
            out.detail
        );
        results.push(out.pass);
    }
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
