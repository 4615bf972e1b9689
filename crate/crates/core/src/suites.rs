//! Seeded randomized property suites, shared by the `proptest` subcommand
//! and the acceptance runner.

use rand::Rng;

use crate::error::{Error, Result};
use crate::htucker::{DimensionTree, TruncationControl};
use crate::integrators::fit_order;
use crate::linalg::{svd, tail_norm};
use crate::manifold::{
    consistency_gap, equivalence_check, jacobian_defect, rk4_dobo, rk4_svd_form, svd_perturb_step, DoboState, SvdTriple,
};
use crate::randgen::{random_htensor, random_matrix, random_orthonormal, rng, TestRng};
use crate::tensor::{DenseTensor, Matrix};

pub const SUITES: &[&str] = &["truncation", "jacobian", "consistency", "prop5-equivalence", "dobo"];

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub failures: Vec<String>,
    /// One `key=value` line per case.
    pub details: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, cases: usize) -> Self {
        Self {
            suite: suite.to_string(),
            seed,
            cases,
            failures: Vec::new(),
            details: Vec::with_capacity(cases),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary_line(&self) -> String {
        format!(
            "suite={} seed={} cases={} failed={} status={}",
            self.suite,
            self.seed,
            self.cases,
            self.failures.len(),
            if self.passed() { "pass" } else { "fail" }
        )
    }

    fn check(&mut self, case: usize, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(format!("case {case}: {}", what()));
        }
    }
}

pub fn run_suite(name: &str, seed: u64, cases: usize) -> Result<SuiteReport> {
    match name {
        "truncation" => truncation_suite(seed, cases),
        "jacobian" => jacobian_suite(seed, cases),
        "consistency" => consistency_suite(seed, cases),
        "prop5-equivalence" => equivalence_suite(seed, cases),
        "dobo" => dobo_suite(seed, cases),
        other => Err(Error::Config(format!("unknown suite `{other}` (known: {})", SUITES.join(", ")))),
    }
}

/// Lower bound on the best error at the given node ranks: a tensor with those
/// ranks has matricizations of at most those ranks, so the Eckart–Young tail
/// at any node bounds the best error from below.
pub fn best_error_lower_bound(t: &DenseTensor, tree: &DimensionTree, ranks: &[usize]) -> Result<f64> {
    let mut lb = 0.0f64;
    for (id, node) in tree.nodes().iter().enumerate().skip(1) {
        let s = svd(&t.matricize(&node.mode_set())?)?.s;
        lb = lb.max(tail_norm(&s, ranks[id]));
    }
    Ok(lb)
}

fn dense_distance(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    Ok(DenseTensor::linear_combine(1.0, a, -1.0, b)?.norm())
}

/// Random HT tensors with `d ∈ {2,3,4}` and dims `≤ 8`: tolerance truncation
/// meets `ε` and its estimate; `d = 2` fixed-rank truncation equals
/// Eckart–Young; with dims `≤ 6` the error is within `sqrt(2d−3)` of the
/// best-error lower bound.
pub fn truncation_suite(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("truncation", seed, cases);
    let mut r = rng(seed);
    for case in 0..cases {
        let d = r.gen_range(2..=4);
        let small = r.gen_bool(0.5);
        let hi = if small { 6 } else { 8 };
        let dims: Vec<usize> = (0..d).map(|_| r.gen_range(2..=hi)).collect();
        let rank = r.gen_range(1..=5);
        let h = random_htensor(&mut r, &dims, rank);
        let full = h.to_dense()?;
        let eps = 10f64.powf(r.gen_range(-4.0..0.0)) * h.norm();
        let tr = h.truncate(&TruncationControl::Tolerance(eps))?;
        let e = dense_distance(&full, &tr.tensor.to_dense()?)?;
        rep.check(case, e <= eps, || format!("error {e:e} > eps {eps:e}"));
        let slack = 1e-10 * tr.err_est + 1e-13 * h.norm();
        rep.check(case, e <= tr.err_est + slack, || format!("error {e:e} > estimate {:e}", tr.err_est));
        let mut detail = format!("case={case} d={d} dims={dims:?} eps={eps:e} err={e:e} est={:e}", tr.err_est);

        if small {
            let lb = best_error_lower_bound(&full, h.tree(), &tr.ranks)?;
            let factor = TruncationControl::quasi_optimality_factor(d);
            rep.check(case, e <= factor * lb * (1.0 + 1e-10) + 1e-13 * h.norm(), || {
                format!("error {e:e} exceeds {factor} x best lower bound {lb:e}")
            });
            detail += &format!(" best_lb={lb:e}");
        }
        if d == 2 {
            let m = full.matricize(&crate::tensor::ModeSet::range(0, 1))?;
            let s = svd(&m)?.s;
            let k = r.gen_range(1..=dims[0].min(dims[1]));
            let tk = h.truncate(&TruncationControl::uniform_rank(h.tree(), k))?;
            let ek = dense_distance(&full, &tk.tensor.to_dense()?)?;
            let ey = tail_norm(&s, k);
            rep.check(case, (ek - ey).abs() <= 1e-11 * ey.max(h.norm() * 1e-3), || {
                format!("rank {k}: error {ek:e} vs Eckart-Young {ey:e}")
            });
            detail += &format!(" ey_rank={k} ey_err={ek:e} ey_best={ey:e}");
        }
        rep.details.push(detail);
    }
    Ok(rep)
}

/// Rank-`k` point with well separated singular values `≈ k, k−1, …, 1`.
pub fn random_svd_point(r: &mut TestRng, n1: usize, n2: usize, k: usize) -> Result<SvdTriple> {
    let q = random_orthonormal(r, n1, k);
    let v = random_orthonormal(r, n2, k);
    let s: Vec<f64> = (0..k).map(|i| (k - i) as f64 + 0.5 * r.gen::<f64>()).collect();
    let m = &q * Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&s)) * v.transpose();
    SvdTriple::from_matrix(&m, k)
}

fn random_shape(r: &mut TestRng) -> (usize, usize, usize) {
    let n1 = r.gen_range(4..=8);
    let n2 = r.gen_range(4..=8);
    (n1, n2, r.gen_range(1..=3))
}

/// Forward-difference Jacobian of the best truncation converges to the
/// tangent projection at first order.
pub fn jacobian_suite(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("jacobian", seed, cases);
    let mut r = rng(seed);
    let hs = [1e-3, 1e-4, 1e-5, 1e-6];
    for case in 0..cases {
        let (n1, n2, k) = random_shape(&mut r);
        let f = random_svd_point(&mut r, n1, n2, k)?;
        let v = random_matrix(&mut r, n1, n2);
        let defects: Vec<f64> = hs.iter().map(|&h| jacobian_defect(&f, &v, h)).collect::<Result<_>>()?;
        let slope = fit_order(&hs, &defects)?.0;
        rep.check(case, slope >= 0.9, || format!("slope {slope:.3} < 0.9 ({defects:?})"));
        rep.details.push(format!("case={case} shape={n1}x{n2} rank={k} slope={slope:.4}"));
    }
    Ok(rep)
}

/// `consistency_gap(Δt/2) / consistency_gap(Δt)` at `Δt = 2^-8`.
pub fn consistency_suite(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("consistency", seed, cases);
    let mut r = rng(seed);
    let dt = 2f64.powi(-8);
    for case in 0..cases {
        let (n1, n2, k) = random_shape(&mut r);
        let f = random_svd_point(&mut r, n1, n2, k)?;
        let v = random_matrix(&mut r, n1, n2);
        let ratio = consistency_gap(&f, &v, dt / 2.0)? / consistency_gap(&f, &v, dt)?;
        rep.check(case, (0.15..=0.35).contains(&ratio), || format!("ratio {ratio:.4}"));
        rep.details.push(format!("case={case} shape={n1}x{n2} rank={k} ratio={ratio:.4}"));
    }
    Ok(rep)
}

/// Directions `v(Δt) = t + Δt^q n` with `q ∈ {0, 1, 2}` and `n` normal to the
/// manifold; the verdicts on both indicators must agree (and must say
/// "bounded" exactly when `q ≥ 1`).
pub fn equivalence_suite(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("prop5-equivalence", seed, cases);
    let mut r = rng(seed);
    let dts: Vec<f64> = (4..=12).map(|j| 2f64.powi(-j)).collect();
    for case in 0..cases {
        let (n1, n2, k) = random_shape(&mut r);
        let f = random_svd_point(&mut r, n1, n2, k)?;
        let tangent = {
            let x = random_matrix(&mut r, n2, k);
            let y = random_matrix(&mut r, n1, k);
            &f.q * x.transpose() + y * f.v.transpose()
        };
        let qp = Matrix::identity(n1, n1) - &f.q * f.q.transpose();
        let vp = Matrix::identity(n2, n2) - &f.v * f.v.transpose();
        let normal = qp * random_matrix(&mut r, n1, n2) * vp * r.gen_range(0.5..2.0);
        let q = r.gen_range(0..=2);
        let rep_c = equivalence_check(&f, |dt| &tangent + &normal * dt.powi(q), &dts)?;
        rep.check(case, rep_c.agree(), || {
            format!("verdicts differ: K bounded {} / M bounded {}", rep_c.k_bounded, rep_c.m_bounded)
        });
        rep.check(case, rep_c.k_bounded == (q >= 1), || format!("q={q} but K bounded = {}", rep_c.k_bounded));
        rep.details.push(format!(
            "case={case} q={q} k_bounded={} m_bounded={} agree={}",
            rep_c.k_bounded,
            rep_c.m_bounded,
            rep_c.agree()
        ));
    }
    Ok(rep)
}

/// DO/BO and SVD-form co-integration of `Ṁ = P(A₁M + MA₂ᵀ + S∘M)` over
/// `[0, 0.1]`, plus the dyadic defect ratio of the first-order SVD update.
pub fn dobo_suite(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("dobo", seed, cases);
    let mut r = rng(seed);
    for case in 0..cases {
        let (n1, n2, _) = random_shape(&mut r);
        let k = r.gen_range(2..=3);
        let f = random_svd_point(&mut r, n1, n2, k)?;
        let a1 = random_matrix(&mut r, n1, n1);
        let a2 = random_matrix(&mut r, n2, n2);
        let sm = random_matrix(&mut r, n1, n2);
        let field = |m: &Matrix| &a1 * m + m * a2.transpose() + sm.component_mul(m);
        let mut dobo = DoboState::from_svd(&f);
        let mut tri = f.clone();
        let mut gap = 0.0f64;
        for _ in 0..10 {
            dobo = rk4_dobo(&dobo, field, 1e-3, 10)?;
            tri = rk4_svd_form(&tri, field, 1e-3, 10)?;
            gap = gap.max((dobo.to_matrix() - tri.to_matrix()).norm());
        }
        rep.check(case, gap <= 1e-6, || format!("trajectory gap {gap:e}"));

        let n = random_matrix(&mut r, n1, n2);
        let defect = |dt: f64| -> Result<f64> {
            let exact = SvdTriple::from_matrix(&(f.to_matrix() + &n * dt), k)?;
            Ok(factor_distance(&svd_perturb_step(&f, &n, dt)?, &exact))
        };
        let dt = 2f64.powi(-7);
        let ratio = defect(dt / 2.0)? / defect(dt)?;
        rep.check(case, (0.2..=0.3).contains(&ratio), || format!("perturbation ratio {ratio:.4}"));
        rep.details.push(format!("case={case} shape={n1}x{n2} rank={k} gap={gap:e} ratio={ratio:.4}"));
    }
    Ok(rep)
}

/// Distance between factor sets after aligning column signs.
pub fn factor_distance(a: &SvdTriple, b: &SvdTriple) -> f64 {
    let mut d = 0.0;
    for j in 0..a.rank() {
        let sign = if a.q.column(j).dot(&b.q.column(j)) < 0.0 { -1.0 } else { 1.0 };
        d += (a.q.column(j) - b.q.column(j) * sign).norm_squared();
        d += (a.v.column(j) - b.v.column(j) * sign).norm_squared();
        d += (a.s[j] - b.s[j]).powi(2);
    }
    d.sqrt()
}
