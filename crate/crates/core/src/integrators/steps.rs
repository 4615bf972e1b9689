use super::Thresholds;
use crate::error::{invalid, Result};
use crate::htucker::{HTensor, TruncationControl};
use crate::operators::KronSumOperator;

/// How the truncations inside a step are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum TruncMode {
    /// Every truncation meets its scheduled tolerance with the smallest ranks.
    Adaptive,
    /// Inner truncations are skipped and the new state is clipped to these
    /// per-node rank caps.
    FixedRank(Vec<usize>),
}

/// Error estimates of the truncations made in one step, next to the
/// tolerances they were asked to meet.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub thresholds: Thresholds,
    pub err_alpha: f64,
    pub err_beta: f64,
    pub err_gamma: Vec<f64>,
}

impl StepDiagnostics {
    /// Whether every estimate is within its tolerance.
    pub fn compliant(&self) -> bool {
        self.err_alpha <= self.thresholds.alpha
            && self.err_beta <= self.thresholds.beta
            && self.err_gamma.iter().zip(&self.thresholds.gamma).all(|(e, t)| e <= t)
    }
}

fn trunc(x: &HTensor, eps: f64, mode: &TruncMode, outer: bool) -> Result<(HTensor, f64)> {
    let ctrl = match mode {
        TruncMode::Adaptive => TruncationControl::Tolerance(eps),
        TruncMode::FixedRank(caps) if outer => TruncationControl::FixedRank(caps.clone()),
        TruncMode::FixedRank(_) => return Ok((x.clone(), 0.0)),
    };
    let t = x.truncate(&ctrl)?;
    Ok((t.tensor, t.err_est))
}

/// `T_α(f + Δt · incr)` where `incr` has already been truncated.
fn finish(f: &HTensor, dt: f64, incr: &HTensor, eps: f64, mode: &TruncMode) -> Result<(HTensor, f64)> {
    let a = HTensor::linear_combine(1.0, f, dt, incr)?;
    trunc(&a, eps, mode, true)
}

/// `f_{k+1} = T_α(f_k + Δt T_β(N f_k))`.
pub fn step_euler(
    f: &HTensor,
    op: &KronSumOperator,
    dt: f64,
    th: &Thresholds,
    mode: &TruncMode,
) -> Result<(HTensor, StepDiagnostics)> {
    let (s, err_beta) = trunc(&op.apply_ht(f)?, th.beta, mode, false)?;
    let (next, err_alpha) = finish(f, dt, &s, th.alpha, mode)?;
    Ok((
        next,
        StepDiagnostics {
            thresholds: th.clone(),
            err_alpha,
            err_beta,
            err_gamma: Vec::new(),
        },
    ))
}

/// `f_{k+1} = T_α(f_k + Δt T_β(N(f_k + Δt/2 T_γ(N f_k))))`.
pub fn step_midpoint(
    f: &HTensor,
    op: &KronSumOperator,
    dt: f64,
    th: &Thresholds,
    mode: &TruncMode,
) -> Result<(HTensor, StepDiagnostics)> {
    midpoint_with_slope(f, &op.apply_ht(f)?, op, dt, th, mode)
}

pub(crate) fn midpoint_with_slope(
    f: &HTensor,
    slope: &HTensor,
    op: &KronSumOperator,
    dt: f64,
    th: &Thresholds,
    mode: &TruncMode,
) -> Result<(HTensor, StepDiagnostics)> {
    let eps_gamma = *th.gamma.first().ok_or_else(|| invalid("midpoint needs an inner tolerance"))?;
    let (g, err_gamma) = trunc(slope, eps_gamma, mode, false)?;
    let half = HTensor::linear_combine(1.0, f, dt / 2.0, &g)?;
    let (b, err_beta) = trunc(&op.apply_ht(&half)?, th.beta, mode, false)?;
    let (next, err_alpha) = finish(f, dt, &b, th.alpha, mode)?;
    Ok((
        next,
        StepDiagnostics {
            thresholds: th.clone(),
            err_alpha,
            err_beta,
            err_gamma: vec![err_gamma],
        },
    ))
}

/// `f_{k+1} = T_α(f_k + Δt T_β(Σ_j b_j T_γ(j)(N f_{k−j})))` from the states
/// `f_k, f_{k−1}, ...` (newest first).
pub fn step_ab(
    history: &[HTensor],
    op: &KronSumOperator,
    dt: f64,
    th: &Thresholds,
    weights: &[f64],
    mode: &TruncMode,
) -> Result<(HTensor, StepDiagnostics)> {
    if history.len() < weights.len() {
        return Err(invalid(format!(
            "AB{} needs {} past states, got {}",
            weights.len(),
            weights.len(),
            history.len()
        )));
    }
    let slopes = history[..weights.len()]
        .iter()
        .map(|h| op.apply_ht(h))
        .collect::<Result<Vec<_>>>()?;
    step_ab_with_slopes(&history[0], &slopes, dt, th, weights, mode)
}

/// Same as [`step_ab`] with the raw slopes `N f_{k−j}` supplied (newest first).
pub fn step_ab_with_slopes(
    f: &HTensor,
    slopes: &[HTensor],
    dt: f64,
    th: &Thresholds,
    weights: &[f64],
    mode: &TruncMode,
) -> Result<(HTensor, StepDiagnostics)> {
    let s = weights.len();
    if slopes.len() < s || th.gamma.len() != s {
        return Err(invalid(format!("AB{s} needs {s} slopes and {s} inner tolerances")));
    }
    let mut truncated = Vec::with_capacity(s);
    let mut err_gamma = Vec::with_capacity(s);
    for (slope, eps) in slopes.iter().zip(&th.gamma) {
        let (t, e) = trunc(slope, *eps, mode, false)?;
        truncated.push(t);
        err_gamma.push(e);
    }
    let terms: Vec<(f64, &HTensor)> = weights.iter().copied().zip(truncated.iter()).collect();
    let (b, err_beta) = trunc(&HTensor::sum(&terms)?, th.beta, mode, false)?;
    let (next, err_alpha) = finish(f, dt, &b, th.alpha, mode)?;
    Ok((
        next,
        StepDiagnostics {
            thresholds: th.clone(),
            err_alpha,
            err_beta,
            err_gamma,
        },
    ))
}
