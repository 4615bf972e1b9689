//! Convergence studies and the diagnostics reported for them.

use std::f64::consts::PI;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fokker_planck::FpProblem;
use crate::htucker::HTensor;
use crate::integrators::{fit_order, integrate, step_count, IntegrateOptions, SchemeSpec, StepRecord, ThresholdPolicy};
use crate::reference::integrate_rk4;
use crate::spectral::PeriodicGrid;
use crate::tensor::DenseTensor;

/// Dense RK4 solution of `problem` at `t_final`.
pub fn dense_reference(problem: &FpProblem, dt: f64, t_final: f64) -> Result<DenseTensor> {
    let steps = step_count(t_final, dt)?;
    integrate_rk4(&problem.operator, &problem.f0.to_dense()?, dt, steps, |_, _, _| Ok(()))
}

/// `‖h − reference‖_{L²}` on the grid.
pub fn l2_distance(grid: &PeriodicGrid, h: &HTensor, reference: &DenseTensor) -> Result<f64> {
    let diff = DenseTensor::linear_combine(1.0, &h.to_dense()?, -1.0, reference)?;
    Ok(grid.l2_factor(reference.order()) * diff.norm())
}

/// Allowed mass drift after `k` steps: `k (ε_α + Δt ε_β) (2π/n)^{d/2}`.
pub fn mass_bound(rec: &StepRecord, dt: f64, n: usize, d: usize) -> f64 {
    rec.k as f64 * (rec.thresholds.alpha + dt * rec.thresholds.beta) * (2.0 * PI / n as f64).powf(d as f64 / 2.0)
}

/// Slack for rounding in the mass of the normalized initial condition.
pub const MASS_ROUNDING: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct PointResult {
    pub dt: f64,
    /// L² error at the final time, or why the run stopped.
    pub outcome: std::result::Result<f64, String>,
    pub max_rank: usize,
    pub steps: usize,
    /// Steps whose truncation error estimate exceeded its tolerance.
    pub threshold_violations: usize,
    /// Steps whose mass drift exceeded [`mass_bound`].
    pub mass_violations: usize,
    pub max_mass_drift: f64,
    pub wall_s: f64,
    pub records: Vec<StepRecord>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub scheme: String,
    pub order: usize,
    pub points: Vec<PointResult>,
}

impl ConvergenceStudy {
    pub fn completed(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.outcome.as_ref().ok().map(|e| (p.dt, *e)))
    }

    pub fn all_completed(&self) -> bool {
        self.points.iter().all(|p| p.outcome.is_ok())
    }

    /// Least-squares log-log slope over the completed points.
    pub fn slope(&self) -> Option<f64> {
        let (dts, errs): (Vec<f64>, Vec<f64>) = self.completed().unzip();
        fit_order(&dts, &errs).ok().map(|(s, _)| s)
    }

    /// `max_i e_i / Δt_i^p` over the completed points.
    pub fn q_hat(&self) -> Option<f64> {
        self.completed().map(|(dt, e)| e / dt.powi(self.order as i32)).reduce(f64::max)
    }
}

/// One adaptive run per `Δt`, each compared against `reference` at
/// `t_final`. Runs that blow up are recorded as failed points.
pub fn convergence_study(
    problem: &FpProblem,
    scheme: &SchemeSpec,
    policy: &ThresholdPolicy,
    dts: &[f64],
    t_final: f64,
    reference: &DenseTensor,
    opts: &IntegrateOptions,
) -> Result<ConvergenceStudy> {
    let d = problem.d();
    let n = problem.grid.n();
    let mut opts = opts.clone();
    opts.cell_volume = problem.grid.cell_volume(d);
    let mut points = Vec::with_capacity(dts.len());
    for &dt in dts {
        let clock = Instant::now();
        let mut records: Vec<StepRecord> = Vec::new();
        let run = integrate(&problem.operator, &problem.f0, scheme, dt, t_final, policy, &opts, &mut records, None);
        let outcome = match run {
            Ok(res) => Ok(l2_distance(&problem.grid, &res.final_state, reference)?),
            Err(Error::Numerical(msg)) => Err(msg),
            Err(e) => return Err(e),
        };
        let mut mass_violations = 0;
        let mut max_mass_drift = 0.0f64;
        for r in &records {
            let drift = (r.mass - 1.0).abs();
            max_mass_drift = max_mass_drift.max(drift);
            if !(drift <= mass_bound(r, dt, n, d) + MASS_ROUNDING) {
                mass_violations += 1;
            }
        }
        points.push(PointResult {
            dt,
            outcome,
            max_rank: records.iter().map(|r| r.max_rank).max().unwrap_or(0),
            steps: records.len().saturating_sub(1),
            threshold_violations: records.iter().filter(|r| !r.compliant()).count(),
            mass_violations,
            max_mass_drift,
            wall_s: clock.elapsed().as_secs_f64(),
            records,
        });
    }
    Ok(ConvergenceStudy {
        scheme: scheme.name(),
        order: scheme.order,
        points,
    })
}
