use std::collections::VecDeque;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use super::schedule::startup_schedule;
use super::steps::midpoint_with_slope;
use super::{
    step_ab_with_slopes, step_euler, step_midpoint, threshold_schedule, SchemeKind, SchemeSpec, StepDiagnostics,
    ThresholdPolicy, Thresholds, TruncMode,
};
use crate::error::{Error, Result};
use crate::htucker::HTensor;
use crate::operators::KronSumOperator;

pub const CSV_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "k,t,max_rank,ranks,eps_alpha,eps_beta,eps_gamma,trunc_err_est,mass,err_l2,wall_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub ranks: Vec<usize>,
    pub max_rank: usize,
    pub thresholds: Thresholds,
    /// Estimate of the final (solution) truncation error; this is the
    /// `trunc_err_est` CSV column.
    pub err_alpha: f64,
    pub err_beta: f64,
    pub err_gamma: Vec<f64>,
    pub mass: f64,
    pub err_l2: Option<f64>,
    pub wall_ms: f64,
    /// Whether the step was a start-up step of a multistep scheme.
    pub startup: bool,
}

impl StepRecord {
    pub fn compliant(&self) -> bool {
        StepDiagnostics {
            thresholds: self.thresholds.clone(),
            err_alpha: self.err_alpha,
            err_beta: self.err_beta,
            err_gamma: self.err_gamma.clone(),
        }
        .compliant()
    }

    pub fn csv_line(&self) -> String {
        let join = |v: &[String]| v.join(";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.t,
            self.max_rank,
            join(&self.ranks.iter().map(|r| r.to_string()).collect::<Vec<_>>()),
            self.thresholds.alpha,
            self.thresholds.beta,
            join(&self.thresholds.gamma.iter().map(|g| g.to_string()).collect::<Vec<_>>()),
            self.err_alpha,
            self.mass,
            self.err_l2.map(|e| e.to_string()).unwrap_or_default(),
            self.wall_ms,
        )
    }
}

pub trait StepSink {
    fn record(&mut self, rec: &StepRecord) -> Result<()>;
}

impl StepSink for Vec<StepRecord> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards records.
impl StepSink for () {
    fn record(&mut self, _: &StepRecord) -> Result<()> {
        Ok(())
    }
}

/// Writes records as CSV behind a versioned comment line.
pub struct CsvRecorder<W: Write> {
    out: W,
}

impl<W: Write> CsvRecorder<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "# htstep steps v{CSV_VERSION}")?;
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> StepSink for CsvRecorder<W> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        writeln!(self.out, "{}", rec.csv_line())?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub mode: TruncMode,
    /// Record wall times as zero so repeated runs produce identical output.
    pub deterministic: bool,
    /// Write the state every `stride` steps into `dir` as `state_<k>.htk`.
    pub checkpoint: Option<(usize, PathBuf)>,
    /// Volume of one grid cell; masses are `cell_volume · Σ f`.
    pub cell_volume: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            mode: TruncMode::Adaptive,
            deterministic: false,
            checkpoint: None,
            cell_volume: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Integration {
    pub final_state: HTensor,
    pub records: Vec<StepRecord>,
}

/// Number of steps `T/Δt`, which must be an integer.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Config(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
        return Err(Error::Config(format!("T = {t_final} is not an integer multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

fn mass(h: &HTensor, cell_volume: f64) -> Result<f64> {
    let ones: Vec<Vec<f64>> = h.dims().iter().map(|&n| vec![1.0; n]).collect();
    let refs: Vec<&[f64]> = ones.iter().map(|v| v.as_slice()).collect();
    Ok(cell_volume * h.weighted_sum(&refs)?)
}

/// Runs `T/Δt` steps of `scheme` from `f0`. `observe(k, t, f_k)` may return
/// an L² error against a reference, which is stored in the record.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    op: &KronSumOperator,
    f0: &HTensor,
    scheme: &SchemeSpec,
    dt: f64,
    t_final: f64,
    policy: &ThresholdPolicy,
    opts: &IntegrateOptions,
    sink: &mut dyn StepSink,
    mut observe: Option<&mut dyn FnMut(usize, f64, &HTensor) -> Result<Option<f64>>>,
) -> Result<Integration> {
    let steps = step_count(t_final, dt)?;
    let th = threshold_schedule(scheme, dt, policy)?;
    let th_start = match scheme.kind {
        SchemeKind::AdamsBashforth(s) if s > 1 => Some(startup_schedule(dt, policy)?),
        _ => None,
    };
    if let Some((stride, dir)) = &opts.checkpoint {
        if *stride == 0 {
            return Err(Error::Config("checkpoint stride must be positive".into()));
        }
        std::fs::create_dir_all(dir)?;
    }
    let mut records = Vec::with_capacity(steps + 1);
    let mut emit = |rec: StepRecord, records: &mut Vec<StepRecord>| -> Result<()> {
        sink.record(&rec)?;
        records.push(rec);
        Ok(())
    };

    let mut f = f0.clone();
    let err0 = match observe.as_mut() {
        Some(obs) => obs(0, 0.0, &f)?,
        None => None,
    };
    emit(
        StepRecord {
            k: 0,
            t: 0.0,
            ranks: f.ranks(),
            max_rank: f.max_rank(),
            thresholds: th.clone(),
            err_alpha: 0.0,
            err_beta: 0.0,
            err_gamma: vec![0.0; th.gamma.len()],
            mass: mass(&f, opts.cell_volume)?,
            err_l2: err0,
            wall_ms: 0.0,
            startup: false,
        },
        &mut records,
    )?;

    // raw slopes N f_{k-j}, newest first
    let mut slopes: VecDeque<HTensor> = VecDeque::new();
    for k in 1..=steps {
        let clock = Instant::now();
        let (next, diag, startup) = match scheme.kind {
            SchemeKind::Euler => {
                let (n, d) = step_euler(&f, op, dt, &th, &opts.mode)?;
                (n, d, false)
            }
            SchemeKind::Midpoint => {
                let (n, d) = step_midpoint(&f, op, dt, &th, &opts.mode)?;
                (n, d, false)
            }
            SchemeKind::AdamsBashforth(s) => {
                slopes.push_front(op.apply_ht(&f)?);
                slopes.truncate(s);
                if slopes.len() < s {
                    let ths = th_start.as_ref().expect("start-up thresholds exist for s > 1");
                    let (n, d) = midpoint_with_slope(&f, &slopes[0], op, dt, ths, &opts.mode)?;
                    (n, d, true)
                } else {
                    let sl: Vec<HTensor> = slopes.iter().cloned().collect();
                    let (n, d) = step_ab_with_slopes(&f, &sl, dt, &th, &scheme.weights, &opts.mode)?;
                    (n, d, false)
                }
            }
        };
        let elapsed = clock.elapsed().as_secs_f64() * 1e3;
        let norm = next.norm();
        if !norm.is_finite() {
            return Err(Error::Numerical(format!(
                "state became non-finite at step {k} (t = {})",
                k as f64 * dt
            )));
        }
        f = next;
        let t = k as f64 * dt;
        let err_l2 = match observe.as_mut() {
            Some(obs) => obs(k, t, &f)?,
            None => None,
        };
        if let Some((stride, dir)) = &opts.checkpoint {
            if k % stride == 0 || k == steps {
                let file = std::fs::File::create(dir.join(format!("state_{k:08}.htk")))?;
                f.write_to(std::io::BufWriter::new(file))?;
            }
        }
        emit(
            StepRecord {
                k,
                t,
                ranks: f.ranks(),
                max_rank: f.max_rank(),
                thresholds: diag.thresholds,
                err_alpha: diag.err_alpha,
                err_beta: diag.err_beta,
                err_gamma: diag.err_gamma,
                mass: mass(&f, opts.cell_volume)?,
                err_l2,
                wall_ms: if opts.deterministic { 0.0 } else { elapsed },
                startup,
            },
            &mut records,
        )?;
    }
    Ok(Integration {
        final_state: f,
        records,
    })
}

/// Least-squares fit `log e = slope · log Δt + c`; returns `(slope, c)`.
pub fn fit_order(dts: &[f64], errs: &[f64]) -> Result<(f64, f64)> {
    if dts.len() != errs.len() || dts.len() < 2 {
        return Err(Error::InvalidInput("need at least two (dt, error) pairs".into()));
    }
    if dts.iter().chain(errs).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Numerical("order fit needs positive finite data".into()));
    }
    let xs: Vec<f64> = dts.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
