//! Command-line front end: `run`, `convergence`, `reference`, `proptest` and
//! `truncate`.
//!
//! Exit codes: 0 success, 1 I/O or failed property suite, 2 configuration
//! error, 3 numerical failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{convergence_study, dense_reference, l2_distance};
use crate::fokker_planck::{ic_2d, ic_4d, DriftFn, DriftSpec, FpProblem};
use crate::htucker::{HTensor, TreeShape, TruncationControl};
use crate::integrators::{
    integrate, step_count, CsvRecorder, IntegrateOptions, SchemeKind, SchemeSpec, StepSink, ThresholdPolicy, TruncMode,
};
use crate::reference::{persist_trajectory, rk4_step};
use crate::suites::run_suite;
use crate::tensor::DenseTensor;

#[derive(Parser, Debug)]
#[command(name = "htstep", version, about = "Rank-adaptive step-truncation integrators in hierarchical Tucker format")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration and write the step CSV, final state and summary.
    Run(ConfigArgs),
    /// Run several step sizes against a shared dense reference and fit the order.
    Convergence {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated step sizes (at least three).
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Also compute the reference at half its step and report the difference.
        #[arg(long)]
        check_reference: bool,
    },
    /// Write a dense RK4 trajectory for later `--reference from-file` runs.
    Reference {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run a randomized property suite and print a machine-readable report.
    Proptest {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Print one line per case.
        #[arg(long)]
        verbose: bool,
    },
    /// Truncate a tensor container file.
    Truncate {
        input: PathBuf,
        output: PathBuf,
        /// Absolute Frobenius tolerance (relative with `--relative`).
        #[arg(long, conflicts_with = "rank")]
        tol: Option<f64>,
        /// Uniform rank cap.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        relative: bool,
    },
}

/// Flags that override the configuration file.
#[derive(Args, Debug, Default, Clone)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// balanced | linear
    #[arg(long)]
    tree: Option<String>,
    /// euler | midpoint | abN
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long)]
    m1: Option<f64>,
    #[arg(long)]
    m2: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    /// adaptive | fixed-rank
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    rank_cap: Option<usize>,
    /// none | co-run | from-file
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    reference_dir: Option<PathBuf>,
    #[arg(long)]
    reference_dt: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    checkpoint_stride: Option<usize>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Write zero wall times so repeated runs give identical files.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    seed: Option<u64>,
}

/// Custom problem in place of a preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    pub d: usize,
    pub n: usize,
    pub gamma: DriftInput,
    pub xi: DriftInput,
    pub phi: DriftInput,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Number of product pairs in the 4D initial condition.
    pub ic_terms: Option<usize>,
    /// Initial state as a tensor container; required unless `d ∈ {2, 4}`.
    pub initial: Option<PathBuf>,
}

/// A built-in function name or `n` samples on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftInput {
    Named(String),
    Samples(Vec<f64>),
}

impl Default for DriftInput {
    fn default() -> Self {
        DriftInput::Named("zero".into())
    }
}

impl DriftInput {
    fn resolve(&self) -> Result<DriftFn> {
        match self {
            DriftInput::Named(s) => s.parse::<DriftFn>().map_err(config_err),
            DriftInput::Samples(v) => Ok(DriftFn::Tabulated(v.clone())),
        }
    }
}

fn default_sigma() -> f64 {
    2.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub state: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub checkpoint_stride: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

/// Schema of the TOML configuration file. Every field is optional; flags
/// given on the command line take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub problem: Option<CustomProblem>,
    pub n: Option<usize>,
    pub tree: Option<String>,
    pub scheme: Option<String>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub policy: Option<ThresholdPolicy>,
    pub mode: Option<String>,
    pub rank_cap: Option<usize>,
    pub reference: Option<String>,
    pub reference_dir: Option<PathBuf>,
    pub reference_dt: Option<f64>,
    pub deterministic: Option<bool>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferencePolicy {
    None,
    CoRun,
    FromFile,
}

impl std::str::FromStr for ReferencePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "co-run" => Ok(Self::CoRun),
            "from-file" => Ok(Self::FromFile),
            other => Err(Error::Config(format!("unknown reference policy `{other}`"))),
        }
    }
}

/// A validated configuration.
pub struct Resolved {
    pub problem: FpProblem,
    pub scheme: SchemeSpec,
    pub dt: f64,
    pub t_final: f64,
    pub policy: ThresholdPolicy,
    pub opts: IntegrateOptions,
    pub reference: ReferencePolicy,
    pub reference_dir: Option<PathBuf>,
    pub reference_dt: Option<f64>,
    pub output: OutputConfig,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::Config(m),
        other => other,
    }
}

fn overlay(mut cfg: RunConfig, a: &ConfigArgs) -> RunConfig {
    macro_rules! take {
        ($($f:ident),*) => { $( if a.$f.is_some() { cfg.$f = a.$f.clone(); } )* };
    }
    take!(preset, n, tree, scheme, dt, t_final, mode, rank_cap, reference, reference_dir, reference_dt, seed);
    if a.deterministic {
        cfg.deterministic = Some(true);
    }
    let o = &mut cfg.output;
    if a.csv.is_some() {
        o.csv = a.csv.clone();
    }
    if a.state.is_some() {
        o.state = a.state.clone();
    }
    if a.summary.is_some() {
        o.summary = a.summary.clone();
    }
    if a.checkpoint_stride.is_some() {
        o.checkpoint_stride = a.checkpoint_stride;
    }
    if a.checkpoint_dir.is_some() {
        o.checkpoint_dir = a.checkpoint_dir.clone();
    }
    cfg
}

fn apply_constant_flags(policy: &mut ThresholdPolicy, a: &ConfigArgs) -> Result<()> {
    let unused = |name: &str, v: Option<f64>| match v {
        Some(_) => Err(Error::Config(format!("--{name} does not apply to this scheme"))),
        None => Ok(()),
    };
    match policy {
        ThresholdPolicy::Euler { m1, m2 } => {
            *m1 = a.m1.unwrap_or(*m1);
            *m2 = a.m2.unwrap_or(*m2);
            unused("a", a.a)?;
            unused("b", a.b)?;
            unused("g", a.g)?;
        }
        ThresholdPolicy::Midpoint(c) => {
            c.a = a.a.unwrap_or(c.a);
            c.b = a.b.unwrap_or(c.b);
            c.g = a.g.unwrap_or(c.g);
            unused("m1", a.m1)?;
            unused("m2", a.m2)?;
        }
        ThresholdPolicy::AdamsBashforth { a: ca, b: cb, g, .. } => {
            *ca = a.a.unwrap_or(*ca);
            *cb = a.b.unwrap_or(*cb);
            if let Some(v) = a.g {
                g.iter_mut().for_each(|x| *x = v);
            }
            unused("m1", a.m1)?;
            unused("m2", a.m2)?;
        }
    }
    Ok(())
}

fn policy_matches(policy: &ThresholdPolicy, scheme: &SchemeSpec) -> bool {
    match (policy, scheme.kind) {
        (ThresholdPolicy::Euler { .. }, SchemeKind::Euler) => true,
        (ThresholdPolicy::Midpoint(_), SchemeKind::Midpoint) => true,
        (ThresholdPolicy::AdamsBashforth { g, .. }, SchemeKind::AdamsBashforth(s)) => g.len() == s,
        _ => false,
    }
}

fn build_problem(cfg: &RunConfig, shape: TreeShape) -> Result<FpProblem> {
    match (&cfg.preset, &cfg.problem) {
        (Some(_), Some(_)) => Err(Error::Config("give either a preset or a [problem] table, not both".into())),
        (None, None) => Err(Error::Config("no problem: set `preset` or a [problem] table".into())),
        (Some(name), None) => FpProblem::preset(name, cfg.n, shape).map_err(config_err),
        (None, Some(p)) => {
            let n = cfg.n.unwrap_or(p.n);
            let drift = DriftSpec {
                gamma: p.gamma.resolve()?,
                xi: p.xi.resolve()?,
                phi: p.phi.resolve()?,
                sigma: p.sigma,
            };
            let f0 = match (&p.initial, p.d) {
                (Some(path), _) => {
                    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    HTensor::read_from(BufReader::new(file))?
                }
                (None, 2) => ic_2d(n, shape).map_err(config_err)?,
                (None, 4) => ic_4d(n, p.ic_terms.unwrap_or(10), shape).map_err(config_err)?,
                (None, d) => return Err(Error::Config(format!("d = {d} needs an `initial` state file"))),
            };
            FpProblem::new("custom", p.d, n, drift, f0).map_err(config_err)
        }
    }
}

/// Merges the file and the flags and validates the result.
fn resolve(a: &ConfigArgs) -> Result<Resolved> {
    let base = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    resolve_config(overlay(base, a), a)
}

pub fn resolve_run_config(cfg: RunConfig) -> Result<Resolved> {
    resolve_config(cfg, &ConfigArgs::default())
}

fn resolve_config(cfg: RunConfig, a: &ConfigArgs) -> Result<Resolved> {
    let shape: TreeShape = cfg.tree.as_deref().unwrap_or("balanced").parse().map_err(config_err)?;
    let scheme: SchemeSpec = cfg.scheme.as_deref().unwrap_or("euler").parse().map_err(config_err)?;
    let dt = cfg.dt.ok_or_else(|| Error::Config("missing `dt`".into()))?;
    let t_final = cfg.t_final.ok_or_else(|| Error::Config("missing `t_final`".into()))?;
    step_count(t_final, dt)?;
    let mut policy = cfg.policy.clone().unwrap_or_else(|| ThresholdPolicy::paper_small(&scheme));
    if !policy_matches(&policy, &scheme) {
        return Err(Error::Config(format!("threshold policy does not match scheme {}", scheme.name())));
    }
    apply_constant_flags(&mut policy, a)?;
    policy.validate()?;
    let problem = build_problem(&cfg, shape)?;
    let mode = match cfg.mode.as_deref().unwrap_or("adaptive") {
        "adaptive" => TruncMode::Adaptive,
        "fixed-rank" => {
            let cap = cfg.rank_cap.ok_or_else(|| Error::Config("fixed-rank mode needs `rank_cap`".into()))?;
            if cap == 0 {
                return Err(Error::Config("rank_cap must be >= 1".into()));
            }
            TruncMode::FixedRank(vec![cap; problem.f0.tree().len()])
        }
        other => return Err(Error::Config(format!("unknown mode `{other}`"))),
    };
    let reference: ReferencePolicy = cfg.reference.as_deref().unwrap_or("none").parse()?;
    if reference == ReferencePolicy::FromFile && cfg.reference_dir.is_none() {
        return Err(Error::Config("from-file reference needs `reference_dir`".into()));
    }
    if let Some(rdt) = cfg.reference_dt {
        if !(rdt > 0.0) {
            return Err(Error::Config("reference_dt must be positive".into()));
        }
    }
    let checkpoint = match (cfg.output.checkpoint_stride, &cfg.output.checkpoint_dir) {
        (Some(0), _) => return Err(Error::Config("checkpoint_stride must be positive".into())),
        (Some(k), Some(dir)) => Some((k, dir.clone())),
        (Some(_), None) => return Err(Error::Config("checkpoint_stride needs checkpoint_dir".into())),
        (None, _) => None,
    };
    let d = problem.d();
    let opts = IntegrateOptions {
        mode,
        deterministic: cfg.deterministic.unwrap_or(false),
        checkpoint,
        cell_volume: problem.grid.cell_volume(d),
    };
    Ok(Resolved {
        problem,
        scheme,
        dt,
        t_final,
        policy,
        opts,
        reference,
        reference_dir: cfg.reference_dir.clone(),
        reference_dt: cfg.reference_dt,
        output: cfg.output.clone(),
    })
}

#[derive(Debug, Serialize)]
struct Summary {
    problem: String,
    scheme: String,
    dt: f64,
    t_final: f64,
    steps: usize,
    final_error: Option<f64>,
    max_rank: usize,
    final_ranks: Vec<usize>,
    final_mass: f64,
    threshold_violations: usize,
    state_bytes: usize,
    dense_bytes: usize,
    wall_s: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct ReferenceMeta {
    dt: f64,
    steps: usize,
    stride: usize,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

struct Tee<'a> {
    csv: Option<CsvRecorder<BufWriter<File>>>,
    records: &'a mut Vec<crate::integrators::StepRecord>,
}

impl StepSink for Tee<'_> {
    fn record(&mut self, rec: &crate::integrators::StepRecord) -> Result<()> {
        if let Some(c) = self.csv.as_mut() {
            c.record(rec)?;
        }
        self.records.push(rec.clone());
        Ok(())
    }
}

fn cmd_run(a: &ConfigArgs, out: &mut dyn Write) -> Result<()> {
    let r = resolve(a)?;
    let p = &r.problem;
    let clock = Instant::now();
    let mut records = Vec::new();
    let mut sink = Tee {
        csv: match &r.output.csv {
            Some(path) => Some(CsvRecorder::new(create(path)?)?),
            None => None,
        },
        records: &mut records,
    };

    let mut dense_ref: Option<DenseTensor> = None;
    match r.reference {
        ReferencePolicy::CoRun => dense_ref = Some(p.f0.to_dense()?),
        ReferencePolicy::FromFile => {
            let dir = r.reference_dir.as_ref().expect("checked in resolve");
            let meta_path = dir.join("meta.toml");
            if meta_path.exists() {
                let m: ReferenceMeta = toml::from_str(&std::fs::read_to_string(&meta_path)?)
                    .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
                if (m.dt - r.dt).abs() > 1e-12 * r.dt {
                    return Err(Error::Config(format!("reference was written with dt = {}, run uses {}", m.dt, r.dt)));
                }
            }
        }
        ReferencePolicy::None => {}
    }
    let grid = p.grid.clone();
    let op = &p.operator;
    let dt = r.dt;
    let ref_dir = r.reference_dir.clone();
    let policy = r.reference;
    let mut observe = |k: usize, _t: f64, f: &HTensor| -> Result<Option<f64>> {
        match policy {
            ReferencePolicy::None => Ok(None),
            ReferencePolicy::CoRun => {
                let cur = dense_ref.as_mut().expect("co-run state");
                if k > 0 {
                    *cur = rk4_step(op, cur, dt)?;
                }
                Ok(Some(l2_distance(&grid, f, cur)?))
            }
            ReferencePolicy::FromFile => {
                let path = ref_dir.as_ref().expect("checked").join(format!("ref_{k:08}.bin"));
                if !path.exists() {
                    return Ok(None);
                }
                let t = DenseTensor::read_binary(BufReader::new(File::open(&path)?))?;
                Ok(Some(l2_distance(&grid, f, &t)?))
            }
        }
    };
    let observe_ref: Option<&mut dyn FnMut(usize, f64, &HTensor) -> Result<Option<f64>>> =
        if r.reference == ReferencePolicy::None { None } else { Some(&mut observe) };
    let res = integrate(op, &p.f0, &r.scheme, r.dt, r.t_final, &r.policy, &r.opts, &mut sink, observe_ref);
    if let Some(c) = sink.csv.take() {
        c.into_inner().flush()?;
    }
    let res = res?;
    let wall = if r.opts.deterministic { 0.0 } else { clock.elapsed().as_secs_f64() };

    if let Some(path) = &r.output.state {
        let mut w = create(path)?;
        res.final_state.write_to(&mut w)?;
        w.flush()?;
    }
    let last = records.last().expect("k = 0 record");
    let summary = Summary {
        problem: p.name.clone(),
        scheme: r.scheme.name(),
        dt: r.dt,
        t_final: r.t_final,
        steps: last.k,
        final_error: last.err_l2,
        max_rank: records.iter().map(|x| x.max_rank).max().unwrap_or(0),
        final_ranks: last.ranks.clone(),
        final_mass: last.mass,
        threshold_violations: records.iter().filter(|x| !x.compliant()).count(),
        state_bytes: res.final_state.serialized_len(),
        dense_bytes: 8 * res.final_state.dims().iter().product::<usize>(),
        wall_s: wall,
    };
    let text = toml::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(path) = &r.output.summary {
        let mut w = create(path)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_convergence(a: &ConfigArgs, dts: &[f64], table: Option<&Path>, check: bool, out: &mut dyn Write) -> Result<bool> {
    if dts.len() < 3 {
        return Err(Error::Config("convergence needs at least three step sizes".into()));
    }
    let r = resolve(a)?;
    for &dt in dts {
        step_count(r.t_final, dt)?;
    }
    let dt_min = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let ref_dt = r.reference_dt.unwrap_or(dt_min / 5.0);
    let reference = dense_reference(&r.problem, ref_dt, r.t_final)?;
    let mut text = String::new();
    text += &format!(
        "# htstep convergence v1 problem={} scheme={} t_final={} reference_dt={ref_dt}\n",
        r.problem.name,
        r.scheme.name(),
        r.t_final
    );
    if check {
        let half = dense_reference(&r.problem, ref_dt / 2.0, r.t_final)?;
        let diff = r.problem.l2_norm_dense(&DenseTensor::linear_combine(1.0, &reference, -1.0, &half)?);
        text += &format!("# reference_halving_difference={diff:e}\n");
    }
    let study = convergence_study(&r.problem, &r.scheme, &r.policy, dts, r.t_final, &reference, &r.opts)?;
    text += "dt,error,max_rank,steps,threshold_violations,mass_violations,status\n";
    for p in &study.points {
        let (err, status) = match &p.outcome {
            Ok(e) => (e.to_string(), "ok".to_string()),
            Err(m) => (String::new(), format!("failed: {}", m.replace(',', ";"))),
        };
        text += &format!(
            "{},{err},{},{},{},{},{status}\n",
            p.dt, p.max_rank, p.steps, p.threshold_violations, p.mass_violations
        );
    }
    let show = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into());
    text += &format!("# slope={}\n# q_hat={}\n", show(study.slope()), show(study.q_hat()));
    match table {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            out.write_all(text.as_bytes())?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(study.all_completed())
}

fn cmd_reference(a: &ConfigArgs, stride: usize, dir: &Path) -> Result<()> {
    let r = resolve(a)?;
    let dt = r.reference_dt.unwrap_or(r.dt);
    let steps = step_count(r.t_final, dt)?;
    persist_trajectory(&r.problem.operator, &r.problem.f0.to_dense()?, dt, steps, stride, dir)?;
    let meta = ReferenceMeta { dt, steps, stride };
    std::fs::write(dir.join("meta.toml"), toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(())
}

fn cmd_truncate(
    input: &Path,
    output: &Path,
    tol: Option<f64>,
    rank: Option<usize>,
    relative: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let h = HTensor::read_from(BufReader::new(File::open(input)?))?;
    let ctrl = match (tol, rank) {
        (Some(t), None) => TruncationControl::Tolerance(if relative { t * h.norm() } else { t }),
        (None, Some(k)) if k > 0 => TruncationControl::uniform_rank(h.tree(), k),
        (None, Some(_)) => return Err(Error::Config("--rank must be >= 1".into())),
        _ => return Err(Error::Config("give exactly one of --tol and --rank".into())),
    };
    let tr = h.truncate(&ctrl).map_err(config_err)?;
    let mut w = create(output)?;
    tr.tensor.write_to(&mut w)?;
    w.flush()?;
    let ranks: Vec<String> = tr.ranks.iter().map(|r| r.to_string()).collect();
    writeln!(out, "ranks={} err_est={:e} bytes={}", ranks.join(";"), tr.err_est, tr.tensor.serialized_len())?;
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::BudgetExceeded { .. }
        | Error::TreeMismatch => 2,
        Error::Numerical(_) | Error::Timeout { .. } | Error::DegenerateSpectrum { .. } | Error::IllConditioned { .. } => 3,
        Error::Io(_) | Error::Format(_) => 1,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.cmd {
        Command::Run(a) => cmd_run(a, &mut out).map(|_| 0),
        Command::Convergence {
            cfg,
            dts,
            table,
            check_reference,
        } => cmd_convergence(cfg, dts, table.as_deref(), *check_reference, &mut out).map(|ok| if ok { 0 } else { 3 }),
        Command::Reference { cfg, stride, dir } => cmd_reference(cfg, *stride, dir).map(|_| 0),
        Command::Proptest {
            suite,
            seed,
            cases,
            verbose,
        } => run_suite(suite, *seed, *cases).and_then(|rep| {
            if *verbose {
                for line in &rep.details {
                    writeln!(out, "{line}")?;
                }
            }
            for f in &rep.failures {
                writeln!(out, "failure: {f}")?;
            }
            writeln!(out, "{}", rep.summary_line())?;
            Ok(if rep.passed() { 0 } else { 1 })
        }),
        Command::Truncate {
            input,
            output,
            tol,
            rank,
            relative,
        } => cmd_truncate(input, output, *tol, *rank, *relative, &mut out).map(|_| 0),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("htstep: {e}");
            exit_code(&e)
        }
    }
}
