//! Fixed-rank and rank-adaptive step-truncation integrators.
//!
//! Every scheme is written as `f_{k+1} = T_α(f_k + Δt T_β(Φ))` where `Φ` is
//! the scheme's increment built from (possibly truncated) operator
//! evaluations. The three tolerances per step are
//!
//! | scheme   | `ε_α`       | `ε_β`     | `ε_γ`                         |
//! |----------|-------------|-----------|-------------------------------|
//! | Euler    | `M₂ Δt²`    | `M₁ Δt`   | none                          |
//! | midpoint | `A Δt³`     | `B Δt²`   | `G Δt` (inner slope)          |
//! | AB(s)    | `A Δt^{s+1}`| `B Δt^s`  | `G_j Δt^s` per history slope  |
//!
//! so Euler's `ε_r` is `ε_α` and its `ε_s` is `ε_β`.

mod run;
mod schedule;
mod steps;

pub use run::{
    fit_order, integrate, step_count, CsvRecorder, IntegrateOptions, Integration, StepRecord, StepSink, CSV_HEADER, CSV_VERSION,
};
pub use schedule::{ab_coefficients, exact_scaled_power, threshold_schedule};
pub use steps::{step_ab, step_ab_with_slopes, step_euler, step_midpoint, StepDiagnostics, TruncMode};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Euler,
    Midpoint,
    AdamsBashforth(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub order: usize,
    /// AB weights `b_0..b_{s-1}` (newest slope first); empty otherwise.
    pub weights: Vec<f64>,
}

impl SchemeSpec {
    pub fn euler() -> Self {
        Self {
            kind: SchemeKind::Euler,
            order: 1,
            weights: Vec::new(),
        }
    }

    pub fn midpoint() -> Self {
        Self {
            kind: SchemeKind::Midpoint,
            order: 2,
            weights: Vec::new(),
        }
    }

    pub fn adams_bashforth(s: usize) -> Result<Self> {
        Ok(Self {
            kind: SchemeKind::AdamsBashforth(s),
            order: s,
            weights: ab_coefficients(s)?,
        })
    }

    pub fn name(&self) -> String {
        match self.kind {
            SchemeKind::Euler => "euler".into(),
            SchemeKind::Midpoint => "midpoint".into(),
            SchemeKind::AdamsBashforth(s) => format!("ab{s}"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::euler()),
            "midpoint" => Ok(Self::midpoint()),
            _ => match s.strip_prefix("ab").and_then(|k| k.parse::<usize>().ok()) {
                Some(k) => Self::adams_bashforth(k),
                None => Err(Error::Config(format!("unknown scheme `{s}`"))),
            },
        }
    }
}

/// Midpoint scaling constants, also used for multistep start-up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidpointConstants {
    pub a: f64,
    pub b: f64,
    pub g: f64,
}

/// Scaling constants from which the per-step tolerances are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    Euler {
        m1: f64,
        m2: f64,
    },
    Midpoint(MidpointConstants),
    AdamsBashforth {
        a: f64,
        b: f64,
        g: Vec<f64>,
        /// Constants of the midpoint steps that fill the history.
        startup: MidpointConstants,
    },
}

impl ThresholdPolicy {
    fn constants(&self) -> Vec<f64> {
        match self {
            ThresholdPolicy::Euler { m1, m2 } => vec![*m1, *m2],
            ThresholdPolicy::Midpoint(c) => vec![c.a, c.b, c.g],
            ThresholdPolicy::AdamsBashforth { a, b, g, startup } => {
                let mut v = vec![*a, *b, startup.a, startup.b, startup.g];
                v.extend(g);
                v
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.constants().iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::Config("threshold constants must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Constants of the 2D experiments: `M₁ = M₂ = 10²`, `A = B = 10³`, `G = 10²`.
    pub fn paper_small(scheme: &SchemeSpec) -> Self {
        let mid = MidpointConstants { a: 1e3, b: 1e3, g: 1e2 };
        match scheme.kind {
            SchemeKind::Euler => ThresholdPolicy::Euler { m1: 1e2, m2: 1e2 },
            SchemeKind::Midpoint => ThresholdPolicy::Midpoint(mid),
            SchemeKind::AdamsBashforth(s) => ThresholdPolicy::AdamsBashforth {
                a: 1e3,
                b: 1e3,
                g: vec![1e2; s],
                startup: mid,
            },
        }
    }

    /// The larger AB2 constants of the 4D experiment.
    pub fn paper_large_ab2() -> Self {
        ThresholdPolicy::AdamsBashforth {
            a: 4e4,
            b: 4e4,
            g: vec![4e3; 2],
            startup: MidpointConstants { a: 5e4, b: 5e4, g: 5e3 },
        }
    }
}

/// Tolerances for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
}
