use num_bigint::BigInt;

use super::{SchemeKind, SchemeSpec, ThresholdPolicy, Thresholds};
use crate::error::{invalid, Error, Result};

/// Shortest round-trip decimal of `x` as `(mantissa, exponent)`.
fn decimal(x: f64) -> (BigInt, i32) {
    let s = format!("{x:e}");
    let (m, e) = s.split_once('e').expect("`{:e}` always has an exponent");
    let mut exp: i32 = e.parse().expect("valid exponent");
    let digits = match m.split_once('.') {
        Some((int, frac)) => {
            exp -= frac.len() as i32;
            format!("{int}{frac}")
        }
        None => m.to_string(),
    };
    (digits.parse().expect("decimal digits"), exp)
}

/// `c · dt^p` evaluated exactly on the shortest decimal forms of `c` and
/// `dt`, then rounded once. This reproduces decimal products such as
/// `10³ · (6.25·10⁻⁴)³ = 2.44140625·10⁻⁷` without double rounding.
pub fn exact_scaled_power(c: f64, dt: f64, p: u32) -> f64 {
    if c == 0.0 || dt == 0.0 {
        return if p == 0 { c } else { 0.0 };
    }
    let (mc, ec) = decimal(c);
    let (md, ed) = decimal(dt);
    let m = mc * md.pow(p);
    let e = ec + ed * p as i32;
    format!("{m}e{e}").parse().expect("decimal literal")
}

pub fn threshold_schedule(scheme: &SchemeSpec, dt: f64, policy: &ThresholdPolicy) -> Result<Thresholds> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    policy.validate()?;
    let p = scheme.order as u32;
    match (scheme.kind, policy) {
        (SchemeKind::Euler, ThresholdPolicy::Euler { m1, m2 }) => Ok(Thresholds {
            alpha: exact_scaled_power(*m2, dt, 2),
            beta: exact_scaled_power(*m1, dt, 1),
            gamma: Vec::new(),
        }),
        (SchemeKind::Midpoint, ThresholdPolicy::Midpoint(c)) => Ok(Thresholds {
            alpha: exact_scaled_power(c.a, dt, 3),
            beta: exact_scaled_power(c.b, dt, 2),
            gamma: vec![exact_scaled_power(c.g, dt, 1)],
        }),
        (SchemeKind::AdamsBashforth(s), ThresholdPolicy::AdamsBashforth { a, b, g, .. }) => {
            if g.len() != s {
                return Err(Error::Config(format!("AB{s} needs {s} G constants, got {}", g.len())));
            }
            Ok(Thresholds {
                alpha: exact_scaled_power(*a, dt, p + 1),
                beta: exact_scaled_power(*b, dt, p),
                gamma: g.iter().map(|gj| exact_scaled_power(*gj, dt, p)).collect(),
            })
        }
        _ => Err(Error::Config(format!(
            "threshold policy does not match scheme {}",
            scheme.name()
        ))),
    }
}

/// Start-up thresholds of a multistep policy.
pub(crate) fn startup_schedule(dt: f64, policy: &ThresholdPolicy) -> Result<Thresholds> {
    match policy {
        ThresholdPolicy::AdamsBashforth { startup, .. } => {
            threshold_schedule(&SchemeSpec::midpoint(), dt, &ThresholdPolicy::Midpoint(startup.clone()))
        }
        _ => Err(invalid("only multistep policies carry start-up constants")),
    }
}

/// Weights `b_0..b_{s-1}` of the `s`-step Adams–Bashforth method, `b_j`
/// multiplying the slope at `t_{k-j}`. Computed by integrating the
/// Lagrange basis polynomials over one step.
pub fn ab_coefficients(s: usize) -> Result<Vec<f64>> {
    if !(1..=5).contains(&s) {
        return Err(invalid(format!("Adams–Bashforth order must be in 1..=5, got {s}")));
    }
    let mut b = Vec::with_capacity(s);
    for j in 0..s {
        // ℓ_j(u) = Π_{m≠j} (u + m) / (m − j) on nodes u = −m
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for m in (0..s).filter(|&m| m != j) {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c * m as f64;
                next[i + 1] += c;
            }
            poly = next;
            denom *= m as f64 - j as f64;
        }
        let integral: f64 = poly.iter().enumerate().map(|(i, c)| c / (i + 1) as f64).sum();
        b.push(integral / denom);
    }
    Ok(b)
}
