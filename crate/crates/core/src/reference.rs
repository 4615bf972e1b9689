//! Dense fourth-order Runge–Kutta reference integration.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::operators::KronSumOperator;
use crate::spectral::PeriodicGrid;
use crate::tensor::DenseTensor;

fn rk4_with_slope(op: &KronSumOperator, f: &DenseTensor, k1: &DenseTensor, dt: f64) -> Result<DenseTensor> {
    let k2 = op.apply_dense(&DenseTensor::linear_combine(1.0, f, dt / 2.0, k1)?)?;
    let k3 = op.apply_dense(&DenseTensor::linear_combine(1.0, f, dt / 2.0, &k2)?)?;
    let k4 = op.apply_dense(&DenseTensor::linear_combine(1.0, f, dt, &k3)?)?;
    let mut out = f.clone();
    out.axpy(dt / 6.0, k1)?;
    out.axpy(dt / 3.0, &k2)?;
    out.axpy(dt / 3.0, &k3)?;
    out.axpy(dt / 6.0, &k4)?;
    Ok(out)
}

/// One classical RK4 step of `df/dt = N f`.
pub fn rk4_step(op: &KronSumOperator, f: &DenseTensor, dt: f64) -> Result<DenseTensor> {
    let k1 = op.apply_dense(f)?;
    rk4_with_slope(op, f, &k1, dt)
}

/// Integrates `steps` RK4 steps, calling `observe(k, t, f_k)` for `k = 0..=steps`.
pub fn integrate_rk4(
    op: &KronSumOperator,
    f0: &DenseTensor,
    dt: f64,
    steps: usize,
    mut observe: impl FnMut(usize, f64, &DenseTensor) -> Result<()>,
) -> Result<DenseTensor> {
    let mut f = f0.clone();
    observe(0, 0.0, &f)?;
    for k in 1..=steps {
        f = rk4_step(op, &f, dt)?;
        if f.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("reference solution is not finite at step {k}")));
        }
        observe(k, k as f64 * dt, &f)?;
    }
    Ok(f)
}

/// Writes the state every `stride` steps as `<dir>/ref_<k>.bin`.
pub fn persist_trajectory(
    op: &KronSumOperator,
    f0: &DenseTensor,
    dt: f64,
    steps: usize,
    stride: usize,
    dir: &Path,
) -> Result<DenseTensor> {
    if stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    std::fs::create_dir_all(dir)?;
    integrate_rk4(op, f0, dt, steps, |k, _, f| {
        if k % stride == 0 || k == steps {
            let file = std::fs::File::create(dir.join(format!("ref_{k:08}.bin")))?;
            f.write_binary(std::io::BufWriter::new(file))?;
        }
        Ok(())
    })
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DenseTensor,
    pub time: f64,
    pub steps: usize,
    /// L² residual `‖N f_k‖` for every step taken, starting at `k = 0`.
    pub residuals: Vec<f64>,
}

/// Integrates until `‖N f‖_{L²} < tol`.
pub fn run_to_steady(
    op: &KronSumOperator,
    f0: &DenseTensor,
    grid: &PeriodicGrid,
    dt: f64,
    tol: f64,
    max_steps: usize,
) -> Result<SteadyState> {
    if !(tol > 0.0) || !(dt > 0.0) {
        return Err(invalid("tolerance and time step must be positive"));
    }
    let l2 = grid.l2_factor(f0.order());
    let mut f = f0.clone();
    let mut residuals = Vec::new();
    for k in 0..=max_steps {
        let slope = op.apply_dense(&f)?;
        let res = l2 * slope.norm();
        residuals.push(res);
        if !res.is_finite() {
            return Err(Error::Numerical(format!("residual is not finite at step {k}")));
        }
        if res < tol {
            return Ok(SteadyState {
                state: f,
                time: k as f64 * dt,
                steps: k,
                residuals,
            });
        }
        if k == max_steps {
            return Err(Error::Timeout { steps: k, residual: res });
        }
        f = rk4_with_slope(op, &f, &slope, dt)?;
    }
    unreachable!()
}

/// Whether the last `window` residuals never increase.
pub fn tail_decreasing(residuals: &[f64], window: usize) -> bool {
    let start = residuals.len().saturating_sub(window);
    residuals[start..].windows(2).all(|w| w[1] <= w[0])
}
