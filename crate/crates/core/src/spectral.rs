//! Fourier pseudo-spectral differentiation on the periodic grid `x_j = 2πj/n`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::htucker::HTensor;
use crate::tensor::{DenseTensor, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid(format!("grid size must be even and >= 4, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.spacing()).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().into_iter().map(f).collect()
    }

    /// Quadrature weight of a single cell in `d` dimensions.
    pub fn cell_volume(&self, d: usize) -> f64 {
        self.spacing().powi(d as i32)
    }

    /// Factor turning a Frobenius norm into the discrete L² norm.
    pub fn l2_factor(&self, d: usize) -> f64 {
        self.cell_volume(d).sqrt()
    }
}

/// Even-n trigonometric differentiation matrix of order 1 or 2.
pub fn diff_matrix(n: usize, order: u8) -> Result<Matrix> {
    let grid = PeriodicGrid::new(n)?;
    let h = grid.spacing();
    let mut m = Matrix::zeros(n, n);
    match order {
        1 => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let k = i as i64 - j as i64;
                        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        m[(i, j)] = 0.5 * sign / (k as f64 * h / 2.0).tan();
                    }
                }
            }
        }
        2 => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        m[(i, j)] = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
                    } else {
                        let k = i as i64 - j as i64;
                        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let s = (k as f64 * h / 2.0).sin();
                        m[(i, j)] = -0.5 * sign / (s * s);
                    }
                }
            }
        }
        _ => return Err(invalid(format!("differentiation order must be 1 or 2, got {order}"))),
    }
    Ok(m)
}

pub fn diag_of(samples: &[f64]) -> Matrix {
    Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(samples))
}

fn check_dims(dims: &[usize], grid: &PeriodicGrid) -> Result<()> {
    if dims.iter().any(|&n| n != grid.n()) {
        return Err(invalid(format!("tensor dims {dims:?} do not match grid size {}", grid.n())));
    }
    Ok(())
}

/// `(2π/n)^d Σ f`.
pub fn quad_integral_dense(t: &DenseTensor, grid: &PeriodicGrid) -> Result<f64> {
    check_dims(t.dims(), grid)?;
    Ok(grid.cell_volume(t.order()) * t.data().iter().sum::<f64>())
}

/// Same as [`quad_integral_dense`], contracting every mode with ones.
pub fn quad_integral_ht(h: &HTensor, grid: &PeriodicGrid) -> Result<f64> {
    check_dims(h.dims(), grid)?;
    let w = vec![grid.spacing(); grid.n()];
    let ws: Vec<&[f64]> = (0..h.order()).map(|_| w.as_slice()).collect();
    h.weighted_sum(&ws)
}
