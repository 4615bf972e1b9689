//! Dense factorizations with the conventions the rest of the crate relies
//! on: thin factors, singular values sorted descending, failures surfaced as
//! errors.

use nalgebra::{ColPivQR, QR};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Thin SVD `m = u * diag(s) * vt`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

/// Thin SVD. A column-pivoted QR `m P = Q R` first drops the trailing rows of
/// `R` whose norm is at roundoff level, then one-sided Jacobi runs on the
/// square factor of the remaining rows. Factors are accurate to roundoff
/// relative to `‖m‖`.
pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Numerical("SVD of an empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD input has non-finite entries".into()));
    }
    if m.nrows() < m.ncols() {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        });
    }
    let n = m.ncols();
    let dec = ColPivQR::new(m.clone());
    let (q, mut r) = (dec.q(), dec.r());
    dec.p().inv_permute_columns(&mut r);
    let k = numerical_rank(&r, n as f64 * f64::EPSILON * m.norm());
    if k == 0 {
        let mut u = Matrix::zeros(m.nrows(), n);
        complete_orthonormal(&mut u, 0);
        return Ok(Svd {
            u,
            s: vec![0.0; n],
            vt: Matrix::identity(n, n),
        });
    }
    // m = Q_k X with X = R[..k, ..] P^T; X^T = Q2 R2 and R2 = U2 S V2^T.
    let x = r.rows(0, k).into_owned();
    let (q2, r2) = qr(&x.transpose());
    let (u2, s_k, v2) = jacobi_svd(r2)?;
    let mut u = Matrix::zeros(m.nrows(), n);
    u.columns_mut(0, k).copy_from(&(q.columns(0, k) * v2));
    let mut v = Matrix::zeros(n, n);
    v.columns_mut(0, k).copy_from(&(q2 * u2));
    let filled = s_k.iter().take_while(|x| **x > 0.0).count();
    complete_orthonormal(&mut u, filled);
    complete_orthonormal(&mut v, k);
    let mut s = s_k;
    s.resize(n, 0.0);
    Ok(Svd {
        u,
        s,
        vt: v.transpose(),
    })
}

/// Number of leading rows of the upper trapezoidal `r` to keep so that the
/// dropped rows have Frobenius norm at most `tol`.
fn numerical_rank(r: &Matrix, tol: f64) -> usize {
    let mut acc = 0.0;
    let mut k = r.nrows().min(r.ncols());
    while k > 0 {
        let next = acc + r.row(k - 1).norm_squared();
        if next > tol * tol {
            break;
        }
        acc = next;
        k -= 1;
    }
    k
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD of a square matrix. Columns that shrink
/// below `n ε ‖a‖` are treated as exact zeros.
fn jacobi_svd(mut a: Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let n = a.ncols();
    let mut v = Matrix::identity(n, n);
    let tol = n as f64 * f64::EPSILON;
    let negligible = (tol * a.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (a.column(p), a.column(q));
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD failed to converge".into()));
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| a.column(j).norm())
        .map(|x| if x * x <= negligible { 0.0 } else { x })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = Matrix::zeros(n, n);
    let mut vs = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        vs.set_column(k, &v.column(j));
        if norms[j] > 0.0 {
            u.set_column(k, &(a.column(j) / norms[j]));
        }
    }
    complete_orthonormal(&mut u, s.iter().take_while(|x| **x > 0.0).count());
    Ok((u, s, vs))
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.nrows();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills columns `filled..` of `u` with unit vectors orthogonal to all
/// earlier columns.
fn complete_orthonormal(u: &mut Matrix, filled: usize) {
    let n = u.nrows();
    let mut k = filled;
    for e in 0..n {
        if k == u.ncols() {
            return;
        }
        let mut x = nalgebra::DVector::zeros(n);
        x[e] = 1.0;
        for _ in 0..2 {
            for j in 0..k {
                let c = u.column(j).dot(&x);
                x -= u.column(j) * c;
            }
        }
        let nx = x.norm();
        if nx > 0.5 {
            u.set_column(k, &(x / nx));
            k += 1;
        }
    }
}

/// Thin QR `m = q * r`, `q` with `min(rows, cols)` orthonormal columns.
pub fn qr(m: &Matrix) -> (Matrix, Matrix) {
    let dec = QR::new(m.clone());
    (dec.q(), dec.r())
}

/// Root-sum-square of `s[k..]`, accumulated from the smallest value.
pub fn tail_norm(s: &[f64], k: usize) -> f64 {
    s[k.min(s.len())..]
        .iter()
        .rev()
        .fold(0.0, |acc, x| acc + x * x)
        .sqrt()
}

/// Smallest rank `k >= 1` whose discarded tail has root-sum-square `<= budget`.
/// Returns the rank and the discarded tail norm.
pub fn rank_for_tolerance(s: &[f64], budget: f64) -> (usize, f64) {
    let mut acc = 0.0;
    let mut k = s.len();
    while k > 1 {
        let next = acc + s[k - 1] * s[k - 1];
        if next.sqrt() > budget {
            break;
        }
        acc = next;
        k -= 1;
    }
    (k, acc.sqrt())
}
