//! The fixed-rank matrix manifold: best truncation, tangent projection,
//! first-order SVD perturbation and the DO/BO factor equations.

use crate::error::{invalid, Error, Result};
use crate::linalg::{svd, tail_norm};
use crate::tensor::Matrix;

/// Rank-r factorization `Q diag(s) Vᵀ` with orthonormal `Q`, `V`, singular
/// values descending, and the largest-magnitude entry of every `Q` column
/// positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdTriple {
    pub q: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdTriple {
    /// Leading rank-`r` factors of `m`.
    pub fn from_matrix(m: &Matrix, r: usize) -> Result<Self> {
        let k = m.nrows().min(m.ncols());
        if r == 0 || r > k {
            return Err(invalid(format!("rank {r} outside 1..={k}")));
        }
        let dec = svd(m)?;
        let mut t = Self {
            q: dec.u.columns(0, r).into_owned(),
            s: dec.s[..r].to_vec(),
            v: dec.vt.rows(0, r).transpose(),
        };
        t.fix_signs();
        Ok(t)
    }

    fn fix_signs(&mut self) {
        for j in 0..self.rank() {
            let col = self.q.column(j);
            let big = col.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            if big < 0.0 {
                self.q.column_mut(j).neg_mut();
                self.v.column_mut(j).neg_mut();
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn sigma(&self) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.s))
    }

    pub fn to_matrix(&self) -> Matrix {
        &self.q * self.sigma() * self.v.transpose()
    }

    /// Largest deviation of `QᵀQ`, `VᵀV` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = self.rank();
        let i = Matrix::identity(r, r);
        let dq = (self.q.transpose() * &self.q - &i).amax();
        let dv = (self.v.transpose() * &self.v - &i).amax();
        dq.max(dv)
    }
}

/// Skew-symmetric `H[i,j] = 1/(σ_j² − σ_i²)`, zero diagonal. Fails when two
/// singular values coincide to relative precision `1e-10`.
pub fn h_matrix(s: &[f64]) -> Result<Matrix> {
    let r = s.len();
    let scale = s.iter().fold(0.0f64, |m, x| m.max(x * x));
    let mut h = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            if i != j {
                let gap = s[j] * s[j] - s[i] * s[i];
                if gap.abs() <= 1e-10 * scale {
                    return Err(Error::DegenerateSpectrum { gap: gap.abs() });
                }
                h[(i, j)] = 1.0 / gap;
            }
        }
    }
    Ok(h)
}

/// Optimal rank-`r` approximation and its factors.
pub fn best_truncate_matrix(m: &Matrix, r: usize) -> Result<(Matrix, SvdTriple)> {
    let t = SvdTriple::from_matrix(m, r)?;
    Ok((t.to_matrix(), t))
}

/// Eckart–Young error `sqrt(Σ_{i>r} σ_i²)`.
pub fn best_truncation_error(m: &Matrix, r: usize) -> Result<f64> {
    Ok(tail_norm(&svd(m)?.s, r))
}

fn check_shape(f: &SvdTriple, v: &Matrix) -> Result<()> {
    if v.nrows() != f.q.nrows() || v.ncols() != f.v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: vec![f.q.nrows(), f.v.nrows()],
            got: vec![v.nrows(), v.ncols()],
        });
    }
    Ok(())
}

/// `P_f v = QQᵀv + vVVᵀ − QQᵀvVVᵀ`.
pub fn tangent_project(f: &SvdTriple, v: &Matrix) -> Result<Matrix> {
    check_shape(f, v)?;
    let qtv = f.q.transpose() * v;
    let vv = v * &f.v;
    Ok(&f.q * &qtv + &vv * f.v.transpose() - &f.q * (qtv * &f.v) * f.v.transpose())
}

/// `‖v − P_f v‖`.
pub fn normal_component_norm(f: &SvdTriple, v: &Matrix) -> Result<f64> {
    Ok((v - tangent_project(f, v)?).norm())
}

/// Time derivatives `(Q̇, σ̇, V̇)` of the SVD factors of a rank-r trajectory
/// with velocity `n`, valid while the singular values are distinct.
pub fn svd_rhs(f: &SvdTriple, n: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    check_shape(f, n)?;
    let h = h_matrix(&f.s)?;
    let sig = f.sigma();
    let sig_inv = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(f.rank(), f.s.iter().map(|x| 1.0 / x)));
    let c = f.q.transpose() * n * &f.v;
    let nv = n * &f.v;
    let ntq = n.transpose() * &f.q;
    let iq = Matrix::identity(f.q.nrows(), f.q.nrows()) - &f.q * f.q.transpose();
    let iv = Matrix::identity(f.v.nrows(), f.v.nrows()) - &f.v * f.v.transpose();
    let dq = &f.q * h.component_mul(&(&c * &sig + &sig * c.transpose())) + iq * nv * &sig_inv;
    let dv = &f.v * h.component_mul(&(&sig * &c + c.transpose() * &sig)) + iv * ntq * &sig_inv;
    let ds = (0..f.rank()).map(|i| c[(i, i)]).collect();
    Ok((dq, ds, dv))
}

/// First-order update of the SVD factors of `f + Δt·n`.
pub fn svd_perturb_step(f: &SvdTriple, n: &Matrix, dt: f64) -> Result<SvdTriple> {
    let (dq, ds, dv) = svd_rhs(f, n)?;
    Ok(SvdTriple {
        q: &f.q + dq * dt,
        s: f.s.iter().zip(&ds).map(|(s, d)| s + dt * d).collect(),
        v: &f.v + dv * dt,
    })
}

/// `f = W A Bᵀ` with orthonormal `W`, `B` and invertible `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoboState {
    pub w: Matrix,
    pub a: Matrix,
    pub b: Matrix,
}

impl DoboState {
    pub fn from_svd(f: &SvdTriple) -> Self {
        Self {
            w: f.q.clone(),
            a: f.sigma(),
            b: f.v.clone(),
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        &self.w * &self.a * self.b.transpose()
    }
}

/// `(Ȧ, Ẇ, Ḃ) = (WᵀNB, (I−WWᵀ)NBA⁻¹, (I−BBᵀ)NᵀWA⁻ᵀ)`.
pub fn do_rhs(st: &DoboState, n: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    if n.nrows() != st.w.nrows() || n.ncols() != st.b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: vec![st.w.nrows(), st.b.nrows()],
            got: vec![n.nrows(), n.ncols()],
        });
    }
    let sv = svd(&st.a)?.s;
    let (smax, smin) = (sv[0], *sv.last().unwrap());
    if !(smin > 1e-12 * smax) {
        return Err(Error::IllConditioned { sigma_min: smin });
    }
    let a_inv = st
        .a
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { sigma_min: smin })?;
    let nb = n * &st.b;
    let ntw = n.transpose() * &st.w;
    let da = st.w.transpose() * &nb;
    let dw = (&nb - &st.w * (st.w.transpose() * &nb)) * &a_inv;
    let db = (&ntw - &st.b * (st.b.transpose() * &ntw)) * a_inv.transpose();
    Ok((da, dw, db))
}

/// `‖T_r(f + Δt v) − (f + Δt P_f v)‖`.
pub fn consistency_gap(f: &SvdTriple, v: &Matrix, dt: f64) -> Result<f64> {
    let fm = f.to_matrix();
    let (t, _) = best_truncate_matrix(&(&fm + v * dt), f.rank())?;
    Ok((t - (fm + tangent_project(f, v)? * dt)).norm())
}

/// `‖(T_r(f + h v) − T_r(f))/h − P_f v‖` by forward differences.
pub fn jacobian_defect(f: &SvdTriple, v: &Matrix, h: f64) -> Result<f64> {
    let fm = f.to_matrix();
    let (base, _) = best_truncate_matrix(&fm, f.rank())?;
    let (moved, _) = best_truncate_matrix(&(&fm + v * h), f.rank())?;
    Ok(((moved - base) / h - tangent_project(f, v)?).norm())
}

fn rk4<S: Clone>(
    mut y: S,
    dt: f64,
    steps: usize,
    rhs: impl Fn(&S) -> Result<S>,
    axpy: impl Fn(&S, f64, &S) -> S,
) -> Result<S> {
    for _ in 0..steps {
        let k1 = rhs(&y)?;
        let k2 = rhs(&axpy(&y, dt / 2.0, &k1))?;
        let k3 = rhs(&axpy(&y, dt / 2.0, &k2))?;
        let k4 = rhs(&axpy(&y, dt, &k3))?;
        let y1 = axpy(&y, dt / 6.0, &k1);
        let y2 = axpy(&y1, dt / 3.0, &k2);
        let y3 = axpy(&y2, dt / 3.0, &k3);
        y = axpy(&y3, dt / 6.0, &k4);
    }
    Ok(y)
}

/// RK4 on the DO/BO factor equations of `ḟ = P_f field(f)`.
pub fn rk4_dobo(st: &DoboState, field: impl Fn(&Matrix) -> Matrix, dt: f64, steps: usize) -> Result<DoboState> {
    rk4(
        st.clone(),
        dt,
        steps,
        |y| {
            let (a, w, b) = do_rhs(y, &field(&y.to_matrix()))?;
            Ok(DoboState { w, a, b })
        },
        |y, h, k| DoboState {
            w: &y.w + &k.w * h,
            a: &y.a + &k.a * h,
            b: &y.b + &k.b * h,
        },
    )
}

/// RK4 on the SVD-factor equations of `ḟ = P_f field(f)`.
pub fn rk4_svd_form(f: &SvdTriple, field: impl Fn(&Matrix) -> Matrix, dt: f64, steps: usize) -> Result<SvdTriple> {
    rk4(
        f.clone(),
        dt,
        steps,
        |y| {
            let (q, s, v) = svd_rhs(y, &field(&y.to_matrix()))?;
            Ok(SvdTriple { q, s, v })
        },
        |y, h, k| SvdTriple {
            q: &y.q + &k.q * h,
            s: y.s.iter().zip(&k.s).map(|(a, b)| a + h * b).collect(),
            v: &y.v + &k.v * h,
        },
    )
}

/// Boundedness of the two rank-increase indicators over a step sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub dts: Vec<f64>,
    /// `‖(I − P_f) v‖ / Δt`.
    pub k_hat: Vec<f64>,
    /// `‖(f + Δt v) − T_r(f + Δt v)‖ / Δt²`.
    pub m_hat: Vec<f64>,
    pub k_bounded: bool,
    pub m_bounded: bool,
}

impl EquivalenceReport {
    pub fn agree(&self) -> bool {
        self.k_bounded == self.m_bounded
    }
}

/// A sequence indexed by decreasing `Δt` is declared bounded when it stays
/// below `floor` or its log-log slope against `Δt` over the last three
/// octaves is above `−1/4` (growth slower than `Δt^{-1/4}`).
pub fn bounded_as_dt_vanishes(dts: &[f64], vals: &[f64], floor: f64) -> bool {
    if vals.iter().all(|v| *v <= floor) {
        return true;
    }
    let n = dts.len();
    let lo = n.saturating_sub(4);
    let (a, b) = (vals[lo].max(floor), vals[n - 1].max(floor));
    let slope = (b / a).ln() / (dts[n - 1] / dts[lo]).ln();
    slope > -0.25
}

/// Evaluates both indicators for a (possibly step-dependent) direction
/// `v(Δt)` over `dts` (decreasing).
pub fn equivalence_check(f: &SvdTriple, v: impl Fn(f64) -> Matrix, dts: &[f64]) -> Result<EquivalenceReport> {
    if dts.len() < 4 || dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("need at least four decreasing step sizes"));
    }
    let fm = f.to_matrix();
    let mut k_hat = Vec::with_capacity(dts.len());
    let mut m_hat = Vec::with_capacity(dts.len());
    for &dt in dts {
        let vd = v(dt);
        k_hat.push(normal_component_norm(f, &vd)? / dt);
        let moved = &fm + &vd * dt;
        m_hat.push(best_truncation_error(&moved, f.rank())? / (dt * dt));
    }
    let scale = fm.norm();
    let k_bounded = bounded_as_dt_vanishes(dts, &k_hat, 1e-8 * scale);
    let m_bounded = bounded_as_dt_vanishes(dts, &m_hat, 1e-8 * scale);
    Ok(EquivalenceReport {
        dts: dts.to_vec(),
        k_hat,
        m_hat,
        k_bounded,
        m_bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::{random_matrix, random_orthonormal, rng, TestRng};
    use rand::Rng;

    /// Rank-r matrix with singular values `r, r-1, ..., 1` (well separated).
    fn random_point(r: &mut TestRng, n1: usize, n2: usize, k: usize) -> SvdTriple {
        let q = random_orthonormal(r, n1, k);
        let v = random_orthonormal(r, n2, k);
        let s: Vec<f64> = (0..k).map(|i| (k - i) as f64 + 0.5 * r.gen::<f64>()).collect();
        let m = &q * Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&s)) * v.transpose();
        SvdTriple::from_matrix(&m, k).unwrap()
    }

    fn random_tangent(r: &mut TestRng, f: &SvdTriple) -> Matrix {
        let x = random_matrix(r, f.v.nrows(), f.rank());
        let y = random_matrix(r, f.q.nrows(), f.rank());
        &f.q * x.transpose() + y * f.v.transpose()
    }

    #[test]
    fn triple_invariants() {
        let m = random_matrix(&mut rng(90), 7, 5);
        let t = SvdTriple::from_matrix(&m, 3).unwrap();
        assert!(t.orthonormality_defect() < 1e-11);
        assert!(t.s.windows(2).all(|w| w[0] >= w[1]) && t.s[2] > 0.0);
        for j in 0..3 {
            let big = t.q.column(j).iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(big > 0.0);
        }
        assert!(SvdTriple::from_matrix(&m, 0).is_err());
        assert!(SvdTriple::from_matrix(&m, 6).is_err());
    }

    #[test]
    fn best_truncation_examples() {
        let mut r = rng(91);
        let a = random_matrix(&mut r, 5, 1);
        let b = random_matrix(&mut r, 4, 1);
        let m = &a * b.transpose();
        let (t, _) = best_truncate_matrix(&m, 1).unwrap();
        assert!((t - &m).norm() < 1e-12 * m.norm());
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, 2.0, 1.0]));
        let (t, _) = best_truncate_matrix(&d, 2).unwrap();
        let want = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, 2.0, 0.0]));
        assert!((&t - want).norm() < 1e-14);
        assert!(((&d - t).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn best_truncation_matches_zeroed_svd() {
        let m = random_matrix(&mut rng(92), 6, 5);
        let dec = nalgebra::SVD::new(m.clone(), true, true);
        let mut s = dec.singular_values.clone();
        let mut idx: Vec<usize> = (0..5).collect();
        idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
        for &i in &idx[3..] {
            s[i] = 0.0;
        }
        let want = dec.u.unwrap() * Matrix::from_diagonal(&s) * dec.v_t.unwrap();
        let (t, _) = best_truncate_matrix(&m, 3).unwrap();
        assert!((t - &want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn best_truncation_beats_random_competitors() {
        let mut r = rng(93);
        let m = random_matrix(&mut r, 6, 5);
        let (t, _) = best_truncate_matrix(&m, 2).unwrap();
        let best = (&m - t).norm();
        for _ in 0..1000 {
            let c = random_matrix(&mut r, 6, 2) * random_matrix(&mut r, 2, 5);
            assert!(best <= (&m - c).norm());
        }
    }

    #[test]
    fn projector_is_orthogonal() {
        let mut r = rng(94);
        let f = random_point(&mut r, 7, 6, 3);
        let u = random_matrix(&mut r, 7, 6);
        let w = random_matrix(&mut r, 7, 6);
        let pu = tangent_project(&f, &u).unwrap();
        assert!((tangent_project(&f, &pu).unwrap() - &pu).norm() < 1e-11 * pu.norm());
        let lhs = pu.dot(&w);
        let rhs = u.dot(&tangent_project(&f, &w).unwrap());
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
        let t = random_tangent(&mut r, &f);
        assert!((tangent_project(&f, &t).unwrap() - &t).norm() < 1e-11 * t.norm());
        let full = random_point(&mut r, 4, 4, 4);
        let x = random_matrix(&mut r, 4, 4);
        assert!((tangent_project(&full, &x).unwrap() - &x).norm() < 1e-11);
        assert!(tangent_project(&f, &random_matrix(&mut r, 6, 6)).is_err());
    }

    #[test]
    fn projection_is_the_closest_tangent_vector() {
        let mut r = rng(95);
        let f = random_point(&mut r, 6, 5, 2);
        let v = random_matrix(&mut r, 6, 5);
        let best = normal_component_norm(&f, &v).unwrap();
        for _ in 0..1000 {
            let h = random_tangent(&mut r, &f);
            assert!(best <= (&v - h).norm() + 1e-12);
        }
    }

    #[test]
    fn normal_component_cases() {
        let mut r = rng(96);
        let f = random_point(&mut r, 6, 5, 2);
        let t = random_tangent(&mut r, &f);
        assert!(normal_component_norm(&f, &t).unwrap() < 1e-12 * t.norm());
        let qp = Matrix::identity(6, 6) - &f.q * f.q.transpose();
        let vp = Matrix::identity(5, 5) - &f.v * f.v.transpose();
        let n = qp * random_matrix(&mut r, 6, 5) * vp;
        assert!((normal_component_norm(&f, &n).unwrap() - n.norm()).abs() < 1e-12 * n.norm());
        let v = random_matrix(&mut r, 6, 5);
        let p = tangent_project(&f, &v).unwrap().norm();
        let c = normal_component_norm(&f, &v).unwrap();
        assert!((p * p + c * c - v.norm_squared()).abs() < 1e-11 * v.norm_squared());
    }

    #[test]
    fn h_matrix_is_skew_and_rejects_repeats() {
        let h = h_matrix(&[3.0, 2.0, 1.0]).unwrap();
        assert!((&h + h.transpose()).norm() < 1e-15);
        assert!((h[(0, 1)] - 1.0 / (4.0 - 9.0)).abs() < 1e-15);
        assert!(matches!(h_matrix(&[2.0, 2.0]), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn perturbation_trivial_cases() {
        let mut r = rng(97);
        let f = random_point(&mut r, 6, 5, 3);
        let same = svd_perturb_step(&f, &Matrix::zeros(6, 5), 0.1).unwrap();
        assert_eq!(same, f);
        // QᵀNV with zero diagonal leaves Σ unchanged
        let c = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { (i + 2 * j) as f64 });
        let n = &f.q * c * f.v.transpose();
        let next = svd_perturb_step(&f, &n, 0.01).unwrap();
        assert_eq!(next.s, f.s);
        let deg = SvdTriple {
            q: f.q.clone(),
            s: vec![1.0, 1.0, 0.5],
            v: f.v.clone(),
        };
        assert!(svd_perturb_step(&deg, &n, 0.1).is_err());
    }

    /// Sign-aligned distance between factor sets.
    fn factor_distance(a: &SvdTriple, b: &SvdTriple) -> f64 {
        let mut d = 0.0;
        for j in 0..a.rank() {
            let sign = if a.q.column(j).dot(&b.q.column(j)) < 0.0 { -1.0 } else { 1.0 };
            d += (a.q.column(j) - b.q.column(j) * sign).norm_squared();
            d += (a.v.column(j) - b.v.column(j) * sign).norm_squared();
            d += (a.s[j] - b.s[j]).powi(2);
        }
        d.sqrt()
    }

    #[test]
    fn perturbation_defect_is_second_order() {
        let mut r = rng(98);
        let f = random_point(&mut r, 8, 6, 3);
        let n = random_matrix(&mut r, 8, 6);
        let defect = |dt: f64| {
            let exact = SvdTriple::from_matrix(&(f.to_matrix() + &n * dt), 3).unwrap();
            factor_distance(&svd_perturb_step(&f, &n, dt).unwrap(), &exact)
        };
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let ratio = defect(dt / 2.0) / defect(dt);
            assert!((0.2..=0.3).contains(&ratio), "dt={dt}: {ratio}");
        }
    }

    #[test]
    fn dobo_trivial_cases() {
        let mut r = rng(99);
        let f = random_point(&mut r, 6, 5, 2);
        let st = DoboState::from_svd(&f);
        let (da, dw, db) = do_rhs(&st, &Matrix::zeros(6, 5)).unwrap();
        assert_eq!((da.norm(), dw.norm(), db.norm()), (0.0, 0.0, 0.0));
        let c = random_matrix(&mut r, 2, 2);
        let n = &st.w * &c * st.b.transpose();
        let (da, dw, db) = do_rhs(&st, &n).unwrap();
        assert!((da - c).norm() < 1e-12 && dw.norm() < 1e-12 && db.norm() < 1e-12);
        let sing = DoboState {
            a: Matrix::zeros(2, 2),
            ..st
        };
        assert!(matches!(do_rhs(&sing, &n), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn consistency_gap_is_second_order() {
        let mut r = rng(100);
        let f = random_point(&mut r, 7, 6, 2);
        let v = random_matrix(&mut r, 7, 6);
        assert_eq!(consistency_gap(&f, &v, 0.0).unwrap() < 1e-13, true);
        for j in 6..10 {
            let dt = 2f64.powi(-j);
            let ratio = consistency_gap(&f, &v, dt / 2.0).unwrap() / consistency_gap(&f, &v, dt).unwrap();
            assert!((0.15..=0.35).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn jacobian_of_best_truncation_is_projection() {
        let mut r = rng(101);
        let f = random_point(&mut r, 6, 5, 2);
        let v = random_matrix(&mut r, 6, 5);
        let e: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&h| jacobian_defect(&f, &v, h).unwrap()).collect();
        assert!(e.windows(2).all(|w| w[1] < w[0] * 0.2), "{e:?}");
    }

    #[test]
    fn equivalence_verdicts() {
        let mut r = rng(102);
        let f = random_point(&mut r, 6, 5, 2);
        let dts: Vec<f64> = (4..=12).map(|j| 2f64.powi(-j)).collect();
        let t = random_tangent(&mut r, &f);
        let rep = equivalence_check(&f, |_| t.clone(), &dts).unwrap();
        assert!(rep.k_bounded && rep.m_bounded);
        let qp = Matrix::identity(6, 6) - &f.q * f.q.transpose();
        let vp = Matrix::identity(5, 5) - &f.v * f.v.transpose();
        let nrm = qp * random_matrix(&mut r, 6, 5) * vp;
        let rep = equivalence_check(&f, |_| &t + &nrm, &dts).unwrap();
        assert!(!rep.k_bounded && !rep.m_bounded);
        let rep = equivalence_check(&f, |dt| &t + &nrm * dt, &dts).unwrap();
        assert!(rep.k_bounded && rep.m_bounded && rep.agree());
    }

    #[test]
    fn dobo_and_svd_forms_follow_the_same_trajectory() {
        let mut r = rng(103);
        let f = random_point(&mut r, 8, 7, 3);
        let a1 = random_matrix(&mut r, 8, 8);
        let a2 = random_matrix(&mut r, 7, 7);
        let sm = random_matrix(&mut r, 8, 7);
        let field = |m: &Matrix| &a1 * m + m * a2.transpose() + sm.component_mul(m);
        let mut dobo = DoboState::from_svd(&f);
        let mut tri = f.clone();
        for _ in 0..10 {
            dobo = rk4_dobo(&dobo, field, 1e-3, 10).unwrap();
            tri = rk4_svd_form(&tri, field, 1e-3, 10).unwrap();
            assert!((dobo.to_matrix() - tri.to_matrix()).norm() < 1e-6);
        }
        assert!(tri.orthonormality_defect() < 1e-6);
    }
}
