//! Fokker–Planck problems with Lorenz-96-type drift on `[0, 2π)^d`.
//!
//! The drift of coordinate `i` is
//! `μ_i(x) = (γ(x_{i+1}) − γ(x_{i−2})) ξ(x_{i−1}) − φ(x_i)` with indices
//! taken modulo `d`, and the operator is
//! `N f = −Σ_i ∂_i(μ_i f) + (σ²/2) Σ_i ∂_i² f`.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::htucker::{DimensionTree, HTensor, TreeShape, TruncationControl};
use crate::operators::{Factor, KronSumOperator};
use crate::spectral::{diag_of, diff_matrix, quad_integral_ht, PeriodicGrid};
use crate::tensor::{DenseTensor, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftFn {
    Zero,
    Sin,
    Cos,
    /// `e^{sin x} + 1`
    ExpSinPlus1,
    /// `e^{cos x}`
    ExpCos,
    /// Values at the grid nodes.
    Tabulated(Vec<f64>),
}

impl DriftFn {
    pub fn eval(&self, x: f64) -> Option<f64> {
        Some(match self {
            DriftFn::Zero => 0.0,
            DriftFn::Sin => x.sin(),
            DriftFn::Cos => x.cos(),
            DriftFn::ExpSinPlus1 => x.sin().exp() + 1.0,
            DriftFn::ExpCos => x.cos().exp(),
            DriftFn::Tabulated(_) => return None,
        })
    }

    pub fn samples(&self, grid: &PeriodicGrid) -> Result<Vec<f64>> {
        match self {
            DriftFn::Tabulated(v) if v.len() == grid.n() => Ok(v.clone()),
            DriftFn::Tabulated(v) => Err(invalid(format!(
                "tabulated drift has {} samples, grid has {}",
                v.len(),
                grid.n()
            ))),
            f => Ok(grid.sample(|x| f.eval(x).unwrap())),
        }
    }
}

impl FromStr for DriftFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => DriftFn::Zero,
            "sin" => DriftFn::Sin,
            "cos" => DriftFn::Cos,
            "exp_sin_plus_1" | "exp_sin_plus1" => DriftFn::ExpSinPlus1,
            "exp_cos" => DriftFn::ExpCos,
            other => return Err(invalid(format!("unknown drift function `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub gamma: DriftFn,
    pub xi: DriftFn,
    pub phi: DriftFn,
    pub sigma: f64,
}

impl DriftSpec {
    pub fn paper_2d() -> Self {
        Self {
            gamma: DriftFn::Sin,
            xi: DriftFn::Cos,
            phi: DriftFn::ExpSinPlus1,
            sigma: 2.0,
        }
    }

    pub fn paper_4d() -> Self {
        Self {
            gamma: DriftFn::Sin,
            xi: DriftFn::ExpSinPlus1,
            phi: DriftFn::Cos,
            sigma: 2.0,
        }
    }

    pub fn zero(sigma: f64) -> Self {
        Self {
            gamma: DriftFn::Zero,
            xi: DriftFn::Zero,
            phi: DriftFn::Zero,
            sigma,
        }
    }
}

/// Mode indices `(i+1, i−1, i−2)` modulo `d`.
pub fn drift_neighbours(i: usize, d: usize) -> (usize, usize, usize) {
    ((i + 1) % d, (i + d - 1) % d, (i + 2 * d - 2) % d)
}

/// Builds the operator with one Kronecker term per separable drift summand
/// and one diffusion term per mode (`4d` terms in total).
pub fn build_fp_operator(d: usize, n: usize, drift: &DriftSpec) -> Result<KronSumOperator> {
    if d < 2 {
        return Err(invalid("Fokker–Planck problems need d >= 2"));
    }
    if !(drift.sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let grid = PeriodicGrid::new(n)?;
    let d1 = diff_matrix(n, 1)?;
    let d2 = diff_matrix(n, 2)?;
    let g = drift.gamma.samples(&grid)?;
    let xi = drift.xi.samples(&grid)?;
    let phi = drift.phi.samples(&grid)?;
    let mut op = KronSumOperator::new(&vec![n; d])?;
    for i in 0..d {
        let (ip1, im1, im2) = drift_neighbours(i, d);
        // −∂_i(γ(x_{i+1})ξ(x_{i−1}) f), +∂_i(γ(x_{i−2})ξ(x_{i−1}) f), +∂_i(φ(x_i) f)
        let summands: [(f64, Vec<(usize, &[f64])>); 3] = [
            (-1.0, vec![(ip1, &g), (im1, &xi)]),
            (1.0, vec![(im2, &g), (im1, &xi)]),
            (1.0, vec![(i, &phi)]),
        ];
        for (coeff, parts) in summands {
            let mut diag: Vec<Option<Vec<f64>>> = vec![None; d];
            for (m, s) in parts {
                let slot = diag[m].get_or_insert_with(|| vec![1.0; n]);
                for (v, w) in slot.iter_mut().zip(s) {
                    *v *= w;
                }
            }
            let factors = (0..d)
                .map(|m| match (m == i, diag[m].take()) {
                    (true, Some(s)) => Factor::Dense(&d1 * diag_of(&s)),
                    (true, None) => Factor::Dense(d1.clone()),
                    (false, Some(s)) => Factor::Diagonal(s),
                    (false, None) => Factor::Identity,
                })
                .collect();
            op.push_term(coeff, factors)?;
        }
        let mut factors = vec![Factor::Identity; d];
        factors[i] = Factor::Dense(d2.clone());
        op.push_term(drift.sigma * drift.sigma / 2.0, factors)?;
    }
    Ok(op)
}

/// Drift `μ_i` at a grid point (for oracles and diagnostics).
pub fn drift_at(drift: &DriftSpec, grid: &PeriodicGrid, i: usize, idx: &[usize]) -> Result<f64> {
    let d = idx.len();
    let (ip1, im1, im2) = drift_neighbours(i, d);
    let g = drift.gamma.samples(grid)?;
    let xi = drift.xi.samples(grid)?;
    let phi = drift.phi.samples(grid)?;
    Ok((g[idx[ip1]] - g[idx[im2]]) * xi[idx[im1]] - phi[idx[i]])
}

pub fn mass(h: &HTensor, grid: &PeriodicGrid) -> Result<f64> {
    quad_integral_ht(h, grid)
}

/// Normalized `e^{sin(x₁−x₂)²} + sin(x₁+x₂)²`.
pub fn ic_2d(n: usize, shape: TreeShape) -> Result<HTensor> {
    let grid = PeriodicGrid::new(n)?;
    let x = grid.nodes();
    let t = DenseTensor::from_fn(&[n, n], |i| {
        let (a, b) = (x[i[0]], x[i[1]]);
        (a - b).sin().powi(2).exp() + (a + b).sin().powi(2)
    })?;
    let tree = DimensionTree::new(2, shape)?;
    let (h, _) = HTensor::from_dense(&t, &tree, &TruncationControl::Tolerance(1e-12 * t.norm()))?;
    normalize(h, &grid)
}

/// Normalized
/// `Σ_{j=1}^M [Π_i (sin((2j−1)x_i)+1)/2^{2(j−1)} + Π_i e^{cos(2j x_i)}/2^{2j−1}]`
/// assembled from `2M` separable terms.
pub fn ic_4d(n: usize, m: usize, shape: TreeShape) -> Result<HTensor> {
    if m == 0 {
        return Err(invalid("the initial condition needs M >= 1"));
    }
    let grid = PeriodicGrid::new(n)?;
    let tree = DimensionTree::new(4, shape)?;
    let mut parts = Vec::with_capacity(2 * m);
    for j in 1..=m {
        let jf = j as f64;
        let a = grid.sample(|x| ((2.0 * jf - 1.0) * x).sin() + 1.0);
        let b = grid.sample(|x| (2.0 * jf * x).cos().exp());
        let ca = 0.5f64.powi(2 * (j as i32 - 1));
        let cb = 0.5f64.powi(2 * j as i32 - 1);
        parts.push((ca, HTensor::rank_one(tree.clone(), &[&a, &a, &a, &a])?));
        parts.push((cb, HTensor::rank_one(tree.clone(), &[&b, &b, &b, &b])?));
    }
    let refs: Vec<(f64, &HTensor)> = parts.iter().map(|(c, h)| (*c, h)).collect();
    normalize(HTensor::sum(&refs)?, &grid)
}

fn normalize(h: HTensor, grid: &PeriodicGrid) -> Result<HTensor> {
    let m0 = mass(&h, grid)?;
    if !(m0.abs() > 0.0) {
        return Err(Error::Numerical("initial condition has zero mass".into()));
    }
    Ok(h.scale(1.0 / m0))
}

/// `f₁₂(x₁, x₂) = ∫∫ f dx₃ dx₄` on the grid.
pub fn marginal_12(h: &HTensor, grid: &PeriodicGrid) -> Result<Matrix> {
    if h.order() != 4 {
        return Err(invalid(format!("marginal needs a 4-way tensor, got order {}", h.order())));
    }
    if h.dims().iter().any(|&k| k != grid.n()) {
        return Err(invalid("tensor dims do not match the grid"));
    }
    let w = vec![grid.spacing(); grid.n()];
    let c = h.contract_modes(&[None, None, Some(&w), Some(&w)])?;
    let t = c.to_dense()?;
    Ok(Matrix::from_column_slice(grid.n(), grid.n(), t.data()))
}

/// A fully assembled problem.
#[derive(Clone, Debug)]
pub struct FpProblem {
    pub name: String,
    pub grid: PeriodicGrid,
    pub drift: DriftSpec,
    pub operator: KronSumOperator,
    pub f0: HTensor,
}

impl FpProblem {
    pub fn d(&self) -> usize {
        self.f0.order()
    }

    pub fn new(name: &str, d: usize, n: usize, drift: DriftSpec, f0: HTensor) -> Result<Self> {
        let grid = PeriodicGrid::new(n)?;
        if f0.dims() != vec![n; d].as_slice() {
            return Err(invalid("initial condition does not match the grid"));
        }
        Ok(Self {
            name: name.to_string(),
            grid,
            operator: build_fp_operator(d, n, &drift)?,
            drift,
            f0,
        })
    }

    /// `fp2d-paper` (default n = 50) or `fp4d-paper` (default n = 20, M = 10).
    pub fn preset(name: &str, n: Option<usize>, shape: TreeShape) -> Result<Self> {
        match name {
            "fp2d-paper" => {
                let n = n.unwrap_or(50);
                Self::new(name, 2, n, DriftSpec::paper_2d(), ic_2d(n, shape)?)
            }
            "fp4d-paper" => {
                let n = n.unwrap_or(20);
                Self::new(name, 4, n, DriftSpec::paper_4d(), ic_4d(n, 10, shape)?)
            }
            other => Err(Error::Config(format!("unknown problem preset `{other}`"))),
        }
    }

    pub fn l2_norm_dense(&self, t: &DenseTensor) -> f64 {
        self.grid.l2_factor(t.order()) * t.norm()
    }

    /// Volume of the periodic domain, for reference.
    pub fn domain_volume(&self) -> f64 {
        (2.0 * PI).powi(self.d() as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::{random_dense, random_htensor, rng};
    use crate::spectral::quad_integral_dense;

    /// `−Σ_i D_i(μ_i ⊙ f) + (σ²/2) Σ_i D²_i f` with μ evaluated pointwise.
    fn pointwise_operator(drift: &DriftSpec, n: usize, f: &DenseTensor) -> DenseTensor {
        let grid = PeriodicGrid::new(n).unwrap();
        let d = f.order();
        let d1 = diff_matrix(n, 1).unwrap();
        let d2 = diff_matrix(n, 2).unwrap();
        let mut out = DenseTensor::zeros(f.dims()).unwrap();
        for i in 0..d {
            let flux = DenseTensor::from_fn(f.dims(), |idx| drift_at(drift, &grid, i, idx).unwrap() * f.get(idx)).unwrap();
            out.axpy(-1.0, &flux.mode_apply(i, &d1).unwrap()).unwrap();
            out.axpy(drift.sigma * drift.sigma / 2.0, &f.mode_apply(i, &d2).unwrap()).unwrap();
        }
        out
    }

    #[test]
    fn term_counts() {
        for d in [2, 3, 4] {
            let op = build_fp_operator(d, 8, &DriftSpec::paper_4d()).unwrap();
            assert_eq!(op.term_count(), 4 * d);
        }
    }

    #[test]
    fn two_dimensional_wrap_table() {
        assert_eq!(drift_neighbours(0, 2), (1, 1, 0));
        assert_eq!(drift_neighbours(1, 2), (0, 0, 1));
        assert_eq!(drift_neighbours(0, 4), (1, 3, 2));
        assert_eq!(drift_neighbours(3, 4), (0, 2, 1));
        let grid = PeriodicGrid::new(8).unwrap();
        let drift = DriftSpec::paper_2d();
        let x = grid.nodes();
        for a in 0..8 {
            for b in 0..8 {
                let want = (x[b].sin() - x[a].sin()) * x[b].cos() - (x[a].sin().exp() + 1.0);
                assert!((drift_at(&drift, &grid, 0, &[a, b]).unwrap() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_drift_annihilates_constants() {
        let op = build_fp_operator(3, 8, &DriftSpec::zero(2.0)).unwrap();
        let c = DenseTensor::from_vec(&[8, 8, 8], vec![0.3; 512]).unwrap();
        assert!(op.apply_dense(&c).unwrap().norm() < 1e-11);
    }

    #[test]
    fn matches_pointwise_drift_oracle() {
        for (d, drift) in [(2, DriftSpec::paper_2d()), (3, DriftSpec::paper_4d()), (4, DriftSpec::paper_4d())] {
            let n = if d == 2 { 16 } else { 6 };
            let f = random_dense(&mut rng(70 + d as u64), &vec![n; d]);
            let op = build_fp_operator(d, n, &drift).unwrap();
            let got = op.apply_dense(&f).unwrap();
            let want = pointwise_operator(&drift, n, &f);
            let e = DenseTensor::linear_combine(1.0, &got, -1.0, &want).unwrap().norm();
            assert!(e <= 1e-11 * want.norm(), "d={d}: {e:e}");
        }
    }

    #[test]
    fn semi_discrete_mass_conservation() {
        let grid = PeriodicGrid::new(10).unwrap();
        let op = build_fp_operator(3, 10, &DriftSpec::paper_4d()).unwrap();
        let f = random_dense(&mut rng(71), &[10, 10, 10]);
        let m = quad_integral_dense(&op.apply_dense(&f).unwrap(), &grid).unwrap();
        assert!(m.abs() <= 1e-10 * f.norm());
    }

    #[test]
    fn odd_grid_and_unknown_names_rejected() {
        assert!(build_fp_operator(2, 15, &DriftSpec::paper_2d()).is_err());
        assert!("tanh".parse::<DriftFn>().is_err());
        assert_eq!("exp_cos".parse::<DriftFn>().unwrap(), DriftFn::ExpCos);
        assert!(FpProblem::preset("fp3d", None, TreeShape::Balanced).is_err());
    }

    #[test]
    fn ic_2d_normalized_and_positive() {
        let n = 50;
        let grid = PeriodicGrid::new(n).unwrap();
        let h = ic_2d(n, TreeShape::Balanced).unwrap();
        assert!((mass(&h, &grid).unwrap() - 1.0).abs() < 1e-10);
        let t = h.to_dense().unwrap();
        assert!(t.data().iter().all(|&v| v > 0.0));
        let x = grid.nodes();
        let m0: f64 = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| (x[a] - x[b]).sin().powi(2).exp() + (x[a] + x[b]).sin().powi(2))
            .sum::<f64>()
            * grid.cell_volume(2);
        assert!((t.get(&[0, 0]) - 1.0 / m0).abs() < 1e-12 / m0);
    }

    #[test]
    fn ic_4d_ranks_and_mass() {
        let grid = PeriodicGrid::new(12).unwrap();
        let h1 = ic_4d(12, 1, TreeShape::Balanced).unwrap();
        assert!(h1.max_rank() <= 2);
        let h = ic_4d(12, 10, TreeShape::Balanced).unwrap();
        assert!(h.max_rank() <= 20);
        assert!((mass(&h, &grid).unwrap() - 1.0).abs() < 1e-10);
        assert!((mass(&h1, &grid).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn marginal_of_product_density() {
        let n = 8;
        let grid = PeriodicGrid::new(n).unwrap();
        let tree = DimensionTree::balanced(4).unwrap();
        let g1 = grid.sample(|x| 1.0 + 0.5 * x.sin());
        let g2 = grid.sample(|x| 2.0 + x.cos());
        let u = vec![1.0 / (2.0 * PI); n];
        let h = HTensor::rank_one(tree, &[&g1, &g2, &u, &u]).unwrap();
        let m = marginal_12(&h, &grid).unwrap();
        for a in 0..n {
            for b in 0..n {
                assert!((m[(a, b)] - g1[a] * g2[b]).abs() < 1e-13);
            }
        }
        let hn = ic_4d(n, 2, TreeShape::Balanced).unwrap();
        let mm = marginal_12(&hn, &grid).unwrap();
        assert!((mm.sum() * grid.cell_volume(2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn marginal_matches_dense_sum() {
        let n = 6;
        let grid = PeriodicGrid::new(n).unwrap();
        let h = random_htensor(&mut rng(72), &[n; 4], 3);
        let t = h.to_dense().unwrap();
        let m = marginal_12(&h, &grid).unwrap();
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    for e in 0..n {
                        s += t.get(&[a, b, c, e]);
                    }
                }
                s *= grid.cell_volume(2);
                assert!((m[(a, b)] - s).abs() < 1e-12 * s.abs().max(1.0));
            }
        }
        let h2 = random_htensor(&mut rng(73), &[n; 3], 2);
        assert!(marginal_12(&h2, &grid).is_err());
    }

    #[test]
    fn mass_matches_dense() {
        let grid = PeriodicGrid::new(6).unwrap();
        let h = random_htensor(&mut rng(74), &[6, 6, 6], 2);
        let want = quad_integral_dense(&h.to_dense().unwrap(), &grid).unwrap();
        assert!((mass(&h, &grid).unwrap() - want).abs() < 1e-12 * want.abs().max(1.0));
        let z = HTensor::zeros(DimensionTree::balanced(3).unwrap(), &[6, 6, 6]).unwrap();
        assert_eq!(mass(&z, &grid).unwrap(), 0.0);
    }
}
