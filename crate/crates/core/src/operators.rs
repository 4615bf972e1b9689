//! Linear operators written as sums of Kronecker products of per-mode matrices.

use crate::error::{invalid, Error, Result};
use crate::htucker::{HTensor, LeafFactor, StructuredTerm};
use crate::linalg::svd;
use crate::tensor::{DenseTensor, Matrix};

/// A per-mode factor. Identities are never materialized.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Identity,
    Diagonal(Vec<f64>),
    Dense(Matrix),
}

impl Factor {
    fn size(&self) -> Option<(usize, usize)> {
        match self {
            Factor::Identity => None,
            Factor::Diagonal(d) => Some((d.len(), d.len())),
            Factor::Dense(a) => Some(a.shape()),
        }
    }

    fn to_leaf(&self) -> LeafFactor {
        match self {
            Factor::Identity => unreachable!("identities are not stored in the factor table"),
            Factor::Diagonal(d) => LeafFactor::Diagonal(d.clone()),
            Factor::Dense(a) => LeafFactor::Dense(a.clone()),
        }
    }

    fn spectral_norm(&self) -> f64 {
        match self {
            Factor::Identity => 1.0,
            Factor::Diagonal(d) => d.iter().fold(0.0, |m, v| m.max(v.abs())),
            Factor::Dense(a) => svd(a).map(|s| s.s[0]).unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KronTerm {
    pub coeff: f64,
    /// Index into the operator's factor table per mode; `None` is the identity.
    pub factors: Vec<Option<usize>>,
}

/// `N = Σ_t c_t A_t^{(1)} ⊗ ... ⊗ A_t^{(d)}` acting on `n_1 x ... x n_d` tensors.
/// Equal factors are stored once, which lets HT application group terms
/// that agree on a subtree.
#[derive(Clone, Debug, PartialEq)]
pub struct KronSumOperator {
    dims: Vec<usize>,
    table: Vec<Factor>,
    terms: Vec<KronTerm>,
}

impl KronSumOperator {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(invalid("operator dims must be nonempty and positive"));
        }
        Ok(Self {
            dims: dims.to_vec(),
            table: Vec::new(),
            terms: Vec::new(),
        })
    }

    /// `coeff * I ⊗ ... ⊗ I`.
    pub fn identity(dims: &[usize], coeff: f64) -> Result<Self> {
        let mut op = Self::new(dims)?;
        op.push_term(coeff, vec![Factor::Identity; dims.len()])?;
        Ok(op)
    }

    pub fn push_term(&mut self, coeff: f64, factors: Vec<Factor>) -> Result<()> {
        if factors.len() != self.dims.len() {
            return Err(invalid(format!("term has {} factors for {} modes", factors.len(), self.dims.len())));
        }
        let mut idx = Vec::with_capacity(factors.len());
        for (k, f) in factors.into_iter().enumerate() {
            if let Some((r, c)) = f.size() {
                if r != self.dims[k] || c != self.dims[k] {
                    return Err(Error::DimensionMismatch {
                        expected: vec![self.dims[k], self.dims[k]],
                        got: vec![r, c],
                    });
                }
            }
            idx.push(match f {
                Factor::Identity => None,
                f => Some(match self.table.iter().position(|g| *g == f) {
                    Some(i) => i,
                    None => {
                        self.table.push(f);
                        self.table.len() - 1
                    }
                }),
            });
        }
        self.terms.push(KronTerm { coeff, factors: idx });
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn factor(&self, term: usize, mode: usize) -> &Factor {
        match self.terms[term].factors[mode] {
            Some(i) => &self.table[i],
            None => &Factor::Identity,
        }
    }

    /// Upper bound on the spectral norm: `Σ |c_t| Π_k ‖A_t^{(k)}‖₂`.
    pub fn norm_bound(&self) -> f64 {
        let norms: Vec<f64> = self.table.iter().map(Factor::spectral_norm).collect();
        self.terms
            .iter()
            .map(|t| t.coeff.abs() * t.factors.iter().flatten().map(|&i| norms[i]).product::<f64>())
            .sum()
    }

    fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if dims != self.dims.as_slice() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.clone(),
                got: dims.to_vec(),
            });
        }
        if self.terms.is_empty() {
            return Err(invalid("operator has no terms"));
        }
        Ok(())
    }

    pub fn apply_dense(&self, t: &DenseTensor) -> Result<DenseTensor> {
        self.check_dims(t.dims())?;
        let mut out = DenseTensor::zeros(t.dims())?;
        for term in &self.terms {
            if term.coeff == 0.0 {
                continue;
            }
            let mut x: Option<DenseTensor> = None;
            for (k, f) in term.factors.iter().enumerate() {
                let Some(f) = f else { continue };
                let src = x.as_ref().unwrap_or(t);
                x = Some(match &self.table[*f] {
                    Factor::Diagonal(d) => src.mode_scale(k, d)?,
                    Factor::Dense(a) => src.mode_apply(k, a)?,
                    Factor::Identity => unreachable!(),
                });
            }
            out.axpy(term.coeff, x.as_ref().unwrap_or(t))?;
        }
        Ok(out)
    }

    /// Exact application in HT format. Node ranks grow by at most the number
    /// of distinct restrictions of the terms to each subtree.
    pub fn apply_ht(&self, h: &HTensor) -> Result<HTensor> {
        self.check_dims(h.dims())?;
        let leaf: Vec<LeafFactor> = self.table.iter().map(Factor::to_leaf).collect();
        let terms: Vec<StructuredTerm> = self
            .terms
            .iter()
            .map(|t| StructuredTerm {
                source: 0,
                coeff: t.coeff,
                factors: t.factors.clone(),
            })
            .collect();
        crate::htucker::structured_sum(&[h], &terms, &self.dims, &leaf)
    }

    /// Full `N x N` matrix acting on the column-major vectorization.
    pub fn assemble(&self) -> Result<Matrix> {
        let n = crate::tensor::check_budget(&self.dims)?;
        crate::tensor::check_budget(&[n, n])?;
        let mut m = Matrix::zeros(n, n);
        for (ti, term) in self.terms.iter().enumerate() {
            // mode 0 varies fastest, so it is the rightmost Kronecker factor
            let mut kron = Matrix::from_element(1, 1, term.coeff);
            for k in (0..self.dims.len()).rev() {
                let f = match self.factor(ti, k) {
                    Factor::Identity => Matrix::identity(self.dims[k], self.dims[k]),
                    Factor::Diagonal(d) => crate::spectral::diag_of(d),
                    Factor::Dense(a) => a.clone(),
                };
                kron = kron.kronecker(&f);
            }
            m += kron;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::{random_dense, random_htensor, random_matrix, random_vec, rng};

    fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
        DenseTensor::linear_combine(1.0, a, -1.0, b).unwrap().norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    fn random_op(seed: u64, dims: &[usize], terms: usize) -> KronSumOperator {
        let mut r = rng(seed);
        let mut op = KronSumOperator::new(dims).unwrap();
        for t in 0..terms {
            let factors = dims
                .iter()
                .enumerate()
                .map(|(k, &n)| match (t + k) % 3 {
                    0 => Factor::Identity,
                    1 => Factor::Diagonal(random_vec(&mut r, n)),
                    _ => Factor::Dense(random_matrix(&mut r, n, n)),
                })
                .collect();
            op.push_term(0.5 + t as f64, factors).unwrap();
        }
        op
    }

    /// Entrywise `Σ_t c_t Π_k A(i_k, j_k) x[j]` by explicit summation.
    fn naive_apply(op: &KronSumOperator, x: &DenseTensor) -> DenseTensor {
        let dims = x.dims().to_vec();
        let mats: Vec<Vec<Matrix>> = (0..op.term_count())
            .map(|t| {
                (0..dims.len())
                    .map(|k| match op.factor(t, k) {
                        Factor::Identity => Matrix::identity(dims[k], dims[k]),
                        Factor::Diagonal(d) => Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
                        Factor::Dense(a) => a.clone(),
                    })
                    .collect()
            })
            .collect();
        DenseTensor::from_fn(&dims, |i| {
            let mut s = 0.0;
            let mut j = vec![0; dims.len()];
            loop {
                for (t, ms) in mats.iter().enumerate() {
                    let p: f64 = ms.iter().enumerate().map(|(k, m)| m[(i[k], j[k])]).product();
                    s += op.terms()[t].coeff * p * x.get(&j);
                }
                let mut k = 0;
                while k < dims.len() {
                    j[k] += 1;
                    if j[k] < dims[k] {
                        break;
                    }
                    j[k] = 0;
                    k += 1;
                }
                if k == dims.len() {
                    break;
                }
            }
            s
        })
        .unwrap()
    }

    #[test]
    fn identity_operator() {
        let t = random_dense(&mut rng(50), &[3, 4, 2]);
        let op = KronSumOperator::identity(&[3, 4, 2], 1.0).unwrap();
        assert_eq!(op.apply_dense(&t).unwrap(), t);
        let h = random_htensor(&mut rng(51), &[3, 4, 2], 2);
        let out = op.apply_ht(&h).unwrap();
        assert_eq!(out.ranks(), h.ranks());
        assert!(rel(&out.to_dense().unwrap(), &h.to_dense().unwrap()) < 1e-13);
    }

    #[test]
    fn zero_factor_gives_zero() {
        let mut op = KronSumOperator::new(&[3, 3]).unwrap();
        op.push_term(2.0, vec![Factor::Identity, Factor::Dense(Matrix::zeros(3, 3))]).unwrap();
        let t = random_dense(&mut rng(52), &[3, 3]);
        assert_eq!(op.apply_dense(&t).unwrap().norm(), 0.0);
    }

    #[test]
    fn matches_explicit_summation() {
        let op = random_op(53, &[4, 4, 4], 2);
        let t = random_dense(&mut rng(54), &[4, 4, 4]);
        assert!(rel(&op.apply_dense(&t).unwrap(), &naive_apply(&op, &t)) < 1e-13);
    }

    #[test]
    fn assembled_matrix_matches_apply() {
        let op = random_op(55, &[3, 4, 2], 3);
        let t = random_dense(&mut rng(56), &[3, 4, 2]);
        let v = op.assemble().unwrap() * nalgebra::DVector::from_column_slice(t.data());
        let want = naive_apply(&op, &t);
        let got = DenseTensor::from_vec(&[3, 4, 2], v.as_slice().to_vec()).unwrap();
        assert!(rel(&got, &want) < 1e-13);
    }

    #[test]
    fn single_term_keeps_rank_one() {
        let mut r = rng(57);
        let mut op = KronSumOperator::new(&[4, 5, 3]).unwrap();
        op.push_term(
            1.5,
            vec![Factor::Dense(random_matrix(&mut r, 4, 4)), Factor::Identity, Factor::Diagonal(random_vec(&mut r, 3))],
        )
        .unwrap();
        let h = random_htensor(&mut r, &[4, 5, 3], 1);
        assert!(op.apply_ht(&h).unwrap().ranks().iter().all(|&k| k == 1));
    }

    #[test]
    fn ht_application_matches_dense_and_bounds_ranks() {
        for (seed, dims) in [(58, vec![4, 3]), (59, vec![3, 4, 3]), (60, vec![3, 3, 3, 3])] {
            let op = random_op(seed, &dims, 4);
            let h = random_htensor(&mut rng(seed + 100), &dims, 3);
            let out = op.apply_ht(&h).unwrap();
            let want = op.apply_dense(&h.to_dense().unwrap()).unwrap();
            assert!(rel(&out.to_dense().unwrap(), &want) < 1e-11);
            for (a, b) in out.ranks().iter().zip(h.ranks()).skip(1) {
                assert!(*a <= op.term_count() * b);
            }
        }
    }

    #[test]
    fn rejects_wrong_dims() {
        let mut op = KronSumOperator::new(&[3, 3]).unwrap();
        assert!(op.push_term(1.0, vec![Factor::Identity]).is_err());
        assert!(op.push_term(1.0, vec![Factor::Identity, Factor::Diagonal(vec![1.0; 4])]).is_err());
        op.push_term(1.0, vec![Factor::Identity, Factor::Identity]).unwrap();
        assert!(op.apply_dense(&DenseTensor::zeros(&[3, 4]).unwrap()).is_err());
    }

    #[test]
    fn equal_factors_are_shared() {
        let d = Factor::Diagonal(vec![1.0, 2.0, 3.0]);
        let mut op = KronSumOperator::new(&[3, 3]).unwrap();
        op.push_term(1.0, vec![d.clone(), Factor::Identity]).unwrap();
        op.push_term(1.0, vec![Factor::Identity, d.clone()]).unwrap();
        assert_eq!(op.terms()[0].factors[0], op.terms()[1].factors[1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
                let op = random_op(seed, &[3, 4, 3], 3);
                let mut r = rng(seed + 7);
                let x = random_htensor(&mut r, &[3, 4, 3], 2);
                let y = random_htensor(&mut r, &[3, 4, 3], 2);
                let lhs = op.apply_ht(&HTensor::linear_combine(a, &x, b, &y).unwrap()).unwrap();
                let rhs = HTensor::linear_combine(a, &op.apply_ht(&x).unwrap(), b, &op.apply_ht(&y).unwrap()).unwrap();
                let (l, r) = (lhs.to_dense().unwrap(), rhs.to_dense().unwrap());
                let scale = r.norm().max(1e-8);
                prop_assert!(DenseTensor::linear_combine(1.0, &l, -1.0, &r).unwrap().norm() <= 1e-11 * scale);
            }
        }
    }
}
