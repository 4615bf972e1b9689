//! HOSVD truncation of dense and HT tensors.
//!
//! Both routes compute, for every non-root node `t`, the singular values of
//! the matricization `f^{(t)}` and project onto the leading left singular
//! subspace. Projections are applied from the root layer downwards, which
//! keeps the total error below `sqrt(Σ_t Σ_discarded σ²)`.
//!
//! In tolerance mode the budget `ε` is split evenly over the non-root nodes,
//! `ε_t = ε / sqrt(#non-root nodes)`, and each node keeps the smallest rank
//! (at least 1) whose discarded tail has root-sum-square `<= ε_t`.

use serde::{Deserialize, Serialize};

use super::{DimensionTree, HTensor, NodeData, StructuredTerm, Transfer};
use crate::error::{invalid, Error, Result};
use crate::linalg::{rank_for_tolerance, svd, tail_norm};
use crate::tensor::{DenseTensor, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationControl {
    /// Per-node rank caps (indexed like the tree's nodes; the root entry is ignored).
    FixedRank(Vec<usize>),
    /// Absolute Frobenius-norm tolerance.
    Tolerance(f64),
}

impl TruncationControl {
    /// The same cap on every node.
    pub fn uniform_rank(tree: &DimensionTree, cap: usize) -> Self {
        TruncationControl::FixedRank(vec![cap; tree.len()])
    }

    /// Quasi-optimality factor `sqrt(2d - 3)` of HOSVD truncation relative
    /// to the best approximation at the same ranks.
    pub fn quasi_optimality_factor(d: usize) -> f64 {
        ((2 * d).saturating_sub(3) as f64).sqrt()
    }

    fn validate(&self, tree: &DimensionTree) -> Result<()> {
        match self {
            TruncationControl::Tolerance(eps) if !(*eps >= 0.0) || !eps.is_finite() => {
                Err(invalid(format!("truncation tolerance must be finite and >= 0, got {eps}")))
            }
            TruncationControl::FixedRank(caps) if caps.len() != tree.len() => {
                Err(invalid("one rank cap per tree node required"))
            }
            TruncationControl::FixedRank(caps) if caps.iter().skip(1).any(|&c| c == 0) => {
                Err(invalid("rank caps must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    fn choose(&self, node: usize, s: &[f64], node_budget: f64) -> (usize, f64) {
        match self {
            TruncationControl::Tolerance(_) => rank_for_tolerance(s, node_budget),
            TruncationControl::FixedRank(caps) => {
                let k = caps[node].min(s.len()).max(1);
                (k, tail_norm(s, k))
            }
        }
    }
}

/// `ε / sqrt(#non-root nodes)`, shaved by a relative 1e-12 so that the
/// rounded root-sum-square of the node tails never exceeds `ε`.
fn node_budget(eps: f64, tree: &DimensionTree) -> f64 {
    eps / (tree.non_root_count() as f64).sqrt() * (1.0 - 1e-12)
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub tensor: HTensor,
    /// `sqrt(Σ_t Σ_discarded σ²)`, an upper bound on the true error.
    pub err_est: f64,
    pub ranks: Vec<usize>,
}

impl HTensor {
    /// Equivalent representation with orthonormal frames at all non-root nodes.
    pub fn orthogonalize(&self) -> Result<HTensor> {
        super::arith::structured_sum(&[self], &[StructuredTerm::plain(0, 1.0, self.order())], self.dims(), &[])
    }

    /// Singular values of every non-root matricization, computed on the
    /// orthogonalized representation without forming Gramians. Entry `t`
    /// holds the left singular vectors (in the coordinates of node `t`'s
    /// orthonormal basis) and the singular values; the root entry is `None`.
    fn node_spectra(&self) -> Result<Vec<Option<(Matrix, Vec<f64>)>>> {
        let tree = self.tree();
        let mut spectra: Vec<Option<(Matrix, Vec<f64>)>> = vec![None; tree.len()];
        // `weights[t]` is `U diag(s)` of node t: f^{(t)} = U_t weights[t] Wᵀ with W orthonormal.
        let mut weights: Vec<Option<Matrix>> = vec![None; tree.len()];
        weights[DimensionTree::ROOT] = Some(Matrix::from_element(1, 1, 1.0));
        for id in 0..tree.len() {
            let Some((l, r)) = tree.node(id).children else { continue };
            let b = self.nodes[id].as_transfer();
            let s = weights[id].take().unwrap();
            let c = &b.mat * s;
            let m = c.ncols();
            let (rl, rr) = (b.left, b.right);
            let cl = Matrix::from_column_slice(rl, rr * m, c.as_slice());
            let mut cr = Matrix::zeros(rr, rl * m);
            for cc in 0..m {
                for bb in 0..rr {
                    for aa in 0..rl {
                        cr[(bb, aa + rl * cc)] = c[(aa + rl * bb, cc)];
                    }
                }
            }
            for (child, mat) in [(l, cl), (r, cr)] {
                let dec = svd(&mat)?;
                let mut w = dec.u.clone();
                for (j, sv) in dec.s.iter().enumerate() {
                    w.column_mut(j).scale_mut(*sv);
                }
                weights[child] = Some(w);
                spectra[child] = Some((dec.u, dec.s));
            }
        }
        Ok(spectra)
    }

    /// Node singular values (descending), root excluded.
    pub fn singular_values(&self) -> Result<Vec<Vec<f64>>> {
        let o = self.orthogonalize()?;
        Ok(o.node_spectra()?
            .into_iter()
            .map(|s| s.map(|(_, s)| s).unwrap_or_default())
            .collect())
    }

    /// HOSVD truncation of an HT tensor.
    pub fn truncate(&self, ctrl: &TruncationControl) -> Result<Truncation> {
        ctrl.validate(self.tree())?;
        if let TruncationControl::Tolerance(eps) = ctrl {
            if *eps == 0.0 {
                return Ok(Truncation {
                    tensor: self.clone(),
                    err_est: 0.0,
                    ranks: self.ranks(),
                });
            }
        }
        let o = self.orthogonalize()?;
        let spectra = o.node_spectra()?;
        let tree = o.tree();
        let node_budget = match ctrl {
            TruncationControl::Tolerance(eps) => node_budget(*eps, tree),
            TruncationControl::FixedRank(_) => 0.0,
        };
        let mut keep: Vec<Option<Matrix>> = vec![None; tree.len()];
        let mut err2 = 0.0;
        for (id, spec) in spectra.iter().enumerate() {
            if let Some((u, s)) = spec {
                let (k, tail) = ctrl.choose(id, s, node_budget);
                err2 += tail * tail;
                keep[id] = Some(u.columns(0, k).into_owned());
            }
        }
        let mut nodes = Vec::with_capacity(tree.len());
        for (id, node) in tree.nodes().iter().enumerate() {
            nodes.push(match node.children {
                None => NodeData::Leaf(o.nodes[id].as_leaf() * keep[id].as_ref().unwrap()),
                Some((l, r)) => {
                    let b = o.nodes[id].as_transfer();
                    let xl = keep[l].as_ref().unwrap().transpose();
                    let xr = keep[r].as_ref().unwrap().transpose();
                    let mut t = b.apply_children(&xl, &xr)?;
                    if let Some(x) = &keep[id] {
                        t = Transfer::new(t.left, t.right, &t.mat * x)?;
                    }
                    NodeData::Transfer(t)
                }
            });
        }
        let tensor = HTensor::new(tree.clone(), o.dims(), nodes)?;
        let ranks = tensor.ranks();
        Ok(Truncation {
            tensor,
            err_est: err2.sqrt(),
            ranks,
        })
    }

    /// HOSVD of a dense tensor. Returns the HT tensor and the error bound
    /// `sqrt(Σ_t Σ_discarded σ²)`.
    pub fn from_dense(t: &DenseTensor, tree: &DimensionTree, ctrl: &TruncationControl) -> Result<(HTensor, f64)> {
        if t.order() != tree.order() {
            return Err(Error::DimensionMismatch {
                expected: vec![tree.order()],
                got: vec![t.order()],
            });
        }
        ctrl.validate(tree)?;
        let node_budget = match ctrl {
            TruncationControl::Tolerance(eps) => node_budget(*eps, tree),
            TruncationControl::FixedRank(_) => 0.0,
        };
        let mut bases: Vec<Option<Matrix>> = vec![None; tree.len()];
        let mut err2 = 0.0;
        for (id, node) in tree.nodes().iter().enumerate().skip(1) {
            let m = t.matricize(&node.mode_set())?;
            let dec = svd(&m)?;
            let (k, tail) = ctrl.choose(id, &dec.s, node_budget);
            err2 += tail * tail;
            bases[id] = Some(dec.u.columns(0, k).into_owned());
        }
        let dims = t.dims();
        let mut nodes = Vec::with_capacity(tree.len());
        for (id, node) in tree.nodes().iter().enumerate() {
            nodes.push(match node.children {
                None => NodeData::Leaf(bases[id].clone().unwrap()),
                Some((l, r)) => {
                    let (ul, ur) = (bases[l].as_ref().unwrap(), bases[r].as_ref().unwrap());
                    let nl: usize = dims[tree.node(l).modes.clone()].iter().product();
                    let nr: usize = dims[tree.node(r).modes.clone()].iter().product();
                    let cols: Vec<Matrix> = match &bases[id] {
                        Some(u) => (0..u.ncols())
                            .map(|c| Matrix::from_column_slice(nl, nr, u.column(c).as_slice()))
                            .collect(),
                        None => vec![Matrix::from_column_slice(nl, nr, t.data())],
                    };
                    let mut mat = Matrix::zeros(ul.ncols() * ur.ncols(), cols.len());
                    for (c, x) in cols.iter().enumerate() {
                        let p = ul.transpose() * x * ur;
                        mat.column_mut(c).copy_from_slice(p.as_slice());
                    }
                    NodeData::Transfer(Transfer::new(ul.ncols(), ur.ncols(), mat)?)
                }
            });
        }
        Ok((HTensor::new(tree.clone(), dims, nodes)?, err2.sqrt()))
    }
}
