//! Hierarchical Tucker tensors.
//!
//! A tensor over a binary [`DimensionTree`] is stored as one frame per leaf
//! (an `n_k x r_k` matrix) and one transfer tensor per internal node. The
//! basis of an internal node `t` with children `l`, `r` is
//! `U_t = (U_l ⊗ U_r) B_t`, where the row index of `U_l ⊗ U_r` is
//! `i_l + N_l * i_r` (consistent with the column-major layout of
//! [`DenseTensor`]). The root has rank 1 and its basis is the vectorized tensor.

mod arith;
mod io;
mod tree;
mod truncate;

pub(crate) use arith::structured_sum;
pub use arith::{LeafFactor, StructuredTerm};
pub use tree::{DimensionTree, TreeNode, TreeShape};
pub use truncate::{Truncation, TruncationControl};

use crate::error::{invalid, Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Transfer tensor `B[a, b, c]` stored as its `(left*right) x rank`
/// matricization with row index `a + left * b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub left: usize,
    pub right: usize,
    pub mat: Matrix,
}

impl Transfer {
    pub fn new(left: usize, right: usize, mat: Matrix) -> Result<Self> {
        if mat.nrows() != left * right {
            return Err(invalid(format!(
                "transfer matrix has {} rows, expected {left}x{right}",
                mat.nrows()
            )));
        }
        Ok(Self { left, right, mat })
    }

    pub fn rank(&self) -> usize {
        self.mat.ncols()
    }

    /// Slice `B[:, :, c]` as a `left x right` matrix.
    pub fn slice(&self, c: usize) -> Matrix {
        Matrix::from_column_slice(self.left, self.right, self.mat.column(c).as_slice())
    }

    /// `B'[:, :, c] = lm * B[:, :, c] * rmᵀ` for every `c`.
    pub fn apply_children(&self, lm: &Matrix, rm: &Matrix) -> Result<Transfer> {
        if lm.ncols() != self.left || rm.ncols() != self.right {
            return Err(Error::DimensionMismatch {
                expected: vec![self.left, self.right],
                got: vec![lm.ncols(), rm.ncols()],
            });
        }
        let (ql, qr) = (lm.nrows(), rm.nrows());
        let mut out = Matrix::zeros(ql * qr, self.rank());
        let rmt = rm.transpose();
        for c in 0..self.rank() {
            let s = lm * self.slice(c) * &rmt;
            out.column_mut(c).copy_from_slice(s.as_slice());
        }
        Transfer::new(ql, qr, out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeData {
    Leaf(Matrix),
    Transfer(Transfer),
}

impl NodeData {
    pub fn rank(&self) -> usize {
        match self {
            NodeData::Leaf(u) => u.ncols(),
            NodeData::Transfer(b) => b.rank(),
        }
    }

    fn as_leaf(&self) -> &Matrix {
        match self {
            NodeData::Leaf(u) => u,
            NodeData::Transfer(_) => unreachable!("tree node kinds are validated on construction"),
        }
    }

    fn as_transfer(&self) -> &Transfer {
        match self {
            NodeData::Transfer(b) => b,
            NodeData::Leaf(_) => unreachable!("tree node kinds are validated on construction"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HTensor {
    tree: DimensionTree,
    dims: Vec<usize>,
    nodes: Vec<NodeData>,
}

impl HTensor {
    /// Assembles a tensor from per-node data, validating shapes against the tree.
    pub fn new(tree: DimensionTree, dims: &[usize], nodes: Vec<NodeData>) -> Result<Self> {
        if dims.len() != tree.order() {
            return Err(invalid(format!("{} dims for a tree over {} modes", dims.len(), tree.order())));
        }
        if dims.contains(&0) {
            return Err(invalid("dimensions must be positive"));
        }
        if nodes.len() != tree.len() {
            return Err(invalid("node count does not match the tree"));
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            match (&nodes[id], node.children) {
                (NodeData::Leaf(u), None) => {
                    if u.nrows() != dims[node.modes.start] || u.ncols() == 0 {
                        return Err(invalid(format!("leaf {id} frame has shape {:?}", u.shape())));
                    }
                }
                (NodeData::Transfer(b), Some((l, r))) => {
                    if b.left != nodes[l].rank() || b.right != nodes[r].rank() || b.rank() == 0 {
                        return Err(invalid(format!("transfer at node {id} does not match child ranks")));
                    }
                }
                _ => return Err(invalid(format!("node {id} has the wrong kind"))),
            }
        }
        if nodes[DimensionTree::ROOT].rank() != 1 {
            return Err(invalid("root rank must be 1"));
        }
        Ok(Self {
            tree,
            dims: dims.to_vec(),
            nodes,
        })
    }

    /// Builds a tensor with the given node ranks, filling every frame and
    /// transfer matrix from `fill(rows, cols)`.
    pub fn from_fn_parts(
        tree: DimensionTree,
        dims: &[usize],
        ranks: &[usize],
        mut fill: impl FnMut(usize, usize) -> Matrix,
    ) -> Result<Self> {
        if ranks.len() != tree.len() || ranks[DimensionTree::ROOT] != 1 {
            return Err(invalid("rank vector must have one entry per node and root rank 1"));
        }
        let mut nodes = Vec::with_capacity(tree.len());
        for (id, node) in tree.nodes().iter().enumerate() {
            nodes.push(match node.children {
                None => NodeData::Leaf(fill(dims[node.modes.start], ranks[id])),
                Some((l, r)) => {
                    NodeData::Transfer(Transfer::new(ranks[l], ranks[r], fill(ranks[l] * ranks[r], ranks[id]))?)
                }
            });
        }
        Self::new(tree, dims, nodes)
    }

    /// Separable tensor `v_0 ⊗ ... ⊗ v_{d-1}` with all ranks 1.
    pub fn rank_one(tree: DimensionTree, vectors: &[&[f64]]) -> Result<Self> {
        if vectors.len() != tree.order() {
            return Err(invalid("one vector per mode required"));
        }
        let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        let nodes = tree
            .nodes()
            .iter()
            .map(|n| match n.children {
                None => NodeData::Leaf(Matrix::from_column_slice(dims[n.modes.start], 1, vectors[n.modes.start])),
                Some(_) => NodeData::Transfer(Transfer::new(1, 1, Matrix::from_element(1, 1, 1.0)).unwrap()),
            })
            .collect();
        Self::new(tree, &dims, nodes)
    }

    /// The zero tensor, represented with rank 1 everywhere and unit frames.
    pub fn zeros(tree: DimensionTree, dims: &[usize]) -> Result<Self> {
        let units: Vec<Vec<f64>> = dims
            .iter()
            .map(|&n| {
                let mut e = vec![0.0; n];
                e[0] = 1.0;
                e
            })
            .collect();
        let refs: Vec<&[f64]> = units.iter().map(|v| v.as_slice()).collect();
        let mut h = Self::rank_one(tree, &refs)?;
        h.scale_in_place(0.0);
        Ok(h)
    }

    pub fn tree(&self) -> &DimensionTree {
        &self.tree
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn node_data(&self, id: usize) -> &NodeData {
        &self.nodes[id]
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.nodes.iter().map(NodeData::rank).collect()
    }

    /// Largest rank over all nodes.
    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Number of stored floating-point values.
    pub fn storage_len(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                NodeData::Leaf(u) => u.len(),
                NodeData::Transfer(b) => b.mat.len(),
            })
            .sum()
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        if let NodeData::Transfer(b) = &mut self.nodes[DimensionTree::ROOT] {
            b.mat *= alpha;
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut h = self.clone();
        h.scale_in_place(alpha);
        h
    }

    /// `N_t x r_t` basis of node `t`, formed explicitly.
    pub fn node_basis(&self, id: usize) -> Result<Matrix> {
        let node = self.tree.node(id);
        match node.children {
            None => Ok(self.nodes[id].as_leaf().clone()),
            Some((l, r)) => {
                let rows: usize = self.dims[node.modes.clone()].iter().product();
                crate::tensor::check_budget(&[rows, self.nodes[id].rank()])?;
                let ul = self.node_basis(l)?;
                let ur = self.node_basis(r)?;
                let b = self.nodes[id].as_transfer();
                let urt = ur.transpose();
                let mut out = Matrix::zeros(rows, b.rank());
                for c in 0..b.rank() {
                    let m = &ul * b.slice(c) * &urt;
                    out.column_mut(c).copy_from_slice(m.as_slice());
                }
                Ok(out)
            }
        }
    }

    /// Exact contraction to a dense tensor.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        crate::tensor::check_budget(&self.dims)?;
        let root = self.node_basis(DimensionTree::ROOT)?;
        DenseTensor::from_vec(&self.dims, root.as_slice().to_vec())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.tree != other.tree {
            return Err(Error::TreeMismatch);
        }
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.clone(),
                got: other.dims.clone(),
            });
        }
        Ok(())
    }

    /// Inner product computed by contracting the two trees node by node.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let mut gram: Vec<Option<Matrix>> = vec![None; self.tree.len()];
        for id in self.tree.postorder() {
            let g = match self.tree.node(id).children {
                None => self.nodes[id].as_leaf().transpose() * other.nodes[id].as_leaf(),
                Some((l, r)) => {
                    let (gl, gr) = (gram[l].take().unwrap(), gram[r].take().unwrap());
                    let (b1, b2) = (self.nodes[id].as_transfer(), other.nodes[id].as_transfer());
                    let grt = gr.transpose();
                    let mut g = Matrix::zeros(b1.rank(), b2.rank());
                    for c2 in 0..b2.rank() {
                        let t = &gl * b2.slice(c2) * &grt;
                        let t = Matrix::from_column_slice(b1.left * b1.right, 1, t.as_slice());
                        let col = b1.mat.transpose() * t;
                        g.column_mut(c2).copy_from(&col.column(0));
                    }
                    g
                }
            };
            gram[id] = Some(g);
        }
        Ok(gram[DimensionTree::ROOT].as_ref().unwrap()[(0, 0)])
    }

    pub fn norm(&self) -> f64 {
        match self.inner(self) {
            Ok(v) if v.is_nan() => v,
            Ok(v) => v.max(0.0).sqrt(),
            Err(_) => f64::NAN,
        }
    }

    /// Replaces mode `k` by a length-1 mode holding `Σ_i w_i f[.., i, ..]`
    /// for every mode with `Some(w)`.
    pub fn contract_modes(&self, weights: &[Option<&[f64]>]) -> Result<Self> {
        if weights.len() != self.order() {
            return Err(invalid("one optional weight vector per mode required"));
        }
        let mut h = self.clone();
        for (k, w) in weights.iter().enumerate() {
            if let Some(w) = w {
                if w.len() != self.dims[k] {
                    return Err(invalid(format!("weight vector for mode {k} has the wrong length")));
                }
                let leaf = self.tree.leaf_of_mode(k);
                let u = self.nodes[leaf].as_leaf();
                let row = Matrix::from_row_slice(1, w.len(), w) * u;
                h.nodes[leaf] = NodeData::Leaf(row);
                h.dims[k] = 1;
            }
        }
        Ok(h)
    }

    /// Sum of all entries weighted by `w_k[i_k]` per mode.
    pub fn weighted_sum(&self, weights: &[&[f64]]) -> Result<f64> {
        let opts: Vec<Option<&[f64]>> = weights.iter().map(|w| Some(*w)).collect();
        let c = self.contract_modes(&opts)?;
        Ok(c.node_basis(DimensionTree::ROOT)?[(0, 0)])
    }

    /// Exact `alpha * h1 + beta * h2` with node ranks at most `r1 + r2`.
    pub fn linear_combine(alpha: f64, h1: &Self, beta: f64, h2: &Self) -> Result<Self> {
        h1.check_compatible(h2)?;
        Self::sum(&[(alpha, h1), (beta, h2)])
    }

    /// Exact linear combination of tensors sharing a tree and dims. The
    /// result comes back orthogonalized.
    pub fn sum(terms: &[(f64, &HTensor)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| invalid("empty sum"))?.1;
        for (_, h) in terms {
            first.check_compatible(h)?;
        }
        let sources: Vec<&HTensor> = terms.iter().map(|(_, h)| *h).collect();
        let structured: Vec<StructuredTerm> = terms
            .iter()
            .enumerate()
            .map(|(i, (c, _))| StructuredTerm::plain(i, *c, first.order()))
            .collect();
        arith::structured_sum(&sources, &structured, first.dims(), &[])
    }
}
