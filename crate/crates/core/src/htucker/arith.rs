//! Exact sums of (leaf-transformed) HT tensors.
//!
//! Every term is a source tensor with a coefficient and an optional matrix
//! per mode applied to that mode's leaf frame. Terms that act identically on
//! all modes below a node share that node's block, so a Kronecker-sum
//! operator with `T` terms grows a node rank by the number of distinct
//! restrictions of the terms to that node (at most `T`), not by `T` itself.
//!
//! The result is assembled leaves-to-root with a thin QR at every node, so it
//! comes back with orthonormal non-root frames.

use std::collections::HashMap;

use nalgebra::DVector;

use super::{DimensionTree, HTensor, NodeData, Transfer};
use crate::error::{invalid, Result};
use crate::linalg::qr;
use crate::tensor::Matrix;

/// Per-mode factor applied to a leaf frame.
#[derive(Clone, Debug, PartialEq)]
pub enum LeafFactor {
    Diagonal(Vec<f64>),
    Dense(Matrix),
}

impl LeafFactor {
    pub fn apply(&self, u: &Matrix) -> Matrix {
        match self {
            LeafFactor::Diagonal(d) => Matrix::from_diagonal(&DVector::from_column_slice(d)) * u,
            LeafFactor::Dense(a) => a * u,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LeafFactor::Diagonal(d) => d.len(),
            LeafFactor::Dense(a) => a.nrows(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredTerm {
    pub source: usize,
    pub coeff: f64,
    /// Index into the factor table per mode; `None` is the identity.
    pub factors: Vec<Option<usize>>,
}

impl StructuredTerm {
    pub fn plain(source: usize, coeff: f64, order: usize) -> Self {
        Self {
            source,
            coeff,
            factors: vec![None; order],
        }
    }
}

struct NodeBlocks {
    /// Group index of every (nonzero) term at this node.
    group_of: Vec<usize>,
    /// `q x r_source` coefficient block per group.
    blocks: Vec<Matrix>,
}

pub(crate) fn structured_sum(
    sources: &[&HTensor],
    terms: &[StructuredTerm],
    out_dims: &[usize],
    factors: &[LeafFactor],
) -> Result<HTensor> {
    let first = *sources.first().ok_or_else(|| invalid("no source tensors"))?;
    let tree = first.tree().clone();
    for t in terms {
        if t.source >= sources.len() || t.factors.len() != tree.order() {
            return Err(invalid("malformed structured term"));
        }
        for (k, f) in t.factors.iter().enumerate() {
            if let Some(f) = f {
                let fac = factors.get(*f).ok_or_else(|| invalid("factor index out of range"))?;
                if fac.out_dim() != out_dims[k] {
                    return Err(invalid(format!("factor on mode {k} has the wrong size")));
                }
            } else if sources[t.source].dims()[k] != out_dims[k] {
                return Err(invalid(format!("identity on mode {k} cannot change its size")));
            }
        }
    }
    let live: Vec<&StructuredTerm> = terms.iter().filter(|t| t.coeff != 0.0).collect();
    if live.is_empty() {
        return HTensor::zeros(tree, out_dims);
    }

    let mut nodes: Vec<Option<NodeData>> = vec![None; tree.len()];
    let mut blocks: Vec<Option<NodeBlocks>> = (0..tree.len()).map(|_| None).collect();

    for id in tree.postorder() {
        let node = tree.node(id);
        match node.children {
            None => {
                let k = node.modes.start;
                let mut keys: HashMap<(usize, Option<usize>), usize> = HashMap::new();
                let mut reps: Vec<&StructuredTerm> = Vec::new();
                let group_of: Vec<usize> = live
                    .iter()
                    .map(|t| {
                        *keys.entry((t.source, t.factors[k])).or_insert_with(|| {
                            reps.push(t);
                            reps.len() - 1
                        })
                    })
                    .collect();
                let frames: Vec<Matrix> = reps
                    .iter()
                    .map(|t| {
                        let u = sources[t.source].nodes[id].as_leaf();
                        match t.factors[k] {
                            None => u.clone(),
                            Some(f) => factors[f].apply(u),
                        }
                    })
                    .collect();
                let (q, split) = qr_blocks(&frames);
                nodes[id] = Some(NodeData::Leaf(q));
                blocks[id] = Some(NodeBlocks { group_of, blocks: split });
            }
            Some((l, r)) => {
                let bl = blocks[l].take().unwrap();
                let br = blocks[r].take().unwrap();
                if id == DimensionTree::ROOT {
                    let (ql, qrk) = (bl.blocks[0].nrows(), br.blocks[0].nrows());
                    let mut m = Matrix::zeros(ql, qrk);
                    for (j, t) in live.iter().enumerate() {
                        let b = sources[t.source].nodes[id].as_transfer();
                        let s = &bl.blocks[bl.group_of[j]] * b.slice(0) * br.blocks[br.group_of[j]].transpose();
                        m += s * t.coeff;
                    }
                    let mat = Matrix::from_column_slice(ql * qrk, 1, m.as_slice());
                    nodes[id] = Some(NodeData::Transfer(Transfer::new(ql, qrk, mat)?));
                } else {
                    let mut keys: HashMap<(usize, usize, usize), usize> = HashMap::new();
                    let mut reps: Vec<(usize, usize, usize)> = Vec::new();
                    let group_of: Vec<usize> = live
                        .iter()
                        .enumerate()
                        .map(|(j, t)| {
                            let key = (t.source, bl.group_of[j], br.group_of[j]);
                            *keys.entry(key).or_insert_with(|| {
                                reps.push(key);
                                reps.len() - 1
                            })
                        })
                        .collect();
                    let mut ql = 0;
                    let mut qrk = 0;
                    let coeffs: Vec<Matrix> = reps
                        .iter()
                        .map(|&(src, gl, gr)| {
                            let b = sources[src].nodes[id].as_transfer();
                            let t = b.apply_children(&bl.blocks[gl], &br.blocks[gr]).expect("block shapes agree");
                            ql = t.left;
                            qrk = t.right;
                            t.mat
                        })
                        .collect();
                    let (q, split) = qr_blocks(&coeffs);
                    nodes[id] = Some(NodeData::Transfer(Transfer::new(ql, qrk, q)?));
                    blocks[id] = Some(NodeBlocks { group_of, blocks: split });
                }
            }
        }
    }
    HTensor::new(tree, out_dims, nodes.into_iter().map(Option::unwrap).collect())
}

/// QR of the horizontal concatenation of `parts`; returns `Q` and the column
/// blocks of `R` matching each part.
fn qr_blocks(parts: &[Matrix]) -> (Matrix, Vec<Matrix>) {
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut all = Matrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        all.columns_mut(at, p.ncols()).copy_from(p);
        at += p.ncols();
    }
    let (q, r) = qr(&all);
    let mut split = Vec::with_capacity(parts.len());
    let mut at = 0;
    for p in parts {
        split.push(r.columns(at, p.ncols()).into_owned());
        at += p.ncols();
    }
    (q, split)
}
