//! Binary container for HT tensors (checkpoints, final states).
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "HTSTHTK1"
//! d        u32
//! shape    u8       0 = balanced, 1 = linear
//! dims     d x u64
//! per node in preorder:
//!   kind   u8       0 = leaf, 1 = transfer
//!   leaf:     rows u64, cols u64, rows*cols f64 (column-major)
//!   transfer: left u64, right u64, rank u64, left*right*rank f64
//!             (the (left*right) x rank matricization, column-major)
//! ```

use std::io::{Read, Write};

use super::{DimensionTree, HTensor, NodeData, Transfer, TreeShape};
use crate::error::{Error, Result};
use crate::tensor::{read_f64, read_u32, read_u64, Matrix};

const MAGIC: &[u8; 8] = b"HTSTHTK1";

fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> Result<()> {
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix> {
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= crate::tensor::dense_budget())
        .ok_or_else(|| Error::Format("matrix block too large".into()))?;
    let data = (0..len).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_vec(rows, cols, data))
}

impl HTensor {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.order() as u32).to_le_bytes())?;
        w.write_all(&[match self.tree().shape() {
            TreeShape::Balanced => 0u8,
            TreeShape::Linear => 1u8,
        }])?;
        for &n in self.dims() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for node in &self.nodes {
            match node {
                NodeData::Leaf(u) => {
                    w.write_all(&[0u8])?;
                    w.write_all(&(u.nrows() as u64).to_le_bytes())?;
                    w.write_all(&(u.ncols() as u64).to_le_bytes())?;
                    write_matrix(&mut w, u)?;
                }
                NodeData::Transfer(b) => {
                    w.write_all(&[1u8])?;
                    for n in [b.left, b.right, b.rank()] {
                        w.write_all(&(n as u64).to_le_bytes())?;
                    }
                    write_matrix(&mut w, &b.mat)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an HT container".into()));
        }
        let d = read_u32(&mut r)? as usize;
        let mut shape = [0u8; 1];
        r.read_exact(&mut shape)?;
        let shape = match shape[0] {
            0 => TreeShape::Balanced,
            1 => TreeShape::Linear,
            s => return Err(Error::Format(format!("unknown tree shape tag {s}"))),
        };
        let tree = DimensionTree::new(d, shape).map_err(|e| Error::Format(e.to_string()))?;
        let dims = (0..d)
            .map(|_| read_u64(&mut r).map(|n| n as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut nodes = Vec::with_capacity(tree.len());
        for _ in 0..tree.len() {
            let mut kind = [0u8; 1];
            r.read_exact(&mut kind)?;
            nodes.push(match kind[0] {
                0 => {
                    let rows = read_u64(&mut r)? as usize;
                    let cols = read_u64(&mut r)? as usize;
                    NodeData::Leaf(read_matrix(&mut r, rows, cols)?)
                }
                1 => {
                    let left = read_u64(&mut r)? as usize;
                    let right = read_u64(&mut r)? as usize;
                    let rank = read_u64(&mut r)? as usize;
                    let mat = read_matrix(&mut r, left * right, rank)?;
                    NodeData::Transfer(Transfer::new(left, right, mat)?)
                }
                k => return Err(Error::Format(format!("unknown node kind {k}"))),
            });
        }
        HTensor::new(tree, &dims, nodes).map_err(|e| Error::Format(e.to_string()))
    }

    /// Size in bytes of the container produced by [`HTensor::write_to`].
    pub fn serialized_len(&self) -> usize {
        let header = 8 + 4 + 1 + 8 * self.order();
        let per_node: usize = self
            .nodes
            .iter()
            .map(|n| match n {
                NodeData::Leaf(_) => 1 + 16,
                NodeData::Transfer(_) => 1 + 24,
            })
            .sum();
        header + per_node + 8 * self.storage_len()
    }
}
