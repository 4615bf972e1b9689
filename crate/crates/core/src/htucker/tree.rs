use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::ModeSet;

/// How modes are split at each internal node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeShape {
    /// Split `{lo..hi}` into its first `ceil(len/2)` modes and the rest.
    #[default]
    Balanced,
    /// Peel off the first mode at every level (tensor-train-like).
    Linear,
}

impl std::str::FromStr for TreeShape {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "linear" => Ok(Self::Linear),
            other => Err(invalid(format!("unknown tree shape {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// Contiguous range of (zero-based) modes below this node.
    pub modes: Range<usize>,
    pub children: Option<(usize, usize)>,
    pub parent: Option<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn mode_set(&self) -> ModeSet {
        ModeSet::range(self.modes.start, self.modes.end)
    }
}

/// Binary dimension tree over modes `0..d`. Node 0 is the root; nodes are
/// stored in preorder, so every parent precedes its children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionTree {
    shape: TreeShape,
    nodes: Vec<TreeNode>,
    leaf_of_mode: Vec<usize>,
}

impl DimensionTree {
    pub fn new(d: usize, shape: TreeShape) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("a dimension tree needs d >= 2, got {d}")));
        }
        let mut tree = Self {
            shape,
            nodes: Vec::with_capacity(2 * d - 1),
            leaf_of_mode: vec![0; d],
        };
        tree.grow(0..d, None, 0);
        Ok(tree)
    }

    pub fn balanced(d: usize) -> Result<Self> {
        Self::new(d, TreeShape::Balanced)
    }

    fn grow(&mut self, modes: Range<usize>, parent: Option<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            modes: modes.clone(),
            children: None,
            parent,
            depth,
        });
        if modes.len() == 1 {
            self.leaf_of_mode[modes.start] = id;
            return id;
        }
        let split = match self.shape {
            TreeShape::Balanced => modes.start + modes.len().div_ceil(2),
            TreeShape::Linear => modes.start + 1,
        };
        let l = self.grow(modes.start..split, Some(id), depth + 1);
        let r = self.grow(split..modes.end, Some(id), depth + 1);
        self.nodes[id].children = Some((l, r));
        id
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn order(&self) -> usize {
        self.leaf_of_mode.len()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub const ROOT: usize = 0;

    pub fn leaf_of_mode(&self, k: usize) -> usize {
        self.leaf_of_mode[k]
    }

    pub fn non_root_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Children before parents.
    pub fn postorder(&self) -> impl Iterator<Item = usize> {
        (0..self.nodes.len()).rev()
    }

    /// Layers from the root downwards; `layers()[0] == [ROOT]`.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let depth = self.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let mut layers = vec![Vec::new(); depth + 1];
        for (id, n) in self.nodes.iter().enumerate() {
            layers[n.depth].push(id);
        }
        layers
    }

    /// Largest admissible node ranks not exceeding `cap`: each non-root rank is
    /// bounded by the sizes of both sides of its matricization and the
    /// nestedness constraints between parents and children.
    pub fn admissible_ranks(&self, dims: &[usize], cap: usize) -> Vec<usize> {
        let total: usize = dims.iter().product();
        let mut ranks: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| {
                let inside: usize = dims[n.modes.clone()].iter().product();
                cap.max(1).min(inside).min(total / inside)
            })
            .collect();
        ranks[Self::ROOT] = 1;
        for _ in 0..self.nodes.len() {
            let mut changed = false;
            for id in 0..self.nodes.len() {
                if let Some((l, r)) = self.nodes[id].children {
                    let bound = ranks[l] * ranks[r];
                    if id != Self::ROOT && ranks[id] > bound {
                        ranks[id] = bound;
                        changed = true;
                    }
                    for (c, s) in [(l, r), (r, l)] {
                        let bound = ranks[s] * ranks[id];
                        if ranks[c] > bound {
                            ranks[c] = bound;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        ranks
    }
}
