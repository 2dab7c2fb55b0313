//! Indexed dyadic lattices on the unit cube.
//!
//! A lattice is a complete 2^dim-ary tree of depth `depth`. Node `(k, i)` is
//! the `i`-th cube of generation `k`; its children are
//! `(k+1, i * 2^dim + v)` for `v` in `0..2^dim`, and in dimension one `v = 0`
//! is the left half and `v = 1` the right half. Everything is addressed
//! arithmetically, so no per-node allocation happens here; values attached to
//! nodes live in flat per-generation arrays elsewhere.
//!
//! Measures are exact: `|(k, i)| = (2^-dim)^k` is a power of two, so products
//! and quotients by node measures commute with floating-point rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Hard cap on lattice size: at most 2^24 leaves.
pub const MAX_LEAF_LOG2: u32 = 24;

/// Dimension and depth of a complete dyadic lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    dim: u32,
    depth: u32,
}

/// Address of one lattice node: generation (0 = root) and index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub generation: u32,
    pub index: u64,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { generation: 0, index: 0 };

    pub fn new(generation: u32, index: u64) -> Self {
        NodeId { generation, index }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.generation, self.index)
    }
}

impl LatticeSpec {
    /// Requires `dim >= 1` and at most 2^24 leaves.
    pub fn new(dim: u32, depth: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dim must be at least 1".into()));
        }
        if dim > MAX_LEAF_LOG2 || dim.saturating_mul(depth) > MAX_LEAF_LOG2 {
            return Err(Error::InvalidLattice(format!(
                "dim {dim} depth {depth} exceeds the cap of 2^{MAX_LEAF_LOG2} leaves"
            )));
        }
        Ok(LatticeSpec { dim, depth })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Children per internal node: 2^dim.
    pub fn arity(&self) -> u64 {
        1u64 << self.dim
    }

    pub fn leaf_count(&self) -> u64 {
        1u64 << (self.dim * self.depth)
    }

    /// Number of nodes at generation `k`.
    pub fn generation_size(&self, k: u32) -> Result<u64> {
        if k > self.depth {
            return Err(Error::GenerationOutOfRange { generation: k, depth: self.depth });
        }
        Ok(1u64 << (self.dim * k))
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.generation <= self.depth
            && node.index < (1u64 << (self.dim * node.generation))
    }

    pub fn validate(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, dim: self.dim, depth: self.depth })
        }
    }

    /// Lebesgue measure of the node's cube, exact in floating point.
    pub fn measure<T: Scalar>(&self, node: NodeId) -> Result<T> {
        self.validate(node)?;
        Ok(real::<T>(2.0).powi(-((self.dim * node.generation) as i32)))
    }

    /// `Ok(None)` for the root.
    pub fn parent(&self, node: NodeId) -> Result<Option<NodeId>> {
        self.validate(node)?;
        if node.generation == 0 {
            return Ok(None);
        }
        Ok(Some(NodeId::new(node.generation - 1, node.index >> self.dim)))
    }

    pub fn child(&self, node: NodeId, v: u64) -> Result<NodeId> {
        self.validate(node)?;
        if node.generation == self.depth {
            return Err(Error::NoChildren(node));
        }
        if v >= self.arity() {
            return Err(Error::InvalidLattice(format!(
                "child selector {v} out of range for arity {}",
                self.arity()
            )));
        }
        Ok(NodeId::new(node.generation + 1, (node.index << self.dim) + v))
    }

    /// All 2^dim children, in index order.
    pub fn children(&self, node: NodeId) -> Result<Vec<NodeId>> {
        self.validate(node)?;
        if node.generation == self.depth {
            return Err(Error::NoChildren(node));
        }
        let base = node.index << self.dim;
        Ok((0..self.arity())
            .map(|v| NodeId::new(node.generation + 1, base + v))
            .collect())
    }

    pub fn nodes_at_generation(&self, k: u32) -> Result<impl Iterator<Item = NodeId>> {
        let size = self.generation_size(k)?;
        Ok((0..size).map(move |i| NodeId::new(k, i)))
    }

    /// Indices of the finest-generation leaves below `node`.
    pub fn leaf_range(&self, node: NodeId) -> Result<std::ops::Range<u64>> {
        self.validate(node)?;
        let shift = self.dim * (self.depth - node.generation);
        Ok((node.index << shift)..((node.index + 1) << shift))
    }
}
