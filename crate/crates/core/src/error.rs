//! Crate-wide error type.

use thiserror::Error;

use crate::lattice::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("node {node} out of range for lattice (dim {dim}, depth {depth})")]
    NodeOutOfRange { node: NodeId, dim: u32, depth: u32 },

    #[error("generation {generation} exceeds lattice depth {depth}")]
    GenerationOutOfRange { generation: u32, depth: u32 },

    #[error("node {0} is at the finest generation and has no children")]
    NoChildren(NodeId),

    #[error("node {0} is a leaf; operation requires an internal node")]
    LeafNode(NodeId),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("invalid atom profile: {0}")]
    InvalidAtom(String),

    #[error("infeasible family member: A = {a} must exceed mbar = {mbar}")]
    InfeasibleFamily { a: f64, mbar: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty verification grid: {0}")]
    EmptyGrid(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("pair is not admissible: {0}")]
    Inadmissible(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(&'static str),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("invalid search config: {0}")]
    InvalidConfig(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
