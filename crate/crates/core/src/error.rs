use thiserror::Error;

use crate::tree::NodeId;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("malformed tree: {0}")]
    InvalidTree(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("function does not fit the tree: {0}")]
    ShapeMismatch(String),
    #[error("argument outside its domain: {0}")]
    Domain(String),
    #[error("infeasible moment constraints: {0}")]
    Infeasible(String),
    #[error("incompatible split data: {0}")]
    IncompatibleSplit(String),
    #[error("node {0} carries no interval")]
    MissingInterval(NodeId),
}

pub type Result<T> = std::result::Result<T, Error>;
