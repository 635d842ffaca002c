//! Numerical laboratory for sharp two-weight estimates of fractional maximal
//! operators on tree-structured probability spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`tree`]: finite probability trees and their builders.
//! * [`maximal`]: averages, the fractional maximal operator and its linearization.
//! * [`weights`]: weight pairs, the testing constant, Carleson sequences and the
//!   main two-weight inequality.
//! * [`constants`]: the sharp constant `C(p, q)` and exponent bookkeeping.
//! * [`bellman`]: step functions, the Bliss functional and constructive checks of
//!   the Bellman function properties.
//! * [`sharpness`]: the power-law extremal construction on the prefix tree.
//! * [`fuzz`]: seeded random instances shared by the test suites and the CLI.

pub mod bellman;
pub mod constants;
pub mod error;
pub mod fuzz;
pub mod maximal;
pub mod quad;
pub mod sharpness;
pub mod tree;
pub mod weights;

pub use constants::{cpq, sharpness_regime, Exponents};
pub use error::{Error, Result};
pub use maximal::{Linearization, SimpleFunction};
pub use tree::{Interval, NodeId, TreeNode, TreeSpace};
pub use weights::{CarlesonSequence, InequalityCheck, WeightPair};

/// Relative tolerance used by all one-sided inequality checks.
pub const CMP_REL_TOL: f64 = 1e-9;
/// Absolute floor paired with [`CMP_REL_TOL`].
pub const CMP_ABS_FLOOR: f64 = 1e-12;

/// `lhs <= rhs` up to the crate-wide comparison tolerance.
pub fn le_tol(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + CMP_REL_TOL * rhs.abs().max(lhs.abs()) + CMP_ABS_FLOOR
}
