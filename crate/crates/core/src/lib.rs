//! Certified reasoning over CNF-XOR-BNN formulas.
//!
//! The crate bundles a CDCL solver with native propagation for conditional
//! cardinality (BNN) constraints and Gauss-Jordan XOR reasoning, FRAT-style
//! proof logging, an elaborator producing XLRUP proofs, an independent XLRUP
//! checker, a hashing-based approximate model counter with certificates and
//! a certificate checker, plus an encoder for BNN robustness queries.

pub mod certify;
pub mod check;
pub mod count;
pub mod elaborate;
pub mod encode;
pub mod formula;
pub mod proof;
pub mod solver;

pub use formula::{Assignment, BnnConstraint, Clause, Formula, Lit, Var, XorConstraint};
pub use solver::{Solver, SolverConfig, Verdict};
