//! Distributed tree kernels.
//!
//! Trees are encoded once, in time linear in their size, into dense vectors
//! whose dot product approximates the classic tree kernel. The crate also
//! ships the exact kernels and the brute-force oracles used to check the
//! approximation, plus an experiment harness.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dtk;
pub mod embedding;
pub mod format;
pub mod tk;
pub mod tree;

pub use dtk::{distributed_tree, dtk, dtk_normalized, DistributedTree, DtkError, Encoder, Provenance, WeightConvention};
pub use embedding::{CompositionKind, CompositionSpec, DenseVector, NodeLexicon};
pub use tk::{tk_exact, tk_fast, tk_normalized};
pub use tree::{parse_tree, Label, Production, Tree};
