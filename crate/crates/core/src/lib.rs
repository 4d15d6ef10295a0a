//! Persistent phylogenies for binary character matrices.
//!
//! A matrix of species × characters, with some characters already present
//! at the root, has a persistent phylogeny when every character can be
//! gained at most once and lost at most once along a rooted tree. The
//! solver works on the red-black graph of the matrix and reduces it one
//! character at a time; [`oracle`] provides an independent brute-force check.

pub mod cli;
pub mod hasse;
pub mod matrix;
pub mod oracle;
pub mod pipeline;
pub mod redblack;
pub mod reduce;
pub mod treebuild;

pub use matrix::{parse_matrix, preprocess, BinaryMatrix, PreprocessReport};
pub use pipeline::{solve, Solution, SolveError};
pub use redblack::{CReduction, RbGraph, Sign, SignedCharacter};
pub use reduce::{reduce, ReductionTrace};
pub use treebuild::{build_tree, export_tree, validate_tree, PersistentTree, TreeFormat};
