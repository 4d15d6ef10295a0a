//! Matrix in, validated tree out.

use thiserror::Error;

use crate::matrix::{preprocess, BinaryMatrix, PreprocessReport};
use crate::redblack::RbGraph;
use crate::reduce::{reduce, ReduceError, ReductionTrace};
use crate::treebuild::{build_tree, validate_tree, BuildError, PersistentTree, Violation};

#[derive(Debug, Clone)]
pub struct Solution {
    pub preprocessed: BinaryMatrix,
    pub report: PreprocessReport,
    /// Trace in the indices of `preprocessed`.
    pub trace: ReductionTrace,
    /// Tree for the original matrix.
    pub tree: PersistentTree,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    /// The reduction succeeded but produced no valid tree.
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("lifted tree is invalid: {0}")]
    Lift(Violation),
}

impl SolveError {
    /// True when the outcome means "no persistent phylogeny".
    pub fn is_negative(&self) -> bool {
        match self {
            SolveError::Reduce(e) => e.is_abort(),
            SolveError::Build(_) | SolveError::Lift(_) => true,
        }
    }
}

pub fn solve(m: &BinaryMatrix) -> Result<Solution, SolveError> {
    let (preprocessed, report) = preprocess(m);
    let g = RbGraph::from_matrix(&preprocessed);
    let trace = reduce(&g)?;
    let tree = build_tree(&preprocessed, &trace)?.lift(m, &report);
    validate_tree(&tree, m).map_err(SolveError::Lift)?;
    Ok(Solution {
        preprocessed,
        report,
        trace,
        tree,
    })
}
