use std::io;

use crate::grid::LevelIndex;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("degenerate diffusion at y = {y}: transformed variance must be positive")]
    DegenerateDiffusion { y: f64 },
    #[error("grid too small: need at least {needed} nodes along {axis}, have {have}")]
    GridTooSmall {
        axis: &'static str,
        needed: usize,
        have: usize,
    },
    #[error("refinement level {level} overflows the node count")]
    LevelOverflow { level: u32 },
    #[error("evaluation region contains no grid nodes")]
    EmptyRegion,
    #[error("non-finite value at node ({i}, {j}) during {stage}")]
    NonFinite { stage: &'static str, i: usize, j: usize },
    #[error("singular tridiagonal system: zero pivot at row {row}")]
    Singular { row: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("combination plan for n = {n} is empty after exclusion; minimal admissible level is {minimal}")]
    EmptyPlan { n: u32, minimal: u32 },
    #[error("sub-solve for level {level} failed: {source}")]
    SubSolve {
        level: LevelIndex,
        #[source]
        source: Box<Error>,
    },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("model not supported by this routine: {0}")]
    UnsupportedModel(&'static str),
    #[error("malformed grid field data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
