//! Pricing European options under stochastic-volatility models with a
//! high-order compact ADI scheme on full and sparse grids.

pub mod banded;
pub mod combine;
pub mod error;
pub mod grid;
pub mod harness;
pub mod model;
pub mod operators;
pub mod quadrature;
pub mod smoothing;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{Domain, EvalRegion, GridField, LevelIndex, TimeGrid, UniformGrid};
pub use model::{ModelKind, ModelParams, OptionSpec, PdeModel};
pub use stepper::{AdiParams, PreparedSolver};
