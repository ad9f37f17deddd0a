//! Error measurement, reference solutions, convergence studies and
//! independent pricing oracles.

pub mod checks;
pub mod heston;
pub mod reference;
pub mod study;

use crate::combine::interpolate_at;
use crate::error::{Error, Result};
use crate::grid::{eval_region_mask, EvalRegion, GridField};

pub use heston::heston_analytic_price;
pub use reference::{ReferenceSolution, ReferenceSpec};
pub use study::{run_study, Method, Study, StudyConfig, StudyRow};

/// Maximum of `|a − reference|` over the nodes of `a` inside `region`.
/// Reference values come from cubic interpolation, which copies nodal
/// values exactly when the grids are nested.
pub fn region_max_error(a: &GridField, reference: &GridField, region: &EvalRegion) -> Result<f64> {
    let mask = eval_region_mask(a.grid(), region)?;
    let g = a.grid();
    Ok(mask
        .iter()
        .map(|&(i, j)| (a.get(i, j) - interpolate_at(reference, g.x(i), g.y(j))).abs())
        .fold(0.0, f64::max))
}

/// `order_k = log2(e_{k−1} / e_k)`, one entry per consecutive pair.
pub fn estimate_order(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "errors",
            value: errors.len() as f64,
            expected: "at least two entries",
        });
    }
    if let Some(bad) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "error",
            value: *bad,
            expected: "positive finite errors",
        });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
