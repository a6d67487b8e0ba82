//! Survival modelling: Harrell's C-index, Cox regression, Lasso-Cox and the
//! univariate → correlation → Lasso selection cascade.

mod cindex;
mod cox;
mod lasso;
mod selection;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cindex::concordance_index;
pub use cox::{cox_fit, cox_fit_with, cox_log_likelihood, CoxModel, CoxOptions, Standardization, Ties};
pub use lasso::{lambda_grid, lambda_max, lasso_cox, lasso_path, LassoConfig, LassoResult};
pub use selection::{correlation_prune, pearson, univariate_filter, SelectionReport, SelectionThresholds};

/// Recurrence-free survival time (> 0) with event indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` when recurrence was observed, `false` when censored.
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::Invalid(format!(
                "survival time must be finite and > 0, got {time}"
            )));
        }
        Ok(Self { time, event })
    }
}

/// Columns of a row-major patients × features matrix.
pub(crate) fn columns(rows: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}
