//! Per-model optimism estimation: K-fold cross-validation and the AICc
//! parameter-count penalty.

use alloc::vec::Vec;
use core::fmt;

use crate::folds::FoldPlan;
use crate::regression::RegressionDataset;
use crate::types::Error;

/// A fitted predictor that can score and point-predict single observations.
pub trait FittedPredictor {
    /// Natural-log predictive density of response `y` at input row `x`.
    fn log_density(&self, x: &[f64], y: f64) -> f64;
    /// Point prediction (predictive mean) at input row `x`.
    fn predictive_mean(&self, x: &[f64]) -> f64;
}

/// A fitting capability: given a row subset of a dataset, produce a fitted
/// predictor. `fit` must be deterministic given the same rows.
pub trait ModelAdapter {
    type Fitted: FittedPredictor;
    type Error: fmt::Display + fmt::Debug;

    fn fit(&self, data: &RegressionDataset, rows: &[usize]) -> Result<Self::Fitted, Self::Error>;
}

/// Error from [`cv_optimism`]: a fit failure, tagged with the fold it occurred
/// in (`None` for the full-data fit), or an invalid input.
#[derive(Debug)]
pub enum CvError<E> {
    Fit { fold: Option<usize>, source: E },
    Invalid(Error),
}

impl<E: fmt::Display> fmt::Display for CvError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvError::Fit {
                fold: Some(j),
                source,
            } => write!(f, "fit failed on complement of fold {j}: {source}"),
            CvError::Fit { fold: None, source } => write!(f, "full-data fit failed: {source}"),
            CvError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

/// Result of [`cv_optimism`] for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOptimism {
    /// Estimated optimism: held-out negative log score minus full-fit
    /// negative log score, summed over all observations.
    pub optimism: f64,
    /// Per-observation log density under the full-data fit. Callers assemble
    /// the log-density matrix from this column rather than refitting.
    pub full_fit_log_density: Vec<f64>,
    /// Per-observation log density under the fit that excludes the
    /// observation's fold.
    pub heldout_log_density: Vec<f64>,
}

/// Estimates one model's optimism by K-fold cross-validation.
///
/// Each observation is scored by the model fit without its fold and by the
/// full-data fit; the optimism estimate is the difference of the two summed
/// negative log scores.
pub fn cv_optimism<A: ModelAdapter>(
    adapter: &A,
    data: &RegressionDataset,
    plan: &FoldPlan,
) -> Result<CvOptimism, CvError<A::Error>> {
    let n = plan.n();
    if data.n() != n {
        return Err(CvError::Invalid(Error::DimensionMismatch {
            what: "fold plan",
            expected: data.n(),
            got: n,
        }));
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let full = adapter
        .fit(data, &all_rows)
        .map_err(|source| CvError::Fit { fold: None, source })?;
    let full_fit_log_density: Vec<f64> = (0..n)
        .map(|i| full.log_density(data.row(i), data.y(i)))
        .collect();

    let mut heldout_log_density = alloc::vec![0.0; n];
    for j in 0..plan.num_folds() {
        let complement = plan.complement_indices(j);
        let fitted = adapter
            .fit(data, &complement)
            .map_err(|source| CvError::Fit {
                fold: Some(j),
                source,
            })?;
        for i in plan.fold_indices(j) {
            heldout_log_density[i] = fitted.log_density(data.row(i), data.y(i));
        }
    }

    let optimism = full_fit_log_density
        .iter()
        .zip(&heldout_log_density)
        .map(|(&f, &h)| f - h)
        .sum();

    Ok(CvOptimism {
        optimism,
        full_fit_log_density,
        heldout_log_density,
    })
}

/// Small-sample-corrected AIC penalty: `c + c(c+1)/(n - c - 1)` for a model
/// with `num_params` parameters fit to `n` observations.
pub fn aicc_penalty(num_params: usize, n: usize) -> Result<f64, Error> {
    if n <= num_params + 1 {
        return Err(Error::AiccDomain { num_params, n });
    }
    let c = num_params as f64;
    Ok(c + c * (c + 1.0) / (n as f64 - c - 1.0))
}
