//! Domain types for model weighting.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Absolute tolerance on the sum-to-one constraint of [`SimplexWeights`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Errors raised by constructors and operations in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value that must be finite is NaN or infinite.
    NonFinite { what: &'static str, index: usize },
    /// Two inputs that must agree on the number of models (or rows) do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A weight vector violates the simplex constraints.
    NotOnSimplex { reason: &'static str },
    /// A configuration field is out of its admissible range.
    InvalidConfig(&'static str),
    /// KL-kind gradient requested at a boundary point.
    ZeroWeightComponent { index: usize },
    /// Overfit-ratio precondition violated: the in-sample deviance of the
    /// named model is not strictly positive.
    NonPositiveDeviance { model: usize },
    /// make_folds called with n < F or F < 2.
    BadFoldCount { n: usize, folds: usize },
    /// AICc penalty requested with n <= num_params + 1.
    AiccDomain { num_params: usize, n: usize },
    /// Empty dataset where at least one observation is required.
    EmptyData,
    /// The solver oracle returned a non-finite value or gradient.
    NonFiniteObjective,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite { what, index } => {
                write!(f, "non-finite value in {what} at index {index}")
            }
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {got}"),
            Error::NotOnSimplex { reason } => write!(f, "not a simplex vector: {reason}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::ZeroWeightComponent { index } => {
                write!(f, "KL gradient undefined: weight component {index} is zero")
            }
            Error::NonPositiveDeviance { model } => write!(
                f,
                "overfit ratio undefined: in-sample deviance of model {model} is not positive"
            ),
            Error::BadFoldCount { n, folds } => {
                write!(f, "cannot split n={n} observations into {folds} folds")
            }
            Error::AiccDomain { num_params, n } => write!(
                f,
                "AICc penalty undefined for num_params={num_params}, n={n} (need n > num_params + 1)"
            ),
            Error::EmptyData => write!(f, "empty dataset"),
            Error::NonFiniteObjective => write!(f, "solver oracle produced a non-finite value"),
        }
    }
}

impl core::error::Error for Error {}

/// n-by-K table of natural-log pointwise predictive densities, one column per
/// model. Every entry must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensityMatrix {
    values: Vec<f64>, // row-major, n * k
    n: usize,
    k: usize,
    labels: Vec<String>,
}

impl LogDensityMatrix {
    /// Builds a matrix from row-major values. `labels` names the K models.
    pub fn new(values: Vec<f64>, n: usize, k: usize, labels: Vec<String>) -> Result<Self, Error> {
        if k == 0 {
            return Err(Error::InvalidConfig("LogDensityMatrix requires K >= 1"));
        }
        if values.len() != n * k {
            return Err(Error::DimensionMismatch {
                what: "LogDensityMatrix values",
                expected: n * k,
                got: values.len(),
            });
        }
        if labels.len() != k {
            return Err(Error::DimensionMismatch {
                what: "LogDensityMatrix labels",
                expected: k,
                got: labels.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "LogDensityMatrix",
                index: i,
            });
        }
        Ok(Self {
            values,
            n,
            k,
            labels,
        })
    }

    /// Builds a matrix from K columns of equal length, with labels "m0".."m{K-1}".
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, Error> {
        let k = columns.len();
        if k == 0 {
            return Err(Error::InvalidConfig("LogDensityMatrix requires K >= 1"));
        }
        let n = columns[0].len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "LogDensityMatrix column",
                    expected: n,
                    got: columns[j].len(),
                });
            }
        }
        let mut values = vec![0.0; n * k];
        for i in 0..n {
            for j in 0..k {
                values[i * k + j] = columns[j][i];
            }
        }
        let labels = (0..k).map(|j| alloc::format!("m{j}")).collect();
        Self::new(values, n, k, labels)
    }

    pub fn n_observations(&self) -> usize {
        self.n
    }

    pub fn n_models(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// One row: the K log densities of observation `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k)
    }

    /// Sum of log densities of model `k` over all rows.
    pub fn column_log_sum(&self, k: usize) -> f64 {
        self.rows().map(|r| r[k]).sum()
    }
}

/// Length-K nonnegative vector summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    w: Vec<f64>,
}

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self, Error> {
        if w.is_empty() {
            return Err(Error::NotOnSimplex { reason: "empty" });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::NotOnSimplex {
                reason: "component outside [0, 1]",
            });
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::NotOnSimplex {
                reason: "components do not sum to 1",
            });
        }
        Ok(Self { w })
    }

    /// Normalizes a vector of nonnegative, not-all-zero masses.
    pub fn from_unnormalized(mut w: Vec<f64>) -> Result<Self, Error> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotOnSimplex {
                reason: "negative or non-finite mass",
            });
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::NotOnSimplex {
                reason: "total mass is zero",
            });
        }
        for v in &mut w {
            *v /= sum;
        }
        Self::new(w)
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            w: vec![1.0 / k as f64; k],
        }
    }

    /// The one-hot vector with all mass on component `index`.
    pub fn vertex(k: usize, index: usize) -> Self {
        let mut w = vec![0.0; k];
        w[index] = 1.0;
        Self { w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

/// Length-K vector of estimated model optimisms (log-density-sum units).
/// Entries may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimismVector {
    op: Vec<f64>,
}

impl OptimismVector {
    pub fn new(op: Vec<f64>) -> Result<Self, Error> {
        if let Some(i) = op.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "OptimismVector",
                index: i,
            });
        }
        Ok(Self { op })
    }

    pub fn zeros(k: usize) -> Self {
        Self { op: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.op
    }
}

/// Which divergence penalizes distance from the prior weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    Kl,
    Brier,
}

/// Prior weight choice for the penalty term.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Softmax of negated optimism (the default).
    OptimismPenalizing,
    /// Flat 1/K prior; under the KL kind this is realized as optimism == 0.
    Uniform,
    /// Caller-supplied prior; must be strictly positive under the KL kind.
    Explicit(SimplexWeights),
}

/// Penalty configuration: divergence kind, scale c, and prior choice.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub scale_c: f64,
    pub prior: Prior,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            kind: PenaltyKind::Kl,
            scale_c: 1.0,
            prior: Prior::OptimismPenalizing,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.scale_c.is_finite() && self.scale_c > 0.0) {
            return Err(Error::InvalidConfig("scale_c must be positive"));
        }
        if let Prior::Explicit(p) = &self.prior {
            if self.kind == PenaltyKind::Kl && p.as_slice().iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidConfig(
                    "explicit prior must be strictly positive under the KL penalty",
                ));
            }
        }
        Ok(())
    }
}

/// Jensen-gap and overfit-ratio diagnostics for a weighted model set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    /// Sum over held-out rows of (mixture-of-logs minus log-of-mixture).
    pub jensen_gap_out: f64,
    /// Same quantity over the training rows.
    pub jensen_gap_in: f64,
    /// Per-model held-out deviance divided by in-sample deviance.
    pub overfit_ratios: Vec<f64>,
    pub min_overfit_ratio: f64,
}
