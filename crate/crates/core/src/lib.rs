//! Weighting and averaging of probabilistic predictions from multiple fitted
//! models.
//!
//! The crate takes an n-by-K matrix of pointwise log predictive densities
//! (one column per model) plus a per-model optimism estimate, and produces a
//! probability vector over the models. Three weighting methods are provided:
//!
//! * divergence-based weights: minimize a KL (or Brier) penalty to an
//!   optimism-penalizing prior plus the negative log mixture likelihood,
//! * stacking with the log score: minimize the held-out negative log mixture
//!   likelihood alone,
//! * negative exponentiated weights: softmax of negated model scores
//!   (Akaike-style weighting).
//!
//! All mixture evaluations are done in the log domain with per-row max-shift,
//! so inputs with very negative log densities never underflow. The simplex
//! optimizer uses multiplicative (mirror) updates with a backtracking line
//! search and reports a KKT certificate.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature enables wall-clock timing in solver reports.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod folds;
pub mod math;
pub mod optimism;
pub mod regression;
pub mod solver;
pub mod types;
pub mod weighting;

pub use folds::{make_folds, FoldPlan};
pub use math::{log_mixture, log_sum_exp, softmax_neg, xlogx};
pub use optimism::{aicc_penalty, cv_optimism, CvError, CvOptimism, FittedPredictor, ModelAdapter};
pub use regression::{
    build_model_space, fit_mle, generate_ground_truth, log_density, mixture_rmse, sample_dataset,
    DgpConfig, ErrorKind, GaussianLinearModel, GaussianMleAdapter, GroundTruth, ModelSpace,
    RegressionDataset,
};
pub use solver::{minimize_on_simplex, InitialPoint, SolverConfig, SolverReport};
pub use types::{
    DiagnosticsReport, Error, LogDensityMatrix, OptimismVector, PenaltyConfig, PenaltyKind, Prior,
    SimplexWeights,
};
pub use weighting::{
    diagnostics, divergence_objective, divergence_objective_gradient, divergence_weights,
    mixture_log_score, model_selection_index, negative_exponentiated_weights, optimism_prior,
    stacking_weights,
};
