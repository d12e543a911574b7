//! Weighting objectives, weighting methods, and diagnostics.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{log_mixture, softmax_neg, xlogx};
use crate::solver::{minimize_on_simplex, InitialPoint, SolverConfig, SolverReport};
use crate::types::{
    DiagnosticsReport, Error, LogDensityMatrix, OptimismVector, PenaltyConfig, PenaltyKind, Prior,
    SimplexWeights,
};

/// Optimism-penalizing prior weights: w_k proportional to exp(-op_k).
pub fn optimism_prior(op: &OptimismVector) -> SimplexWeights {
    SimplexWeights::new(softmax_neg(op.as_slice())).expect("softmax output is on the simplex")
}

/// Weights proportional to exp(-s_k); the same numeric path as
/// [`optimism_prior`], applied to an arbitrary score vector (e.g. Akaike-style
/// scores op_k + S_k).
pub fn negative_exponentiated_weights(scores: &[f64]) -> Result<SimplexWeights, Error> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            what: "scores",
            index: i,
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidConfig("scores must be non-empty"));
    }
    Ok(SimplexWeights::new(softmax_neg(scores)).expect("softmax output is on the simplex"))
}

/// Index of the model minimizing `-sum_i L_ik + op_k`. Exact ties break to the
/// lowest index.
pub fn model_selection_index(
    matrix: &LogDensityMatrix,
    op: &OptimismVector,
) -> Result<usize, Error> {
    check_models(matrix, op)?;
    if matrix.n_observations() == 0 {
        return Err(Error::EmptyData);
    }
    let k = matrix.n_models();
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for j in 0..k {
        let score = -matrix.column_log_sum(j) + op.as_slice()[j];
        if score < best_score {
            best_score = score;
            best = j;
        }
    }
    Ok(best)
}

/// Effective "optimism" for the KL penalty: the KL term is written as
/// `sum_k w_k log w_k + sum_k w_k * op_eff_k`, dropping any w-independent
/// normalizer. Uniform prior means op_eff == 0; an explicit prior p enters as
/// -log p (exact, no dropped constant).
fn kl_effective_op(op: &OptimismVector, prior: &Prior) -> Vec<f64> {
    match prior {
        Prior::OptimismPenalizing => op.as_slice().to_vec(),
        Prior::Uniform => vec![0.0; op.len()],
        Prior::Explicit(p) => p.as_slice().iter().map(|&v| -v.ln()).collect(),
    }
}

/// Prior vector for the Brier penalty.
fn brier_prior(op: &OptimismVector, prior: &Prior) -> Vec<f64> {
    match prior {
        Prior::OptimismPenalizing => optimism_prior(op).into_vec(),
        Prior::Uniform => vec![1.0 / op.len() as f64; op.len()],
        Prior::Explicit(p) => p.as_slice().to_vec(),
    }
}

/// Negative log mixture likelihood: `-sum_i log sum_k w_k exp(L_ik)`.
fn neg_log_mixture_sum(w: &[f64], matrix: &LogDensityMatrix) -> f64 {
    let mut total = 0.0;
    for row in matrix.rows() {
        total -= log_mixture(w, row);
    }
    total
}

/// The divergence-based weighting objective at `w`.
///
/// KL kind: `c * (sum_k w_k log w_k + sum_k w_k op_k) - sum_i log mixture_i`
/// (the w-independent normalizer of the prior is omitted). Brier kind:
/// `c * sum_k (w_k - prior_k)^2 - sum_i log mixture_i`.
pub fn divergence_objective(
    w: &SimplexWeights,
    matrix: &LogDensityMatrix,
    op: &OptimismVector,
    cfg: &PenaltyConfig,
) -> Result<f64, Error> {
    cfg.validate()?;
    check_models(matrix, op)?;
    check_weights(matrix, w)?;
    let penalty = match cfg.kind {
        PenaltyKind::Kl => {
            let op_eff = kl_effective_op(op, &cfg.prior);
            w.as_slice()
                .iter()
                .zip(&op_eff)
                .map(|(&wk, &ok)| xlogx(wk) + wk * ok)
                .sum::<f64>()
        }
        PenaltyKind::Brier => {
            let prior = brier_prior(op, &cfg.prior);
            w.as_slice()
                .iter()
                .zip(&prior)
                .map(|(&wk, &pk)| (wk - pk) * (wk - pk))
                .sum::<f64>()
        }
    };
    let value = cfg.scale_c * penalty + neg_log_mixture_sum(w.as_slice(), matrix);
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(value)
}

/// Analytic gradient of [`divergence_objective`] at an interior point.
///
/// Under the KL kind every component of `w` must be strictly positive.
pub fn divergence_objective_gradient(
    w: &SimplexWeights,
    matrix: &LogDensityMatrix,
    op: &OptimismVector,
    cfg: &PenaltyConfig,
) -> Result<Vec<f64>, Error> {
    cfg.validate()?;
    check_models(matrix, op)?;
    check_weights(matrix, w)?;
    if cfg.kind == PenaltyKind::Kl {
        if let Some(i) = w.as_slice().iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroWeightComponent { index: i });
        }
    }
    let k = matrix.n_models();
    let mut grad = vec![0.0; k];
    match cfg.kind {
        PenaltyKind::Kl => {
            let op_eff = kl_effective_op(op, &cfg.prior);
            for j in 0..k {
                grad[j] = cfg.scale_c * (w.as_slice()[j].ln() + 1.0 + op_eff[j]);
            }
        }
        PenaltyKind::Brier => {
            let prior = brier_prior(op, &cfg.prior);
            for j in 0..k {
                grad[j] = 2.0 * cfg.scale_c * (w.as_slice()[j] - prior[j]);
            }
        }
    }
    accumulate_fit_gradient(w.as_slice(), matrix, &mut grad);
    Ok(grad)
}

/// Adds the gradient of `-sum_i log mixture_i`, i.e.
/// `-sum_i exp(L_ik) / sum_j w_j exp(L_ij)`, computed with per-row max-shift.
fn accumulate_fit_gradient(w: &[f64], matrix: &LogDensityMatrix, grad: &mut [f64]) {
    for row in matrix.rows() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for (&wj, &lj) in w.iter().zip(row) {
            denom += wj * (lj - max).exp();
        }
        for (gj, &lj) in grad.iter_mut().zip(row) {
            *gj -= (lj - max).exp() / denom;
        }
    }
}

/// Minimizes [`divergence_objective`] over the simplex.
///
/// `InitialPoint::Prior` starts at the prior weights implied by `cfg`.
pub fn divergence_weights(
    matrix: &LogDensityMatrix,
    op: &OptimismVector,
    cfg: &PenaltyConfig,
    solver: &SolverConfig,
) -> Result<(SimplexWeights, SolverReport), Error> {
    cfg.validate()?;
    check_models(matrix, op)?;
    let k = matrix.n_models();
    let mut solver_cfg = solver.clone();
    if solver_cfg.initial_point == InitialPoint::Prior {
        let prior = match (&cfg.kind, &cfg.prior) {
            (_, Prior::Explicit(p)) => p.clone(),
            (_, Prior::Uniform) => SimplexWeights::uniform(k),
            (_, Prior::OptimismPenalizing) => optimism_prior(op),
        };
        solver_cfg.initial_point = InitialPoint::Explicit(prior);
    }

    let kind = cfg.kind;
    let scale_c = cfg.scale_c;
    let op_eff = kl_effective_op(op, &cfg.prior);
    let prior_vec = brier_prior(op, &cfg.prior);

    let oracle = |w: &[f64], g: &mut [f64]| -> f64 {
        let mut value = 0.0;
        match kind {
            PenaltyKind::Kl => {
                for ((gj, &wj), &oj) in g.iter_mut().zip(w).zip(&op_eff) {
                    value += scale_c * (xlogx(wj) + wj * oj);
                    *gj = scale_c * (wj.max(1e-300).ln() + 1.0 + oj);
                }
            }
            PenaltyKind::Brier => {
                for ((gj, &wj), &pj) in g.iter_mut().zip(w).zip(&prior_vec) {
                    value += scale_c * (wj - pj) * (wj - pj);
                    *gj = 2.0 * scale_c * (wj - pj);
                }
            }
        }
        for row in matrix.rows() {
            let lm = log_mixture(w, row);
            value -= lm;
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (&wj, &lj) in w.iter().zip(row) {
                denom += wj * (lj - max).exp();
            }
            for (gj, &lj) in g.iter_mut().zip(row) {
                *gj -= (lj - max).exp() / denom;
            }
        }
        value
    };
    minimize_on_simplex(oracle, k, &solver_cfg)
}

/// Stacking with the log score: minimizes the pooled held-out negative log
/// mixture likelihood over the simplex.
///
/// Flat directions (e.g. duplicate columns) resolve to the uniform-start
/// fixed point of the solver, so duplicates receive equal weight.
pub fn stacking_weights(
    heldout_matrix: &LogDensityMatrix,
    solver: &SolverConfig,
) -> Result<(SimplexWeights, SolverReport), Error> {
    if heldout_matrix.n_observations() == 0 {
        return Err(Error::EmptyData);
    }
    let k = heldout_matrix.n_models();
    let mut solver_cfg = solver.clone();
    if solver_cfg.initial_point == InitialPoint::Prior {
        // Stacking has no prior; fall back to the documented uniform start.
        solver_cfg.initial_point = InitialPoint::Uniform;
    }
    let oracle = |w: &[f64], g: &mut [f64]| -> f64 {
        g.fill(0.0);
        let mut value = 0.0;
        for row in heldout_matrix.rows() {
            value -= log_mixture(w, row);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (&wj, &lj) in w.iter().zip(row) {
                denom += wj * (lj - max).exp();
            }
            for (gj, &lj) in g.iter_mut().zip(row) {
                *gj -= (lj - max).exp() / denom;
            }
        }
        value
    };
    minimize_on_simplex(oracle, k, &solver_cfg)
}

/// Mean negative log mixture density: `(1/n) sum_i -log sum_k w_k exp(L_ik)`.
pub fn mixture_log_score(w: &SimplexWeights, matrix: &LogDensityMatrix) -> Result<f64, Error> {
    check_weights(matrix, w)?;
    let n = matrix.n_observations();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    Ok(neg_log_mixture_sum(w.as_slice(), matrix) / n as f64)
}

/// Jensen gaps and overfit ratios for weights `w` given in-sample (train) and
/// held-out (test) log-density matrices.
pub fn diagnostics(
    w: &SimplexWeights,
    train_matrix: &LogDensityMatrix,
    test_matrix: &LogDensityMatrix,
) -> Result<DiagnosticsReport, Error> {
    check_weights(train_matrix, w)?;
    check_weights(test_matrix, w)?;
    let k = train_matrix.n_models();

    let jensen = |matrix: &LogDensityMatrix| -> f64 {
        let mut gap = 0.0;
        for row in matrix.rows() {
            let mix_of_logs: f64 = w.as_slice().iter().zip(row).map(|(&wk, &lk)| wk * lk).sum();
            gap += log_mixture(w.as_slice(), row) - mix_of_logs;
        }
        gap
    };
    let jensen_gap_in = jensen(train_matrix);
    let jensen_gap_out = jensen(test_matrix);

    let mut overfit_ratios = Vec::with_capacity(k);
    for j in 0..k {
        let in_deviance = -train_matrix.column_log_sum(j);
        if in_deviance <= 0.0 {
            return Err(Error::NonPositiveDeviance { model: j });
        }
        let out_deviance = -test_matrix.column_log_sum(j);
        overfit_ratios.push(out_deviance / in_deviance);
    }
    let min_overfit_ratio = overfit_ratios.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(DiagnosticsReport {
        jensen_gap_out,
        jensen_gap_in,
        overfit_ratios,
        min_overfit_ratio,
    })
}

fn check_models(matrix: &LogDensityMatrix, op: &OptimismVector) -> Result<(), Error> {
    if matrix.n_models() != op.len() {
        return Err(Error::DimensionMismatch {
            what: "optimism vector",
            expected: matrix.n_models(),
            got: op.len(),
        });
    }
    Ok(())
}

fn check_weights(matrix: &LogDensityMatrix, w: &SimplexWeights) -> Result<(), Error> {
    if matrix.n_models() != w.len() {
        return Err(Error::DimensionMismatch {
            what: "weight vector",
            expected: matrix.n_models(),
            got: w.len(),
        });
    }
    Ok(())
}
