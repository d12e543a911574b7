//! Minimization of smooth convex objectives over the probability simplex.
//!
//! The scheme is multiplicative (mirror) descent: `w_k <- w_k * exp(-eta * g_k) / Z`
//! with a backtracking line search on `eta`. Updates preserve positivity and
//! normalization by construction, so the KL entropy gradient stays defined at
//! every iterate. Termination is certified by the KKT residual
//! `max_k |g_k - lambda|` over components above the floor, where
//! `lambda = sum_k w_k g_k`, measured relative to `1 + |objective|`.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use crate::types::{Error, SimplexWeights};

// Backtracking parameters; fixed defaults, not part of any external contract.
const BACKTRACK_SHRINK: f64 = 0.5;
const SUFFICIENT_DECREASE: f64 = 1e-4;
const INITIAL_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e8;
// Iterates are clamped away from exact zero so log-domain updates stay finite.
const ITERATE_FLOOR: f64 = 1e-300;
// Weight below which a component with a positive centered gradient may be
// snapped to the iterate floor when the line search can no longer certify
// its (sub-rounding) decay.
const SNAP_THRESHOLD: f64 = 1e-8;

/// Starting point for the solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialPoint {
    #[default]
    Uniform,
    /// Start at the prior weights of the objective being solved. Callers that
    /// know the prior resolve this to `Explicit` before invoking the solver;
    /// at the solver level it falls back to uniform.
    Prior,
    Explicit(SimplexWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative KKT residual bound.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_point: InitialPoint,
    /// Post-hoc zero-rounding threshold applied to the terminal point.
    pub floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
            initial_point: InitialPoint::Uniform,
            floor: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("solver tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1"));
        }
        if !(self.floor > 0.0 && self.floor <= 1e-6) {
            return Err(Error::InvalidConfig("floor must lie in (0, 1e-6]"));
        }
        Ok(())
    }
}

/// Convergence evidence for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub wall_time: f64,
}

/// Minimizes a convex, continuously differentiable objective over the open
/// simplex of dimension `k`.
///
/// The oracle fills `grad` and returns the objective value. Non-convergence
/// within `max_iterations` is not an error: the best iterate is returned with
/// `converged = false`. A non-finite oracle output is a hard error.
pub fn minimize_on_simplex<F>(
    mut oracle: F,
    k: usize,
    cfg: &SolverConfig,
) -> Result<(SimplexWeights, SolverReport), Error>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1"));
    }
    let start = now();

    let mut w: Vec<f64> = match &cfg.initial_point {
        InitialPoint::Uniform | InitialPoint::Prior => vec![1.0 / k as f64; k],
        InitialPoint::Explicit(p) => {
            if p.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "initial point",
                    expected: k,
                    got: p.len(),
                });
            }
            // Nudge boundary components inward: the KL gradient must stay finite.
            let mut v: Vec<f64> = p.as_slice().iter().map(|&x| x.max(1e-10)).collect();
            let sum: f64 = v.iter().sum();
            for x in &mut v {
                *x /= sum;
            }
            v
        }
    };

    let mut grad = vec![0.0; k];
    let mut value = oracle(&w, &mut grad);
    check_finite(value, &grad)?;

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = kkt_residual(&w, &grad, cfg.floor);
    // The accepted step seeds the next line search (doubled), so boundary
    // optima are approached geometrically instead of at a fixed unit step.
    let mut eta_init = INITIAL_STEP;

    if k == 1 {
        // One-point simplex: nothing to optimize.
        kkt = 0.0;
        converged = true;
    }

    while !converged && iterations < cfg.max_iterations {
        if kkt <= cfg.tolerance * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        // Centered gradient: a constant shift cancels in the multiplicative
        // update but keeps the exponents small.
        let lambda: f64 = w.iter().zip(&grad).map(|(a, b)| a * b).sum();

        let mut eta = eta_init;
        let mut trial = vec![0.0; k];
        let mut trial_grad = vec![0.0; k];
        let mut accepted = false;
        while eta >= MIN_STEP {
            multiplicative_step(&w, &grad, lambda, eta, &mut trial);
            let trial_value = oracle(&trial, &mut trial_grad);
            check_finite(trial_value, &trial_grad)?;
            // First-order predicted decrease along the realized step.
            let predicted: f64 = w
                .iter()
                .zip(&trial)
                .zip(&grad)
                .map(|((&wi, &ti), &gi)| gi * (wi - ti))
                .sum();
            let armijo = trial_value < value
                && trial_value <= value - SUFFICIENT_DECREASE * predicted.max(0.0);
            // Near the optimum the objective decrease drops below f64
            // resolution; a step that leaves the value unchanged up to
            // rounding but strictly reduces the stationarity residual is
            // still progress (and cannot cycle, since the residual is
            // strictly decreasing along such steps).
            let rounding = 2.0 * f64::EPSILON * (1.0 + value.abs());
            let lateral = trial_value <= value + rounding
                && kkt_residual(&trial, &trial_grad, cfg.floor) < kkt;
            if armijo || lateral {
                w.copy_from_slice(&trial);
                grad.copy_from_slice(&trial_grad);
                value = trial_value;
                accepted = true;
                eta_init = (eta * 2.0).min(MAX_STEP);
                break;
            }
            eta *= BACKTRACK_SHRINK;
        }
        iterations += 1;
        kkt = kkt_residual(&w, &grad, cfg.floor);
        if !accepted {
            // Moribund components (tiny weight, positive centered gradient)
            // decay slower than the objective can register their progress,
            // yet dominate the residual while they sit above the floor. Jump
            // them to the iterate floor directly when that neither raises the
            // objective beyond rounding nor the residual.
            let lambda: f64 = w.iter().zip(&grad).map(|(a, b)| a * b).sum();
            let mut snap = w.clone();
            let mut snapped = false;
            for (s, (&wi, &gi)) in snap.iter_mut().zip(w.iter().zip(&grad)) {
                if wi <= SNAP_THRESHOLD && wi > ITERATE_FLOOR && gi - lambda > 0.0 {
                    *s = ITERATE_FLOOR;
                    snapped = true;
                }
            }
            if snapped {
                let sum: f64 = snap.iter().sum();
                for s in &mut snap {
                    *s /= sum;
                }
                let mut snap_grad = vec![0.0; k];
                let snap_value = oracle(&snap, &mut snap_grad);
                let rounding = 2.0 * f64::EPSILON * (1.0 + value.abs());
                if snap_value.is_finite()
                    && snap_grad.iter().all(|g| g.is_finite())
                    && snap_value <= value + rounding
                    && kkt_residual(&snap, &snap_grad, cfg.floor) < kkt
                {
                    w.copy_from_slice(&snap);
                    grad.copy_from_slice(&snap_grad);
                    value = snap_value;
                    kkt = kkt_residual(&w, &grad, cfg.floor);
                    continue;
                }
            }
            // Line search stalled: no descent direction at machine precision.
            converged = kkt <= cfg.tolerance * (1.0 + value.abs());
            break;
        }
    }
    if !converged {
        converged = kkt <= cfg.tolerance * (1.0 + value.abs());
    }

    // Round components below the floor to zero and renormalize.
    let mut out = w;
    for v in &mut out {
        if *v < cfg.floor {
            *v = 0.0;
        }
    }
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }

    let report = SolverReport {
        objective: value,
        iterations,
        kkt_residual: kkt,
        converged,
        wall_time: elapsed(start),
    };
    Ok((
        SimplexWeights::new(out).expect("renormalized iterate"),
        report,
    ))
}

fn multiplicative_step(w: &[f64], grad: &[f64], lambda: f64, eta: f64, out: &mut [f64]) {
    // Log-domain update with max-shift; exact zeros are clamped so the next
    // log stays finite.
    let mut max = f64::NEG_INFINITY;
    for ((&wi, &gi), o) in w.iter().zip(grad).zip(out.iter_mut()) {
        let lw = wi.max(ITERATE_FLOOR).ln() - eta * (gi - lambda);
        *o = lw;
        if lw > max {
            max = lw;
        }
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp().max(ITERATE_FLOOR);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn kkt_residual(w: &[f64], grad: &[f64], floor: f64) -> f64 {
    let lambda: f64 = w.iter().zip(grad).map(|(a, b)| a * b).sum();
    let mut res: f64 = 0.0;
    for (&wi, &gi) in w.iter().zip(grad) {
        if wi > floor {
            res = res.max((gi - lambda).abs());
        }
    }
    res
}

fn check_finite(value: f64, grad: &[f64]) -> Result<(), Error> {
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    Ok(())
}

#[cfg(feature = "std")]
fn now() -> std::time::Instant {
    std::time::Instant::now()
}

#[cfg(feature = "std")]
fn elapsed(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

#[cfg(not(feature = "std"))]
fn now() {}

#[cfg(not(feature = "std"))]
fn elapsed(_start: ()) -> f64 {
    0.0
}
