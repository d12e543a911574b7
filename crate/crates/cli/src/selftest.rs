//! Built-in verification suites behind the `selftest` subcommand: grid-oracle
//! equivalence, the vertex boundary condition, gradient finite differences,
//! and midpoint convexity. The gradient suite is parameterized so tests can
//! verify that a broken gradient is actually caught.

use modelmix_core::{
    divergence_objective, divergence_objective_gradient, divergence_weights, model_selection_index,
    LogDensityMatrix, OptimismVector, PenaltyConfig, SimplexWeights, SolverConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
}

pub type GradientFn =
    dyn Fn(&SimplexWeights, &LogDensityMatrix, &OptimismVector, &PenaltyConfig) -> Vec<f64>;

fn random_instance(seed: u64, k: usize, n: usize) -> (LogDensityMatrix, OptimismVector) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let columns: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.random_range(-5.0..-0.1)).collect())
        .collect();
    let op: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..3.0)).collect();
    (
        LogDensityMatrix::from_columns(&columns).unwrap(),
        OptimismVector::new(op).unwrap(),
    )
}

fn random_interior_point(rng: &mut ChaCha12Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// KL objective evaluated on a raw (possibly off-simplex) weight vector, used
/// as the finite-difference oracle.
fn raw_kl_objective(w: &[f64], matrix: &LogDensityMatrix, op: &OptimismVector, c: f64) -> f64 {
    let penalty: f64 = w
        .iter()
        .zip(op.as_slice())
        .map(|(&wi, &oi)| wi * wi.ln() + wi * oi)
        .sum();
    let fit: f64 = matrix
        .rows()
        .map(|row| {
            let mix: f64 = w.iter().zip(row).map(|(&wi, &l)| wi * l.exp()).sum();
            mix.ln()
        })
        .sum();
    c * penalty - fit
}

fn suite_grid_oracle() -> bool {
    let solver = SolverConfig::default();
    let cfg = PenaltyConfig::default();
    for seed in 0..10u64 {
        let (matrix, op) = random_instance(5000 + seed, 2, 30);
        let (w, report) = match divergence_weights(&matrix, &op, &cfg, &solver) {
            Ok(out) => out,
            Err(_) => return false,
        };
        if !report.converged {
            return false;
        }
        let mut best = f64::INFINITY;
        let mut best_w = 0.0;
        for i in 0..=1000 {
            let a = i as f64 / 1000.0;
            let grid =
                SimplexWeights::from_unnormalized(vec![a.max(1e-300), (1.0 - a).max(1e-300)])
                    .unwrap();
            let value = divergence_objective(&grid, &matrix, &op, &cfg).unwrap();
            if value < best {
                best = value;
                best_w = a;
            }
        }
        if (w.as_slice()[0] - best_w).abs() > 2e-3 || report.objective > best + 1e-6 {
            return false;
        }
    }
    true
}

fn suite_boundary_condition() -> bool {
    let cfg = PenaltyConfig::default();
    for seed in 0..100u64 {
        let (matrix, op) = random_instance(6000 + seed, 4, 15);
        let k = matrix.n_models();
        let mut best = f64::INFINITY;
        let mut best_idx = 0usize;
        let mut min_gap = f64::INFINITY;
        for j in 0..k {
            let value =
                divergence_objective(&SimplexWeights::vertex(k, j), &matrix, &op, &cfg).unwrap();
            if value < best {
                if best.is_finite() {
                    min_gap = min_gap.min(best - value);
                }
                best = value;
                best_idx = j;
            } else {
                min_gap = min_gap.min(value - best);
            }
        }
        if min_gap <= 1e-6 {
            continue; // near-tie: outside the suite's precondition
        }
        if model_selection_index(&matrix, &op).unwrap() != best_idx {
            return false;
        }
    }
    true
}

fn suite_gradient(gradient: &GradientFn) -> bool {
    let cfg = PenaltyConfig::default();
    let h = 1e-6;
    for seed in 0..10u64 {
        let (matrix, op) = random_instance(7000 + seed, 3, 20);
        let mut rng = ChaCha12Rng::seed_from_u64(9000 + seed);
        for _ in 0..20 {
            let point = random_interior_point(&mut rng, 3);
            let w = SimplexWeights::new(point.clone()).unwrap();
            let analytic = gradient(&w, &matrix, &op, &cfg);
            for j in 0..3 {
                let mut plus = point.clone();
                let mut minus = point.clone();
                plus[j] += h;
                minus[j] -= h;
                let fd = (raw_kl_objective(&plus, &matrix, &op, cfg.scale_c)
                    - raw_kl_objective(&minus, &matrix, &op, cfg.scale_c))
                    / (2.0 * h);
                let rel = (analytic[j] - fd).abs() / fd.abs().max(1.0);
                if rel > 1e-6 {
                    return false;
                }
            }
        }
    }
    true
}

fn suite_convexity() -> bool {
    let cfg = PenaltyConfig::default();
    for seed in 0..100u64 {
        let (matrix, op) = random_instance(8000 + seed, 3, 12);
        let mut rng = ChaCha12Rng::seed_from_u64(8500 + seed);
        let u = random_interior_point(&mut rng, 3);
        let v = random_interior_point(&mut rng, 3);
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |p: Vec<f64>| {
            divergence_objective(
                &SimplexWeights::from_unnormalized(p).unwrap(),
                &matrix,
                &op,
                &cfg,
            )
            .unwrap()
        };
        if f(mid) > 0.5 * f(u) + 0.5 * f(v) + 1e-10 {
            return false;
        }
    }
    true
}

pub fn run_selftest_with(gradient: &GradientFn) -> Vec<SuiteResult> {
    vec![
        SuiteResult {
            name: "grid-oracle",
            passed: suite_grid_oracle(),
        },
        SuiteResult {
            name: "boundary-condition",
            passed: suite_boundary_condition(),
        },
        SuiteResult {
            name: "gradient",
            passed: suite_gradient(gradient),
        },
        SuiteResult {
            name: "convexity",
            passed: suite_convexity(),
        },
    ]
}

pub fn run_selftest() -> Vec<SuiteResult> {
    run_selftest_with(&|w, matrix, op, cfg| {
        divergence_objective_gradient(w, matrix, op, cfg).expect("interior point")
    })
}
