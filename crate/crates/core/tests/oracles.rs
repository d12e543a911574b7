//! Oracle-backed checks: brute-force grid search over the simplex,
//! finite-difference gradients, naive high-precision objective re-evaluation,
//! vertex identities, and the closed-form softmax solution.

use modelmix_core::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Random weighting instance with moderate log densities so the naive
/// (unshifted) oracle below cannot underflow.
fn random_instance(k: usize, n: usize, seed: u64) -> (LogDensityMatrix, OptimismVector) {
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

fn random_simplex(k: usize, rng: &mut ChaCha12Rng) -> SimplexWeights {
    let raw: Vec<f64> = (0..k)
        .map(|_| -f64::ln(rng.random_range(1e-12..1.0)))
        .collect();
    SimplexWeights::from_unnormalized(raw).unwrap()
}

/// Naive re-implementation of the KL-kind objective: no max-shift, direct
/// exponentials. Valid for moderate log densities and positive weights of any
/// total mass, so it also serves as the finite-difference target.
fn naive_objective(w: &[f64], matrix: &LogDensityMatrix, op: &[f64], c: f64) -> f64 {
    let mut penalty = 0.0;
    for (&wk, &ok) in w.iter().zip(op) {
        if wk > 0.0 {
            penalty += wk * wk.ln();
        }
        penalty += wk * ok;
    }
    let mut fit = 0.0;
    for row in matrix.rows() {
        let mix: f64 = w.iter().zip(row).map(|(&wk, &lk)| wk * lk.exp()).sum();
        fit -= mix.ln();
    }
    c * penalty + fit
}

fn naive_brier_objective(w: &[f64], matrix: &LogDensityMatrix, prior: &[f64], c: f64) -> f64 {
    let penalty: f64 = w.iter().zip(prior).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let mut fit = 0.0;
    for row in matrix.rows() {
        let mix: f64 = w.iter().zip(row).map(|(&wk, &lk)| wk * lk.exp()).sum();
        fit -= mix.ln();
    }
    c * penalty + fit
}

/// Exhaustive grid minimizer over the simplex at step 1e-3 (K = 2 or 3).
fn grid_minimizer<F: Fn(&SimplexWeights) -> f64>(k: usize, objective: F) -> (Vec<f64>, f64) {
    let steps = 1000usize;
    let mut best = (vec![], f64::INFINITY);
    match k {
        2 => {
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let w = SimplexWeights::new(vec![t, 1.0 - t]).unwrap();
                let v = objective(&w);
                if v < best.1 {
                    best = (w.as_slice().to_vec(), v);
                }
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 / steps as f64;
                    let b = j as f64 / steps as f64;
                    let c = (1.0 - a - b).max(0.0);
                    let w = SimplexWeights::from_unnormalized(vec![a, b, c]).unwrap();
                    let v = objective(&w);
                    if v < best.1 {
                        best = (w.as_slice().to_vec(), v);
                    }
                }
            }
        }
        _ => panic!("grid oracle only supports K in {{2, 3}}"),
    }
    best
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn objective_matches_naive_reimplementation() {
    let (matrix, op) = random_instance(3, 20, 7);
    let cfg = PenaltyConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    for _ in 0..50 {
        let w = random_simplex(3, &mut rng);
        let fast = divergence_objective(&w, &matrix, &op, &cfg).unwrap();
        let naive = naive_objective(w.as_slice(), &matrix, op.as_slice(), 1.0);
        assert!((fast - naive).abs() <= 1e-10 * naive.abs().max(1.0));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..10u64 {
        let (matrix, op) = random_instance(3, 15, 100 + seed);
        let mut rng = ChaCha12Rng::seed_from_u64(200 + seed);
        for cfg in [
            PenaltyConfig::default(),
            PenaltyConfig {
                kind: PenaltyKind::Brier,
                scale_c: 1.7,
                prior: Prior::OptimismPenalizing,
            },
        ] {
            for _ in 0..20 {
                let w = random_simplex(3, &mut rng);
                let grad = divergence_objective_gradient(&w, &matrix, &op, &cfg).unwrap();
                let prior = optimism_prior(&op);
                for k in 0..3 {
                    let mut wp = w.as_slice().to_vec();
                    let mut wm = wp.clone();
                    wp[k] += h;
                    wm[k] -= h;
                    let (fp, fm) = match cfg.kind {
                        PenaltyKind::Kl => (
                            naive_objective(&wp, &matrix, op.as_slice(), cfg.scale_c),
                            naive_objective(&wm, &matrix, op.as_slice(), cfg.scale_c),
                        ),
                        PenaltyKind::Brier => (
                            naive_brier_objective(&wp, &matrix, prior.as_slice(), cfg.scale_c),
                            naive_brier_objective(&wm, &matrix, prior.as_slice(), cfg.scale_c),
                        ),
                    };
                    let fd = (fp - fm) / (2.0 * h);
                    let rel = (grad[k] - fd).abs() / grad[k].abs().max(1.0);
                    assert!(
                        rel <= 1e-6,
                        "seed {seed}: component {k}: analytic {} vs fd {fd}",
                        grad[k]
                    );
                }
            }
        }
    }
}

#[test]
fn midpoint_convexity() {
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for trial in 0..100u64 {
        let k = if trial % 2 == 0 { 3 } else { 4 };
        let (matrix, op) = random_instance(k, 12, 300 + trial);
        for kind in [PenaltyKind::Kl, PenaltyKind::Brier] {
            let cfg = PenaltyConfig {
                kind,
                scale_c: 1.0,
                prior: Prior::OptimismPenalizing,
            };
            let u = random_simplex(k, &mut rng);
            let v = random_simplex(k, &mut rng);
            let mid = SimplexWeights::from_unnormalized(
                u.as_slice()
                    .iter()
                    .zip(v.as_slice())
                    .map(|(a, b)| 0.5 * a + 0.5 * b)
                    .collect(),
            )
            .unwrap();
            let fu = divergence_objective(&u, &matrix, &op, &cfg).unwrap();
            let fv = divergence_objective(&v, &matrix, &op, &cfg).unwrap();
            let fm = divergence_objective(&mid, &matrix, &op, &cfg).unwrap();
            assert!(fm <= 0.5 * fu + 0.5 * fv + 1e-10);
        }
    }
}

#[test]
fn vertex_identity_reproduces_selection_criterion() {
    for seed in 0..100u64 {
        let (matrix, op) = random_instance(4, 10, 500 + seed);
        let cfg = PenaltyConfig::default();
        let mut best = (0usize, f64::INFINITY);
        for k in 0..4 {
            let v = SimplexWeights::vertex(4, k);
            let obj = divergence_objective(&v, &matrix, &op, &cfg).unwrap();
            let expected = op.as_slice()[k] - matrix.column_log_sum(k);
            assert!((obj - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            if obj < best.1 {
                best = (k, obj);
            }
        }
        assert_eq!(best.0, model_selection_index(&matrix, &op).unwrap());
    }
}

#[test]
fn selection_index_matches_exhaustive_enumeration() {
    for seed in 0..20u64 {
        let (matrix, op) = random_instance(3, 25, 700 + seed);
        let scores: Vec<f64> = (0..3)
            .map(|k| -matrix.column_log_sum(k) + op.as_slice()[k])
            .collect();
        let brute = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(model_selection_index(&matrix, &op).unwrap(), brute);
    }
}

#[test]
fn divergence_weights_match_grid_oracle_k2() {
    let cfg = PenaltyConfig::default();
    let solver = SolverConfig::default();
    for seed in 0..15u64 {
        let (matrix, op) = random_instance(2, 30, 900 + seed);
        let (w, report) = divergence_weights(&matrix, &op, &cfg, &solver).unwrap();
        assert!(report.converged, "seed {seed}");
        let (gw, gv) = grid_minimizer(2, |x| divergence_objective(x, &matrix, &op, &cfg).unwrap());
        assert!(linf(w.as_slice(), &gw) <= 2e-3, "seed {seed}");
        assert!(report.objective <= gv + 1e-6, "seed {seed}");
    }
}

#[test]
fn stacking_weights_match_grid_oracle_k2() {
    let solver = SolverConfig::default();
    for seed in 0..15u64 {
        let (matrix, _) = random_instance(2, 30, 1100 + seed);
        let (w, report) = stacking_weights(&matrix, &solver).unwrap();
        assert!(report.converged, "seed {seed}");
        let (gw, gv) = grid_minimizer(2, |x| {
            mixture_log_score(x, &matrix).unwrap() * matrix.n_observations() as f64
        });
        assert!(linf(w.as_slice(), &gw) <= 2e-3, "seed {seed}");
        assert!(report.objective <= gv + 1e-6, "seed {seed}");
    }
}

#[test]
fn divergence_weights_match_grid_oracle_k3() {
    let cfg = PenaltyConfig::default();
    let solver = SolverConfig::default();
    for seed in 0..5u64 {
        let (matrix, op) = random_instance(3, 20, 1300 + seed);
        let (w, report) = divergence_weights(&matrix, &op, &cfg, &solver).unwrap();
        assert!(report.converged, "seed {seed}");
        let (gw, gv) = grid_minimizer(3, |x| divergence_objective(x, &matrix, &op, &cfg).unwrap());
        assert!(linf(w.as_slice(), &gw) <= 2e-3, "seed {seed}");
        assert!(report.objective <= gv + 1e-6, "seed {seed}");
    }
}

#[test]
fn closed_form_negative_exponentiation_agreement() {
    // The KL-to-prior objective with a mixture-of-logs fit term has the
    // softmax closed form: w_k proportional to prior_k * exp(-S_k).
    let solver = SolverConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(1500);
    for trial in 0..50 {
        let k = 2 + trial % 4;
        let prior = random_simplex(k, &mut rng);
        let scores: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..4.0)).collect();
        let shifted: Vec<f64> = scores
            .iter()
            .zip(prior.as_slice())
            .map(|(&s, &p)| s - p.ln())
            .collect();
        let closed_form = negative_exponentiated_weights(&shifted).unwrap();

        let (solved, report) = minimize_on_simplex(
            |w, g| {
                let mut v = 0.0;
                for ((gj, &wj), &sj) in g.iter_mut().zip(w).zip(&shifted) {
                    let lw = wj.max(1e-300).ln();
                    v += wj * lw + wj * sj;
                    *gj = lw + 1.0 + sj;
                }
                v
            },
            k,
            &solver,
        )
        .unwrap();
        assert!(report.converged);
        assert!(
            linf(solved.as_slice(), closed_form.as_slice()) <= 1e-6,
            "trial {trial}"
        );
    }
}

#[test]
fn certificate_soundness_on_random_instances() {
    let cfg = PenaltyConfig::default();
    let solver = SolverConfig::default();
    for seed in 0..100u64 {
        let k = 2 + (seed % 4) as usize;
        let (matrix, op) = random_instance(k, 10 + (seed % 20) as usize, 1700 + seed);
        let (_, report) = divergence_weights(&matrix, &op, &cfg, &solver).unwrap();
        if report.converged {
            assert!(
                report.kkt_residual <= solver.tolerance * (1.0 + report.objective.abs()),
                "seed {seed}"
            );
        }
    }
}
