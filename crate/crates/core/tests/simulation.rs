//! Monte Carlo checks of the data-generating processes, the MLE fit, and the
//! cross-validated optimism estimate.

use modelmix_core::{
    build_model_space, cv_optimism, fit_mle, generate_ground_truth, log_density, make_folds,
    sample_dataset, DgpConfig, GaussianMleAdapter, RegressionDataset,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[test]
fn beta_sample_sd_matches_config() {
    let cfg = DgpConfig::default();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for seed in 0..500u64 {
        let truth = generate_ground_truth(&cfg, seed).unwrap();
        for b in truth.beta {
            sum += b;
            sum_sq += b * b;
            count += 1;
        }
    }
    assert!(count >= 10_000);
    let mean = sum / count as f64;
    let sd = (sum_sq / count as f64 - mean * mean).sqrt();
    assert!((sd - 0.5).abs() <= 0.02, "beta sd {sd}");
}

fn pairwise_correlations(data: &RegressionDataset) -> Vec<f64> {
    let (n, p) = (data.n(), data.p());
    let mut means = vec![0.0; p];
    for i in 0..n {
        for (j, m) in means.iter_mut().enumerate() {
            *m += data.row(i)[j];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; p];
    let mut covs = vec![0.0; p * p];
    for i in 0..n {
        let row = data.row(i);
        for j in 0..p {
            let dj = row[j] - means[j];
            vars[j] += dj * dj;
            for l in (j + 1)..p {
                covs[j * p + l] += dj * (row[l] - means[l]);
            }
        }
    }
    let mut out = Vec::new();
    for j in 0..p {
        for l in (j + 1)..p {
            out.push(covs[j * p + l] / (vars[j] * vars[l]).sqrt());
        }
    }
    out
}

#[test]
fn correlated_design_has_pairwise_half_correlation() {
    let cfg = DgpConfig {
        correlated: true,
        ..DgpConfig::default()
    };
    let truth = generate_ground_truth(&cfg, 1).unwrap();
    let data = sample_dataset(&truth, 10_000, 2).unwrap();
    for r in pairwise_correlations(&data) {
        assert!((r - 0.5).abs() <= 0.05, "correlation {r}");
    }
}

#[test]
fn independent_design_is_uncorrelated() {
    let truth = generate_ground_truth(&DgpConfig::default(), 3).unwrap();
    let data = sample_dataset(&truth, 10_000, 4).unwrap();
    for r in pairwise_correlations(&data) {
        assert!(r.abs() <= 0.05, "correlation {r}");
    }
}

#[test]
fn model_space_sizes_uniform_on_one_to_five() {
    let mut counts = [0usize; 5];
    let mut total = 0usize;
    for seed in 0..500u64 {
        let space = build_model_space(20, 10, seed).unwrap();
        for subset in &space.subsets {
            assert!((1..=5).contains(&subset.len()));
            counts[subset.len() - 1] += 1;
            total += 1;
        }
    }
    assert!(total >= 5000);
    for c in counts {
        let freq = c as f64 / total as f64;
        assert!((freq - 0.2).abs() <= 0.03, "size frequency {freq}");
    }
}

#[test]
fn near_interpolating_model_has_positive_optimism() {
    let n = 25usize;
    let cfg = DgpConfig {
        p: n - 2,
        noise_sd: 0.5,
        ..DgpConfig::default()
    };
    let adapter = GaussianMleAdapter {
        subset: (0..cfg.p).collect(),
    };
    let mut positive = 0usize;
    for seed in 0..100u64 {
        let truth = generate_ground_truth(&cfg, seed).unwrap();
        let data = sample_dataset(&truth, n, seed.wrapping_add(10_000)).unwrap();
        let plan = make_folds(n, 5, seed).unwrap();
        let cv = cv_optimism(&adapter, &data, &plan).unwrap();
        if cv.optimism > 0.0 {
            positive += 1;
        }
    }
    assert!(positive >= 95, "positive optimism in {positive}/100 seeds");
}

#[test]
fn fitted_density_integrates_to_one() {
    let cfg = DgpConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    for seed in 0..10u64 {
        let truth = generate_ground_truth(&cfg, seed).unwrap();
        let data = sample_dataset(&truth, 40, seed + 500).unwrap();
        let space = build_model_space(cfg.p, 1, seed).unwrap();
        let model = fit_mle(&data, &space.subsets[0]).unwrap();
        let x: Vec<f64> = (0..cfg.p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mu = model.mean(&x);
        let sigma = model.sigma_hat;
        // Simpson's rule over mu +/- 12 sigma with 10^4 intervals.
        let steps = 10_000usize;
        let (lo, hi) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
        let h = (hi - lo) / steps as f64;
        let f = |y: f64| log_density(&model, &x, y).exp();
        let mut integral = f(lo) + f(hi);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            integral += w * f(lo + i as f64 * h);
        }
        integral *= h / 3.0;
        assert!((integral - 1.0).abs() <= 1e-6, "integral {integral}");
    }
}

#[test]
fn mle_is_a_local_maximum_of_the_likelihood() {
    let cfg = DgpConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for seed in 0..10u64 {
        let truth = generate_ground_truth(&cfg, seed).unwrap();
        let data = sample_dataset(&truth, 60, seed + 900).unwrap();
        let space = build_model_space(cfg.p, 1, seed + 50).unwrap();
        let model = fit_mle(&data, &space.subsets[0]).unwrap();

        let loglik = |m: &modelmix_core::GaussianLinearModel| -> f64 {
            (0..data.n())
                .map(|i| log_density(m, data.row(i), data.y(i)))
                .sum()
        };
        let base = loglik(&model);

        // sigma_hat^2 = RSS / n exactly when above the floor.
        let rss: f64 = (0..data.n())
            .map(|i| {
                let e = data.y(i) - model.mean(data.row(i));
                e * e
            })
            .sum();
        if model.sigma_hat > 1e-6 {
            assert!((model.sigma_hat * model.sigma_hat - rss / data.n() as f64).abs() <= 1e-10);
        }

        for _ in 0..20 {
            let mut dir: Vec<f64> = (0..=model.beta_hat.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let norm: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            for d in &mut dir {
                *d *= 1e-3 / norm;
            }
            let mut perturbed = model.clone();
            for (b, d) in perturbed.beta_hat.iter_mut().zip(&dir) {
                *b += d;
            }
            perturbed.alpha_hat += dir[model.beta_hat.len()];
            assert!(loglik(&perturbed) <= base + 1e-9);
        }
    }
}

#[test]
fn fold_seed_never_alters_full_fit_column() {
    let cfg = DgpConfig::default();
    let truth = generate_ground_truth(&cfg, 11).unwrap();
    let data = sample_dataset(&truth, 30, 12).unwrap();
    let space = build_model_space(cfg.p, 3, 13).unwrap();
    for subset in &space.subsets {
        let adapter = GaussianMleAdapter {
            subset: subset.clone(),
        };
        let mut reference: Option<Vec<f64>> = None;
        for fold_seed in 0..5u64 {
            let plan = make_folds(30, 5, fold_seed).unwrap();
            let cv = cv_optimism(&adapter, &data, &plan).unwrap();
            match &reference {
                None => reference = Some(cv.full_fit_log_density),
                Some(r) => assert_eq!(r, &cv.full_fit_log_density),
            }
        }
    }
}

#[test]
fn end_to_end_replication_is_bitwise_reproducible() {
    let run = || -> (Vec<f64>, f64) {
        let cfg = DgpConfig::default();
        let truth = generate_ground_truth(&cfg, 21).unwrap();
        let data = sample_dataset(&truth, 50, 22).unwrap();
        let test = sample_dataset(&truth, 200, 23).unwrap();
        let space = build_model_space(cfg.p, 10, 24).unwrap();
        let plan = make_folds(50, 5, 25).unwrap();
        let mut columns = Vec::new();
        let mut ops = Vec::new();
        let mut models = Vec::new();
        for subset in &space.subsets {
            let adapter = GaussianMleAdapter {
                subset: subset.clone(),
            };
            let cv = cv_optimism(&adapter, &data, &plan).unwrap();
            columns.push(cv.full_fit_log_density);
            ops.push(cv.optimism);
            models.push(fit_mle(&data, subset).unwrap());
        }
        let matrix = modelmix_core::LogDensityMatrix::from_columns(&columns).unwrap();
        let op = modelmix_core::OptimismVector::new(ops).unwrap();
        let (w, _) = modelmix_core::divergence_weights(
            &matrix,
            &op,
            &modelmix_core::PenaltyConfig::default(),
            &modelmix_core::SolverConfig::default(),
        )
        .unwrap();
        let rmse = modelmix_core::mixture_rmse(&w, &models, &test).unwrap();
        (w.into_vec(), rmse)
    };
    let (w1, r1) = run();
    let (w2, r2) = run();
    assert_eq!(w1, w2);
    assert_eq!(r1.to_bits(), r2.to_bits());
}
