//! Gaussian linear-regression model family, data-generating processes, random
//! model-space construction, and point-prediction metrics.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::optimism::{FittedPredictor, ModelAdapter};
use crate::types::{Error, SimplexWeights};

const LN_2PI: f64 = 1.8378770664093453;
/// Lower bound on the MLE scale so interpolating fits keep finite log
/// densities.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Design matrix (row-major) and response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    x: Vec<f64>, // n * p, row-major
    y: Vec<f64>,
    n: usize,
    p: usize,
}

impl RegressionDataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, n: usize, p: usize) -> Result<Self, Error> {
        if x.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "design matrix",
                expected: n * p,
                got: x.len(),
            });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response vector",
                expected: n,
                got: y.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite {
                what: "design matrix",
                index: i,
            });
        }
        if let Some(i) = y.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite {
                what: "response vector",
                index: i,
            });
        }
        Ok(Self { x, y, n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Copy of the dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RegressionDataset {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        RegressionDataset {
            x,
            y,
            n: rows.len(),
            p: self.p,
        }
    }
}

/// Error distribution of the data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Gaussian,
    /// `noise_sd` times a Student-t(3) variate.
    StudentT3,
}

/// Data-generating-process configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub p: usize,
    pub beta_sd: f64,
    pub alpha_sd: f64,
    pub noise_sd: f64,
    pub sparse: bool,
    /// Pairwise column correlation 0.5 via a single common factor per row.
    pub correlated: bool,
    pub error_kind: ErrorKind,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            p: 20,
            beta_sd: 0.5,
            alpha_sd: 2.0,
            noise_sd: 5.0,
            sparse: false,
            correlated: false,
            error_kind: ErrorKind::Gaussian,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.beta_sd > 0.0 && self.alpha_sd > 0.0 && self.noise_sd > 0.0) {
            return Err(Error::InvalidConfig("all sd values must be positive"));
        }
        Ok(())
    }
}

/// True regression coefficients of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub config: DgpConfig,
}

/// Draws ground-truth coefficients: beta_j ~ N(0, beta_sd^2),
/// alpha ~ N(0, alpha_sd^2); in the sparse variant a uniformly random half of
/// beta (exactly floor(p/2) components) is set to zero.
pub fn generate_ground_truth(cfg: &DgpConfig, seed: u64) -> Result<GroundTruth, Error> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut beta: Vec<f64> = (0..cfg.p)
        .map(|_| cfg.beta_sd * standard_normal(&mut rng))
        .collect();
    let alpha = cfg.alpha_sd * standard_normal(&mut rng);
    if cfg.sparse {
        let zeros = rand::seq::index::sample(&mut rng, cfg.p, cfg.p / 2);
        for i in zeros {
            beta[i] = 0.0;
        }
    }
    Ok(GroundTruth {
        beta,
        alpha,
        config: cfg.clone(),
    })
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Samples a dataset from the ground truth: independent N(0,1) design, or a
/// correlated design `x_ij = sqrt(0.5) g_i + sqrt(0.5) z_ij` (unit marginal
/// variance, pairwise correlation 0.5); `y = X beta + alpha + eps`.
pub fn sample_dataset(
    truth: &GroundTruth,
    n: usize,
    seed: u64,
) -> Result<RegressionDataset, Error> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let cfg = &truth.config;
    let p = cfg.p;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let half_sqrt = 0.5f64.sqrt();

    let mut x = vec![0.0; n * p];
    for i in 0..n {
        if cfg.correlated {
            let g = standard_normal(&mut rng);
            for j in 0..p {
                x[i * p + j] = half_sqrt * g + half_sqrt * standard_normal(&mut rng);
            }
        } else {
            for j in 0..p {
                x[i * p + j] = standard_normal(&mut rng);
            }
        }
    }

    let t3 = StudentT::new(3.0).expect("valid dof");
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut mean = truth.alpha;
        for j in 0..p {
            mean += x[i * p + j] * truth.beta[j];
        }
        let eps = match cfg.error_kind {
            ErrorKind::Gaussian => cfg.noise_sd * standard_normal(&mut rng),
            ErrorKind::StudentT3 => cfg.noise_sd * t3.sample(&mut rng),
        };
        y[i] = mean + eps;
    }
    RegressionDataset::new(x, y, n, p)
}

/// K random predictor subsets, each of size uniform on {1..5}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpace {
    pub subsets: Vec<Vec<usize>>,
}

impl ModelSpace {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// Draws `k` random models: a size m uniform on {1..5}, then m distinct
/// predictor indices without replacement. Duplicate subsets across models are
/// permitted.
pub fn build_model_space(p: usize, k: usize, seed: u64) -> Result<ModelSpace, Error> {
    if p < 5 {
        return Err(Error::InvalidConfig("model space requires p >= 5"));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("model space requires K >= 1"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut subsets = Vec::with_capacity(k);
    for _ in 0..k {
        let m = rng.random_range(1..=5usize);
        subsets.push(rand::seq::index::sample(&mut rng, p, m).into_vec());
    }
    Ok(ModelSpace { subsets })
}

/// A fitted Gaussian linear model on a predictor subset plus intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLinearModel {
    pub predictor_subset: Vec<usize>,
    pub beta_hat: Vec<f64>,
    pub alpha_hat: f64,
    /// MLE scale (RSS/n), floored at [`SIGMA_FLOOR`].
    pub sigma_hat: f64,
}

impl GaussianLinearModel {
    /// Predictive mean at input row `x` (full p-length row; the model reads
    /// only its own subset).
    pub fn mean(&self, x: &[f64]) -> f64 {
        let mut mu = self.alpha_hat;
        for (&j, &b) in self.predictor_subset.iter().zip(&self.beta_hat) {
            mu += b * x[j];
        }
        mu
    }
}

impl FittedPredictor for GaussianLinearModel {
    fn log_density(&self, x: &[f64], y: f64) -> f64 {
        log_density(self, x, y)
    }
    fn predictive_mean(&self, x: &[f64]) -> f64 {
        self.mean(x)
    }
}

/// Maximum-likelihood fit of the Gaussian linear model on `subset` columns
/// plus an intercept.
///
/// The least-squares problem is solved through an SVD of the augmented
/// design; rank-deficient designs (including n <= m+1) take the minimum-norm
/// solution. The scale estimate is the MLE sqrt(RSS/n), floored.
pub fn fit_mle(data: &RegressionDataset, subset: &[usize]) -> Result<GaussianLinearModel, Error> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let m = subset.len();
    let mut design = DMatrix::zeros(n, m + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        let row = data.row(i);
        for (c, &j) in subset.iter().enumerate() {
            design[(i, c + 1)] = row[j];
        }
    }
    let b = DVector::from_column_slice(data.responses());

    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = f64::EPSILON * sigma_max * n.max(m + 1) as f64;
    let coef = svd
        .solve(&b, eps)
        .map_err(|_| Error::InvalidConfig("SVD solve failed"))?;

    let residual = &b - design * &coef;
    let rss: f64 = residual.iter().map(|r| r * r).sum();
    let sigma_hat = (rss / n as f64).sqrt().max(SIGMA_FLOOR);

    Ok(GaussianLinearModel {
        predictor_subset: subset.to_vec(),
        beta_hat: coef.iter().skip(1).cloned().collect(),
        alpha_hat: coef[0],
        sigma_hat,
    })
}

/// Gaussian log density of the fitted model at (x, y).
pub fn log_density(model: &GaussianLinearModel, x: &[f64], y: f64) -> f64 {
    let mu = model.mean(x);
    let z = (y - mu) / model.sigma_hat;
    -0.5 * LN_2PI - model.sigma_hat.ln() - 0.5 * z * z
}

/// RMSE of the weighted point prediction `sum_k w_k mu_k(x)` on a test set.
pub fn mixture_rmse(
    w: &SimplexWeights,
    models: &[GaussianLinearModel],
    test: &RegressionDataset,
) -> Result<f64, Error> {
    if w.len() != models.len() {
        return Err(Error::DimensionMismatch {
            what: "model list",
            expected: w.len(),
            got: models.len(),
        });
    }
    let n = test.n();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let mut sse = 0.0;
    for i in 0..n {
        let x = test.row(i);
        let pred: f64 = w
            .as_slice()
            .iter()
            .zip(models)
            .map(|(&wk, mk)| wk * mk.mean(x))
            .sum();
        let e = test.y(i) - pred;
        sse += e * e;
    }
    Ok((sse / n as f64).sqrt())
}

/// [`ModelAdapter`] wrapping [`fit_mle`] for a fixed predictor subset.
#[derive(Debug, Clone)]
pub struct GaussianMleAdapter {
    pub subset: Vec<usize>,
}

impl ModelAdapter for GaussianMleAdapter {
    type Fitted = GaussianLinearModel;
    type Error = Error;

    fn fit(&self, data: &RegressionDataset, rows: &[usize]) -> Result<GaussianLinearModel, Error> {
        fit_mle(&data.select_rows(rows), &self.subset)
    }
}
