//! Seeded, parallel experiment harness: RMSE benchmarking of the weighting
//! methods, weight-stability runs, penalty/prior robustness grids, and the
//! objective-convergence study. All randomness flows from per-cell derived
//! seeds and records are sorted before writing, so output is independent of
//! scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use modelmix_core::{
    build_model_space, cv_optimism, divergence_objective, divergence_weights, fit_mle,
    generate_ground_truth, log_density, make_folds, mixture_log_score, mixture_rmse,
    negative_exponentiated_weights, sample_dataset, stacking_weights, DgpConfig, ErrorKind,
    GaussianLinearModel, GaussianMleAdapter, LogDensityMatrix, OptimismVector, PenaltyConfig,
    PenaltyKind, Prior, SimplexWeights, SolverConfig,
};
use rayon::prelude::*;

use crate::csvio::fmt_float;

pub const DEFAULT_N_GRID: [usize; 6] = [10, 25, 50, 100, 150, 200];
pub const TEST_SIZE: usize = 200;
pub const MODELS_PER_SPACE: usize = 10;
pub const CV_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    NonsparseIndep,
    NonsparseCorr,
    SparseIndep,
    SparseCorr,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::NonsparseIndep,
        Scenario::NonsparseCorr,
        Scenario::SparseIndep,
        Scenario::SparseCorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NonsparseIndep => "nonsparse_indep",
            Scenario::NonsparseCorr => "nonsparse_corr",
            Scenario::SparseIndep => "sparse_indep",
            Scenario::SparseCorr => "sparse_corr",
        }
    }

    pub fn dgp(self, error_kind: ErrorKind) -> DgpConfig {
        DgpConfig {
            sparse: matches!(self, Scenario::SparseIndep | Scenario::SparseCorr),
            correlated: matches!(self, Scenario::NonsparseCorr | Scenario::SparseCorr),
            error_kind,
            ..DgpConfig::default()
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nonsparse_indep" => Ok(Scenario::NonsparseIndep),
            "nonsparse_corr" => Ok(Scenario::NonsparseCorr),
            "sparse_indep" => Ok(Scenario::SparseIndep),
            "sparse_corr" => Ok(Scenario::SparseCorr),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Dw,
    Stack,
    New,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dw, Method::Stack, Method::New];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dw => "dw",
            Method::Stack => "stack",
            Method::New => "new",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dw" => Ok(Method::Dw),
            "stack" => Ok(Method::Stack),
            "new" => Ok(Method::New),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Optimism,
    Uniform,
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Optimism => "optimism",
            PriorKind::Uniform => "uniform",
        }
    }

    fn to_prior(self) -> Prior {
        match self {
            PriorKind::Optimism => Prior::OptimismPenalizing,
            PriorKind::Uniform => Prior::Uniform,
        }
    }
}

impl FromStr for PriorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "optimism" => Ok(PriorKind::Optimism),
            "uniform" => Ok(PriorKind::Uniform),
            other => Err(format!("unknown prior {other:?}")),
        }
    }
}

/// One robustness variant of the divergence-weighting penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub penalty: PenaltyKind,
    pub c: f64,
    pub prior: PriorKind,
    pub error_kind: ErrorKind,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            penalty: PenaltyKind::Kl,
            c: 1.0,
            prior: PriorKind::Optimism,
            error_kind: ErrorKind::Gaussian,
        }
    }
}

impl Variant {
    pub fn penalty_name(&self) -> &'static str {
        match self.penalty {
            PenaltyKind::Kl => "kl",
            PenaltyKind::Brier => "brier",
        }
    }

    pub fn error_name(&self) -> &'static str {
        match self.error_kind {
            ErrorKind::Gaussian => "gaussian",
            ErrorKind::StudentT3 => "t3",
        }
    }

    fn penalty_config(&self) -> PenaltyConfig {
        PenaltyConfig {
            kind: self.penalty,
            scale_c: self.c,
            prior: self.prior.to_prior(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenarios: Vec<Scenario>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub test_size: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenarios: Scenario::ALL.to_vec(),
            n_grid: DEFAULT_N_GRID.to_vec(),
            replications: 200,
            test_size: TEST_SIZE,
            base_seed: 0,
            methods: Method::ALL.to_vec(),
            jobs: 0,
        }
    }
}

/// One (scenario, n, replication, method) result row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: &'static str,
    pub n: usize,
    pub replication: usize,
    pub method: &'static str,
    pub rmse: f64,
    pub mean_log_score: f64,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub solver_converged: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (scenario, n, replication) cell stream: base + replication
/// index, then mixed with the cell coordinates so cells are independent.
fn cell_seed(base: u64, scenario: usize, n: usize, replication: usize, stream: u64) -> u64 {
    let tag = (scenario as u64) << 48 ^ (n as u64) << 24 ^ replication as u64;
    splitmix64(
        base.wrapping_add(replication as u64)
            ^ splitmix64(tag)
            ^ stream.wrapping_mul(0xA5A5_A5A5_A5A5_A5A5),
    )
}

/// Everything fit once per replication cell and shared by all methods.
struct FittedCell {
    models: Vec<GaussianLinearModel>,
    matrix: LogDensityMatrix,
    heldout: LogDensityMatrix,
    op: OptimismVector,
}

fn fit_cell(
    dgp: &DgpConfig,
    truth_seed: u64,
    space_seed: u64,
    data_seed: u64,
    fold_seed: u64,
    n: usize,
) -> FittedCell {
    let truth = generate_ground_truth(dgp, truth_seed).expect("valid dgp");
    let space = build_model_space(dgp.p, MODELS_PER_SPACE, space_seed).expect("valid space");
    let data = sample_dataset(&truth, n, data_seed).expect("valid data");
    let plan = make_folds(n, CV_FOLDS, fold_seed).expect("n >= folds");

    let mut models = Vec::with_capacity(space.len());
    let mut full_cols = Vec::with_capacity(space.len());
    let mut heldout_cols = Vec::with_capacity(space.len());
    let mut op = Vec::with_capacity(space.len());
    for subset in &space.subsets {
        let adapter = GaussianMleAdapter {
            subset: subset.clone(),
        };
        let cv = cv_optimism(&adapter, &data, &plan).expect("gaussian fit succeeds");
        op.push(cv.optimism);
        full_cols.push(cv.full_fit_log_density);
        heldout_cols.push(cv.heldout_log_density);
        models.push(fit_mle(&data, subset).expect("gaussian fit succeeds"));
    }
    FittedCell {
        models,
        matrix: LogDensityMatrix::from_columns(&full_cols).expect("finite densities"),
        heldout: LogDensityMatrix::from_columns(&heldout_cols).expect("finite densities"),
        op: OptimismVector::new(op).expect("finite optimism"),
    }
}

fn weights_for_method(
    method: Method,
    cell: &FittedCell,
    variant: &Variant,
) -> (SimplexWeights, bool) {
    let solver = SolverConfig::default();
    match method {
        Method::Dw => {
            let (w, report) =
                divergence_weights(&cell.matrix, &cell.op, &variant.penalty_config(), &solver)
                    .expect("valid divergence instance");
            (w, report.converged)
        }
        Method::Stack => {
            let (w, report) = stacking_weights(&cell.heldout, &solver).expect("valid stacking");
            (w, report.converged)
        }
        Method::New => {
            let scores: Vec<f64> = (0..cell.matrix.n_models())
                .map(|k| -cell.matrix.column_log_sum(k) + cell.op.as_slice()[k])
                .collect();
            let w = negative_exponentiated_weights(&scores).expect("finite scores");
            (w, true)
        }
    }
}

fn evaluate_cell(
    scenario: Scenario,
    n: usize,
    replication: usize,
    cfg: &ExperimentConfig,
    methods: &[Method],
    variant: &Variant,
) -> Vec<RunRecord> {
    let idx = Scenario::ALL.iter().position(|&s| s == scenario).unwrap();
    let seed = cell_seed(cfg.base_seed, idx, n, replication, 0);
    let dgp = scenario.dgp(variant.error_kind);
    let cell = fit_cell(
        &dgp,
        cell_seed(cfg.base_seed, idx, n, replication, 1),
        cell_seed(cfg.base_seed, idx, n, replication, 2),
        cell_seed(cfg.base_seed, idx, n, replication, 3),
        cell_seed(cfg.base_seed, idx, n, replication, 4),
        n,
    );
    let truth = generate_ground_truth(&dgp, cell_seed(cfg.base_seed, idx, n, replication, 1))
        .expect("valid dgp");
    let test = sample_dataset(
        &truth,
        cfg.test_size,
        cell_seed(cfg.base_seed, idx, n, replication, 5),
    )
    .expect("valid test data");
    let test_cols: Vec<Vec<f64>> = cell
        .models
        .iter()
        .map(|m| {
            (0..test.n())
                .map(|i| log_density(m, test.row(i), test.y(i)))
                .collect()
        })
        .collect();
    let test_matrix = LogDensityMatrix::from_columns(&test_cols).expect("finite densities");

    methods
        .iter()
        .map(|&method| {
            let (w, converged) = weights_for_method(method, &cell, variant);
            let rmse = mixture_rmse(&w, &cell.models, &test).expect("nonempty test");
            let mls = mixture_log_score(&w, &test_matrix).expect("nonempty test");
            RunRecord {
                scenario: scenario.name(),
                n,
                replication,
                method: method.name(),
                rmse,
                mean_log_score: mls,
                weights: w.into_vec(),
                seed,
                solver_converged: converged,
            }
        })
        .collect()
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        (a.scenario, a.n, a.replication, a.method).cmp(&(b.scenario, b.n, b.replication, b.method))
    });
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Vec<RunRecord> {
    run_with_variant(cfg, &Variant::default())
}

/// Runs the simulate grid under one penalty/prior/error variant. With the
/// default variant this is exactly `run_simulate`.
pub fn run_with_variant(cfg: &ExperimentConfig, variant: &Variant) -> Vec<RunRecord> {
    let cells: Vec<(Scenario, usize, usize)> = cfg
        .scenarios
        .iter()
        .flat_map(|&s| {
            cfg.n_grid
                .iter()
                .flat_map(move |&n| (0..cfg.replications).map(move |r| (s, n, r)))
        })
        .collect();
    let mut records: Vec<RunRecord> = with_pool(cfg.jobs, || {
        cells
            .par_iter()
            .flat_map_iter(|&(s, n, r)| evaluate_cell(s, n, r, cfg, &cfg.methods, variant))
            .collect()
    });
    sort_records(&mut records);
    records
}

pub fn write_simulate_csv<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    writeln!(
        w,
        "scenario,n,replication,method,rmse,mean_log_score,seed,solver_converged,weights"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n,
            r.replication,
            r.method,
            fmt_float(r.rmse),
            fmt_float(r.mean_log_score),
            r.seed,
            r.solver_converged,
            join_weights(&r.weights)
        )?;
    }
    Ok(())
}

fn join_weights(weights: &[f64]) -> String {
    weights
        .iter()
        .map(|&v| fmt_float(v))
        .collect::<Vec<_>>()
        .join(";")
}

/// Weight-stability study: one fixed ground truth and model space, data seed
/// varied across replications; reports the across-replication sd of each
/// weight component averaged over components, per (method, n).
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRecord {
    pub method: &'static str,
    pub n: usize,
    pub avg_weight_sd: f64,
}

pub fn run_stability(cfg: &ExperimentConfig, scenario: Scenario) -> Vec<StabilityRecord> {
    let variant = Variant::default();
    let dgp = scenario.dgp(variant.error_kind);
    let truth_seed = splitmix64(cfg.base_seed ^ 0x7275_7468);
    let space_seed = splitmix64(cfg.base_seed ^ 0x7370_6163);

    let mut out = Vec::new();
    for &n in &cfg.n_grid {
        let reps: Vec<Vec<(Method, Vec<f64>)>> = with_pool(cfg.jobs, || {
            (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let cell = fit_cell(
                        &dgp,
                        truth_seed,
                        space_seed,
                        cell_seed(cfg.base_seed, 0, n, r, 3),
                        cell_seed(cfg.base_seed, 0, n, r, 4),
                        n,
                    );
                    cfg.methods
                        .iter()
                        .map(|&m| (m, weights_for_method(m, &cell, &variant).0.into_vec()))
                        .collect()
                })
                .collect()
        });
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let k = reps[0][mi].1.len();
            let r = cfg.replications;
            let mut avg = 0.0;
            for comp in 0..k {
                let mean: f64 = reps.iter().map(|rep| rep[mi].1[comp]).sum::<f64>() / r as f64;
                let var: f64 = if r > 1 {
                    reps.iter()
                        .map(|rep| {
                            let d = rep[mi].1[comp] - mean;
                            d * d
                        })
                        .sum::<f64>()
                        / (r - 1) as f64
                } else {
                    0.0
                };
                avg += var.sqrt();
            }
            out.push(StabilityRecord {
                method: method.name(),
                n,
                avg_weight_sd: avg / k as f64,
            });
        }
    }
    out.sort_by(|a, b| (a.method, a.n).cmp(&(b.method, b.n)));
    out
}

pub fn write_stability_csv<W: Write>(mut w: W, records: &[StabilityRecord]) -> std::io::Result<()> {
    writeln!(w, "method,n,avg_weight_sd")?;
    for r in records {
        writeln!(w, "{},{},{}", r.method, r.n, fmt_float(r.avg_weight_sd))?;
    }
    Ok(())
}

/// A simulate record tagged with its robustness variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRecord {
    pub record: RunRecord,
    pub penalty_kind: &'static str,
    pub c: f64,
    pub prior_kind: &'static str,
    pub error_kind: &'static str,
}

pub fn run_robustness(cfg: &ExperimentConfig, variants: &[Variant]) -> Vec<RobustnessRecord> {
    let mut out = Vec::new();
    for variant in variants {
        for record in run_with_variant(cfg, variant) {
            out.push(RobustnessRecord {
                record,
                penalty_kind: variant.penalty_name(),
                c: variant.c,
                prior_kind: variant.prior.name(),
                error_kind: variant.error_name(),
            });
        }
    }
    out
}

pub fn write_robustness_csv<W: Write>(
    mut w: W,
    records: &[RobustnessRecord],
) -> std::io::Result<()> {
    writeln!(
        w,
        "scenario,n,replication,method,rmse,mean_log_score,seed,solver_converged,weights,penalty_kind,c,prior_kind,error_kind"
    )?;
    for rr in records {
        let r = &rr.record;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n,
            r.replication,
            r.method,
            fmt_float(r.rmse),
            fmt_float(r.mean_log_score),
            r.seed,
            r.solver_converged,
            join_weights(&r.weights),
            rr.penalty_kind,
            fmt_float(rr.c),
            rr.prior_kind,
            rr.error_kind
        )?;
    }
    Ok(())
}

/// Objective-convergence study: per-observation gap between the empirical
/// divergence objective at the fitted weights and `n` times the holdout
/// estimate of the expected negative log mixture density.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub median_gap: f64,
}

pub const CONVERGENCE_N_GRID: [usize; 3] = [50, 200, 800];
pub const CONVERGENCE_HOLDOUT: usize = 10_000;

pub fn run_convergence(
    base_seed: u64,
    replications: usize,
    jobs: usize,
    scenario: Scenario,
) -> Vec<ConvergenceRecord> {
    let variant = Variant::default();
    let dgp = scenario.dgp(variant.error_kind);
    let truth_seed = splitmix64(base_seed ^ 0x7275_7468);
    let space_seed = splitmix64(base_seed ^ 0x7370_6163);
    let truth = generate_ground_truth(&dgp, truth_seed).expect("valid dgp");

    CONVERGENCE_N_GRID
        .iter()
        .map(|&n| {
            let mut gaps: Vec<f64> = with_pool(jobs, || {
                (0..replications)
                    .into_par_iter()
                    .map(|r| {
                        let cell = fit_cell(
                            &dgp,
                            truth_seed,
                            space_seed,
                            cell_seed(base_seed, 0, n, r, 3),
                            cell_seed(base_seed, 0, n, r, 4),
                            n,
                        );
                        let penalty = variant.penalty_config();
                        let (w, _) = divergence_weights(
                            &cell.matrix,
                            &cell.op,
                            &penalty,
                            &SolverConfig::default(),
                        )
                        .expect("valid instance");
                        let obj = divergence_objective(&w, &cell.matrix, &cell.op, &penalty)
                            .expect("valid instance");
                        let holdout = sample_dataset(
                            &truth,
                            CONVERGENCE_HOLDOUT,
                            cell_seed(base_seed, 0, n, r, 6),
                        )
                        .expect("valid holdout");
                        let cols: Vec<Vec<f64>> = cell
                            .models
                            .iter()
                            .map(|m| {
                                (0..holdout.n())
                                    .map(|i| log_density(m, holdout.row(i), holdout.y(i)))
                                    .collect()
                            })
                            .collect();
                        let holdout_matrix =
                            LogDensityMatrix::from_columns(&cols).expect("finite densities");
                        let expected = mixture_log_score(&w, &holdout_matrix).expect("nonempty");
                        (obj - n as f64 * expected).abs() / n as f64
                    })
                    .collect()
            });
            gaps.sort_by(f64::total_cmp);
            let mid = gaps.len() / 2;
            let median = if gaps.len() % 2 == 1 {
                gaps[mid]
            } else {
                0.5 * (gaps[mid - 1] + gaps[mid])
            };
            ConvergenceRecord {
                n,
                median_gap: median,
            }
        })
        .collect()
}

pub fn write_convergence_csv<W: Write>(
    mut w: W,
    records: &[ConvergenceRecord],
) -> std::io::Result<()> {
    writeln!(w, "n,median_gap")?;
    for r in records {
        writeln!(w, "{},{}", r.n, fmt_float(r.median_gap))?;
    }
    Ok(())
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl clap::ValueEnum for Method {
    fn value_variants<'a>() -> &'a [Self] {
        &Method::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

impl clap::ValueEnum for Scenario {
    fn value_variants<'a>() -> &'a [Self] {
        &Scenario::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

impl clap::ValueEnum for PriorKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[PriorKind::Optimism, PriorKind::Uniform]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            scenarios: vec![Scenario::NonsparseIndep],
            n_grid: vec![10],
            replications: 2,
            methods: Method::ALL.to_vec(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn simulate_row_count_is_cells_times_methods() {
        let records = run_simulate(&tiny_config());
        assert_eq!(records.len(), 6);
    }

    #[test]
    fn simulate_is_deterministic_across_job_counts() {
        let serial = run_simulate(&ExperimentConfig {
            jobs: 1,
            ..tiny_config()
        });
        let parallel = run_simulate(&ExperimentConfig {
            jobs: 8,
            ..tiny_config()
        });
        assert_eq!(serial, parallel);
    }

    #[test]
    fn default_variant_matches_simulate_dw_rows() {
        let cfg = tiny_config();
        let simulate = run_simulate(&cfg);
        let robust = run_robustness(&cfg, &[Variant::default()]);
        let dw_rows: Vec<&RunRecord> = simulate.iter().filter(|r| r.method == "dw").collect();
        let robust_dw: Vec<&RunRecord> = robust
            .iter()
            .map(|r| &r.record)
            .filter(|r| r.method == "dw")
            .collect();
        assert_eq!(dw_rows.len(), robust_dw.len());
        for (a, b) in dw_rows.iter().zip(robust_dw) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn single_replication_stability_is_zero() {
        let records = run_stability(
            &ExperimentConfig {
                replications: 1,
                n_grid: vec![15],
                scenarios: vec![Scenario::NonsparseIndep],
                ..ExperimentConfig::default()
            },
            Scenario::NonsparseIndep,
        );
        assert!(records.iter().all(|r| r.avg_weight_sd == 0.0));
    }
}
