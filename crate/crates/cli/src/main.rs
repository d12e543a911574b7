use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use modelmix_cli::csvio::{fmt_float, read_matrix_csv, read_optimism_csv};
use modelmix_cli::experiments::{
    run_convergence, run_robustness, run_simulate, run_stability, write_convergence_csv,
    write_robustness_csv, write_simulate_csv, write_stability_csv, ExperimentConfig, Method,
    PriorKind, Scenario, Variant, DEFAULT_N_GRID,
};
use modelmix_cli::selftest::run_selftest;
use modelmix_core::{
    divergence_weights, negative_exponentiated_weights, stacking_weights, ErrorKind,
    LogDensityMatrix, OptimismVector, PenaltyConfig, PenaltyKind, Prior, SimplexWeights,
    SolverConfig, SolverReport,
};

const EXIT_MALFORMED: u8 = 2;
const EXIT_DIMENSION: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "modelmix",
    version,
    about = "Divergence-based model weighting and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute weights from a log-density CSV and print them as JSON.
    Weights(WeightsArgs),
    /// Run the RMSE benchmarking grid to CSV.
    Simulate(SimulateArgs),
    /// Run the weight-stability study (fixed truth and model space) to CSV.
    Stability(StabilityArgs),
    /// Run penalty/prior/error robustness variants to CSV.
    Robustness(RobustnessArgs),
    /// Run the objective-convergence study to CSV.
    Convergence(ConvergenceArgs),
    /// Run the built-in verification suites.
    Selftest,
}

#[derive(Args)]
struct WeightsArgs {
    /// Log-density matrix CSV (header of model labels, one observation per row).
    #[arg(long)]
    input: PathBuf,
    /// Optimism CSV with columns `model,optimism` (required for dw and new).
    #[arg(long)]
    optimism: Option<PathBuf>,
    /// Inline comma-separated optimism values in matrix column order.
    #[arg(long)]
    op: Option<String>,
    #[arg(long, default_value = "dw")]
    method: Method,
    #[arg(long, default_value = "kl")]
    penalty: String,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value = "optimism")]
    prior: PriorKind,
}

#[derive(Args, Clone)]
struct HarnessArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Comma-separated subset of dw,stack,new.
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Dw, Method::Stack, Method::New])]
    methods: Vec<Method>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    harness: HarnessArgs,
    #[arg(long, default_value_t = 200)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_values_t = Scenario::ALL)]
    scenarios: Vec<Scenario>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_N_GRID)]
    n_grid: Vec<usize>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    harness: HarnessArgs,
    #[arg(long, default_value_t = 300)]
    replications: usize,
    #[arg(long, default_value = "nonsparse_indep")]
    scenario: Scenario,
    #[arg(long, value_delimiter = ',', default_values_t = [25usize, 100])]
    n_grid: Vec<usize>,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    harness: HarnessArgs,
    #[arg(long, default_value_t = 200)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [Scenario::NonsparseIndep])]
    scenarios: Vec<Scenario>,
    #[arg(long, value_delimiter = ',', default_values_t = [50usize])]
    n_grid: Vec<usize>,
    /// Comma-separated scale values for the penalty term.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    c: Vec<f64>,
    /// Comma-separated subset of kl,brier.
    #[arg(long, value_delimiter = ',', default_values_t = ["kl".to_string()])]
    penalty: Vec<String>,
    /// Comma-separated subset of optimism,uniform.
    #[arg(long, value_delimiter = ',', default_values_t = [PriorKind::Optimism])]
    prior: Vec<PriorKind>,
    /// Comma-separated subset of gaussian,t3.
    #[arg(long, value_delimiter = ',', default_values_t = ["gaussian".to_string()])]
    errors: Vec<String>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    harness: HarnessArgs,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    #[arg(long, default_value = "nonsparse_indep")]
    scenario: Scenario,
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("modelmix: {message}");
    ExitCode::from(code)
}

fn parse_penalty(s: &str) -> Result<PenaltyKind, String> {
    match s {
        "kl" => Ok(PenaltyKind::Kl),
        "brier" => Ok(PenaltyKind::Brier),
        other => Err(format!("unknown penalty {other:?}")),
    }
}

fn parse_error_kind(s: &str) -> Result<ErrorKind, String> {
    match s {
        "gaussian" => Ok(ErrorKind::Gaussian),
        "t3" => Ok(ErrorKind::StudentT3),
        other => Err(format!("unknown error kind {other:?}")),
    }
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn print_weights_json(
    method: Method,
    labels: &[String],
    weights: &SimplexWeights,
    report: &SolverReport,
) {
    let pairs: Vec<String> = labels
        .iter()
        .zip(weights.as_slice())
        .map(|(label, &w)| format!("\"{}\":{}", json_escape(label), fmt_float(w)))
        .collect();
    println!(
        "{{\"method\":\"{}\",\"weights\":{{{}}},\"objective\":{},\"iterations\":{},\"kkt_residual\":{},\"converged\":{}}}",
        method.name(),
        pairs.join(","),
        fmt_float(report.objective),
        report.iterations,
        fmt_float(report.kkt_residual),
        report.converged
    );
}

fn load_optimism(
    args: &WeightsArgs,
    matrix: &LogDensityMatrix,
) -> Result<OptimismVector, ExitCode> {
    if let Some(inline) = &args.op {
        let mut values = Vec::new();
        for cell in inline.split(',') {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(fail(
                        EXIT_MALFORMED,
                        format!("non-numeric inline optimism value {:?}", cell.trim()),
                    ))
                }
            }
        }
        if values.len() != matrix.n_models() {
            return Err(fail(
                EXIT_DIMENSION,
                format!(
                    "optimism has {} entries, matrix has {} models",
                    values.len(),
                    matrix.n_models()
                ),
            ));
        }
        return OptimismVector::new(values).map_err(|e| fail(EXIT_MALFORMED, e));
    }
    let path = match &args.optimism {
        Some(path) => path,
        None => {
            return Err(fail(
                EXIT_DIMENSION,
                "method requires --optimism <csv> or --op <values>",
            ))
        }
    };
    let file = match File::open(path) {
        Ok(file) => file,
        Err(e) => return Err(fail(EXIT_MALFORMED, format!("{}: {e}", path.display()))),
    };
    read_optimism_csv(BufReader::new(file), matrix.labels()).map_err(|e| {
        fail(
            if e.dimension {
                EXIT_DIMENSION
            } else {
                EXIT_MALFORMED
            },
            e,
        )
    })
}

fn cmd_weights(args: WeightsArgs) -> ExitCode {
    let file = match File::open(&args.input) {
        Ok(file) => file,
        Err(e) => return fail(EXIT_MALFORMED, format!("{}: {e}", args.input.display())),
    };
    let matrix = match read_matrix_csv(BufReader::new(file)) {
        Ok(matrix) => matrix,
        Err(e) => return fail(EXIT_MALFORMED, e),
    };
    let penalty = match parse_penalty(&args.penalty) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_MALFORMED, e),
    };
    let solver = SolverConfig::default();

    let (weights, report) = match args.method {
        Method::Stack => match stacking_weights(&matrix, &solver) {
            Ok(out) => out,
            Err(e) => return fail(EXIT_MALFORMED, e),
        },
        Method::Dw => {
            let op = match load_optimism(&args, &matrix) {
                Ok(op) => op,
                Err(code) => return code,
            };
            let cfg = PenaltyConfig {
                kind: penalty,
                scale_c: args.c,
                prior: match args.prior {
                    PriorKind::Optimism => Prior::OptimismPenalizing,
                    PriorKind::Uniform => Prior::Uniform,
                },
            };
            match divergence_weights(&matrix, &op, &cfg, &solver) {
                Ok(out) => out,
                Err(modelmix_core::Error::DimensionMismatch { .. }) => {
                    return fail(EXIT_DIMENSION, "matrix/optimism dimension mismatch")
                }
                Err(e) => return fail(EXIT_MALFORMED, e),
            }
        }
        Method::New => {
            let op = match load_optimism(&args, &matrix) {
                Ok(op) => op,
                Err(code) => return code,
            };
            let scores: Vec<f64> = (0..matrix.n_models())
                .map(|k| -matrix.column_log_sum(k) + op.as_slice()[k])
                .collect();
            let w = match negative_exponentiated_weights(&scores) {
                Ok(w) => w,
                Err(e) => return fail(EXIT_MALFORMED, e),
            };
            // Closed-form solution: report the minimized linear+entropy
            // objective it solves.
            let objective: f64 = w
                .as_slice()
                .iter()
                .zip(&scores)
                .map(|(&wi, &s)| wi * s + modelmix_core::xlogx(wi))
                .sum();
            let report = SolverReport {
                objective,
                iterations: 0,
                kkt_residual: 0.0,
                converged: true,
                wall_time: 0.0,
            };
            (w, report)
        }
    };

    print_weights_json(args.method, matrix.labels(), &weights, &report);
    if report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn open_output(path: &Path) -> Result<BufWriter<File>, ExitCode> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| fail(EXIT_MALFORMED, format!("{}: {e}", path.display())))
}

fn finish_output(mut writer: BufWriter<File>, path: &Path) -> ExitCode {
    match writer.flush() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_MALFORMED, format!("{}: {e}", path.display())),
    }
}

fn cmd_simulate(args: SimulateArgs) -> ExitCode {
    let cfg = ExperimentConfig {
        scenarios: args.scenarios,
        n_grid: args.n_grid,
        replications: args.replications,
        base_seed: args.harness.seed,
        methods: args.harness.methods.clone(),
        jobs: args.harness.jobs,
        ..ExperimentConfig::default()
    };
    let records = run_simulate(&cfg);
    let mut writer = match open_output(&args.harness.output) {
        Ok(w) => w,
        Err(code) => return code,
    };
    if let Err(e) = write_simulate_csv(&mut writer, &records) {
        return fail(EXIT_MALFORMED, e);
    }
    finish_output(writer, &args.harness.output)
}

fn cmd_stability(args: StabilityArgs) -> ExitCode {
    let cfg = ExperimentConfig {
        scenarios: vec![args.scenario],
        n_grid: args.n_grid,
        replications: args.replications,
        base_seed: args.harness.seed,
        methods: args.harness.methods.clone(),
        jobs: args.harness.jobs,
        ..ExperimentConfig::default()
    };
    let records = run_stability(&cfg, args.scenario);
    let mut writer = match open_output(&args.harness.output) {
        Ok(w) => w,
        Err(code) => return code,
    };
    if let Err(e) = write_stability_csv(&mut writer, &records) {
        return fail(EXIT_MALFORMED, e);
    }
    finish_output(writer, &args.harness.output)
}

fn cmd_robustness(args: RobustnessArgs) -> ExitCode {
    let mut variants = Vec::new();
    for penalty in &args.penalty {
        let penalty = match parse_penalty(penalty) {
            Ok(p) => p,
            Err(e) => return fail(EXIT_MALFORMED, e),
        };
        for &c in &args.c {
            for &prior in &args.prior {
                for errors in &args.errors {
                    let error_kind = match parse_error_kind(errors) {
                        Ok(k) => k,
                        Err(e) => return fail(EXIT_MALFORMED, e),
                    };
                    variants.push(Variant {
                        penalty,
                        c,
                        prior,
                        error_kind,
                    });
                }
            }
        }
    }
    let cfg = ExperimentConfig {
        scenarios: args.scenarios,
        n_grid: args.n_grid,
        replications: args.replications,
        base_seed: args.harness.seed,
        methods: args.harness.methods.clone(),
        jobs: args.harness.jobs,
        ..ExperimentConfig::default()
    };
    let records = run_robustness(&cfg, &variants);
    let mut writer = match open_output(&args.harness.output) {
        Ok(w) => w,
        Err(code) => return code,
    };
    if let Err(e) = write_robustness_csv(&mut writer, &records) {
        return fail(EXIT_MALFORMED, e);
    }
    finish_output(writer, &args.harness.output)
}

fn cmd_convergence(args: ConvergenceArgs) -> ExitCode {
    let records = run_convergence(
        args.harness.seed,
        args.replications,
        args.harness.jobs,
        args.scenario,
    );
    let mut writer = match open_output(&args.harness.output) {
        Ok(w) => w,
        Err(code) => return code,
    };
    if let Err(e) = write_convergence_csv(&mut writer, &records) {
        return fail(EXIT_MALFORMED, e);
    }
    finish_output(writer, &args.harness.output)
}

fn cmd_selftest() -> ExitCode {
    let start = Instant::now();
    let results = run_selftest();
    let mut all_passed = true;
    for suite in &results {
        println!(
            "{}: {}",
            suite.name,
            if suite.passed { "pass" } else { "FAIL" }
        );
        all_passed &= suite.passed;
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > 60.0 {
        eprintln!("modelmix: warning: selftest took {elapsed:.1} s (budget 60 s)");
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Weights(args) => cmd_weights(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Stability(args) => cmd_stability(args),
        Command::Robustness(args) => cmd_robustness(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Selftest => cmd_selftest(),
    }
}
