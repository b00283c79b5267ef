//! Command-line pipeline: density-ratio weights, weighted forests, quantile
//! prediction, OOB tuning, imputation, metrics and the simulation harness.
//!
//! Every run writes a `<out>.manifest.json` next to its primary output with
//! the fully resolved configuration, seed, tool version and wall time, so
//! any artifact can be regenerated from its manifest alone.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use shiftforest::eval::{
    evaluate_forest, run_simulation_cell, write_results_csv, SimulationConfig, SimulationResult,
};
use shiftforest::ratio::{
    classifier_ratio_fit, ulsif_fit, default_bandwidth_grid, default_ridge_grid,
    ClassifierRatioConfig, DEFAULT_MAX_CENTROIDS,
};
use shiftforest::{
    compute_metrics, fit_forest, load_dataset, save_dataset, tune_by_oob, Dataset, Error,
    ForestControls, ImportanceWeights, ImputationPlan, Result, WeightedForest,
};

#[derive(Parser, Serialize)]
#[command(name = "shiftforest", version, about = "Importance-weighted random forests under covariate shift")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0, env = "SHIFTFOREST_THREADS")]
    threads: usize,

    /// Print progress to stderr.
    #[arg(long, global = true, default_value_t = false, env = "SHIFTFOREST_VERBOSE")]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Estimate train/test density-ratio weights and write them to CSV.
    DensityRatio(DensityRatioArgs),
    /// Fit a weighted forest and serialize it to JSON.
    Fit(FitArgs),
    /// Predict means and conditional quantiles from a saved model.
    Predict(PredictArgs),
    /// Tune mtry by weighted out-of-bag error.
    Tune(TuneArgs),
    /// Impute missing covariate cells by iterative quantile forests.
    Impute(ImputeArgs),
    /// Compute metrics for saved predictions against observed responses.
    Eval(EvalArgs),
    /// Run the shifted-benchmark simulation grid.
    Simulate(SimulateArgs),
    /// Chain density-ratio, fit and predict in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args, Serialize, Clone)]
struct ForestArgs {
    /// Number of trees.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Features tried per split (default: p/3 rounded up).
    #[arg(long)]
    mtry: Option<usize>,
    /// Minimum rows per terminal node.
    #[arg(long, default_value_t = 5)]
    nodesize: usize,
    /// Terminal-node budget per tree.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Relative gain floor for splits (fraction of root deviance).
    #[arg(long)]
    min_gain: Option<f64>,
    /// Per-tree resample size as a fraction of n.
    #[arg(long, default_value_t = 0.6)]
    sample_fraction: f64,
    /// Resample with replacement.
    #[arg(long, default_value_t = false)]
    replace: bool,
}

impl ForestArgs {
    fn controls(&self, seed: u64) -> ForestControls {
        ForestControls {
            n_trees: self.trees,
            mtry: self.mtry,
            nodesize: self.nodesize,
            max_terminal_nodes: self.max_nodes,
            min_gain_fraction: self.min_gain,
            sample_fraction: self.sample_fraction,
            with_replacement: self.replace,
            seed,
        }
    }
}

#[derive(Args, Serialize)]
struct DensityRatioArgs {
    /// Training covariates CSV.
    #[arg(long)]
    train: PathBuf,
    /// Test covariates CSV.
    #[arg(long)]
    test: PathBuf,
    /// Response column to exclude from the covariates, if present.
    #[arg(long)]
    response: Option<String>,
    /// Estimator: "ulsif" or "classifier".
    #[arg(long, default_value = "ulsif")]
    method: String,
    /// Output CSV (index, raw, regularized).
    #[arg(long)]
    out: PathBuf,
    /// Target effective sample size as a fraction of n.
    #[arg(long, default_value_t = 0.75)]
    n0_fraction: f64,
    /// Kernel centroid budget for uLSIF.
    #[arg(long, default_value_t = DEFAULT_MAX_CENTROIDS)]
    max_centroids: usize,
    /// Odds stabilizer for the classifier method.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    #[arg(long, default_value_t = 0, env = "SHIFTFOREST_SEED")]
    seed: u64,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Training data CSV (features plus response column).
    #[arg(long)]
    train: PathBuf,
    /// Response column name.
    #[arg(long, default_value = "y")]
    response: String,
    /// Importance weights CSV from `density-ratio` (optional; uniform
    /// weights otherwise).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Which weight column to use.
    #[arg(long, default_value = "regularized")]
    weights_column: String,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, default_value_t = 0, env = "SHIFTFOREST_SEED")]
    seed: u64,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// Model JSON from `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Query data CSV (response column, if present, is ignored via --response).
    #[arg(long)]
    data: PathBuf,
    /// Response column to exclude from the query covariates, if present.
    #[arg(long)]
    response: Option<String>,
    /// Quantile levels for the prediction columns.
    #[arg(long, default_value = "0.1,0.5,0.9", value_delimiter = ',')]
    quantiles: Vec<String>,
    /// Output CSV (mean plus one column per quantile).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value = "regularized")]
    weights_column: String,
    /// Candidate mtry values.
    #[arg(long, value_delimiter = ',', required = true)]
    mtry_grid: Vec<usize>,
    /// Output CSV of the tuning table.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, default_value_t = 0, env = "SHIFTFOREST_SEED")]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ImputeArgs {
    /// Input CSV with missing cells (empty or NA).
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Output CSV with every cell filled.
    #[arg(long)]
    out: PathBuf,
    /// Response column to carry through untouched, if present.
    #[arg(long)]
    response: Option<String>,
    /// Sidecar JSON report path (default: <out>.report.json).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Trees per per-column forest.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 5)]
    nodesize: usize,
    /// Also condition on previously imputed columns.
    #[arg(long, default_value_t = false)]
    chained: bool,
    #[arg(long, default_value_t = 0, env = "SHIFTFOREST_SEED")]
    seed: u64,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    /// Data CSV holding the observed responses.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Predictions CSV from `predict`.
    #[arg(long)]
    pred: PathBuf,
    /// Column with mean predictions.
    #[arg(long, default_value = "mean")]
    mean_col: String,
    /// Column with the lower interval bound.
    #[arg(long, default_value = "q0.1")]
    lo_col: String,
    /// Column with the upper interval bound.
    #[arg(long, default_value = "q0.9")]
    hi_col: String,
    /// Lower quantile level of the interval.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Output metrics JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Benchmark model ids (1-5).
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<u8>,
    /// Shift factors.
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    /// Replications per grid cell.
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value_t = 5)]
    nodesize: usize,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long, default_value_t = 0.6)]
    sample_fraction: f64,
    #[arg(long, default_value_t = false)]
    replace: bool,
    /// mtry of the weighted engine (default: all features).
    #[arg(long)]
    weighted_mtry: Option<usize>,
    /// mtry of the reference engine (default: sqrt of feature count).
    #[arg(long)]
    unweighted_mtry: Option<usize>,
    /// Relative-gain floor of the weighted engine.
    #[arg(long)]
    weighted_min_gain: Option<f64>,
    /// Relative-gain floor of the reference engine.
    #[arg(long)]
    unweighted_min_gain: Option<f64>,
    #[arg(long, default_value_t = 0.75)]
    n0_fraction: f64,
    /// Lower quantile level of the prediction interval.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Output results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON summary path.
    #[arg(long)]
    json_summary: Option<PathBuf>,
    #[arg(long, default_value_t = 0, env = "SHIFTFOREST_SEED")]
    seed: u64,
}

#[derive(Args, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Output directory for weights.csv, model.json, predictions.csv and
    /// metrics.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    n0_fraction: f64,
    #[arg(long, default_value = "0.1,0.5,0.9", value_delimiter = ',')]
    quantiles: Vec<String>,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, default_value_t = 0, env = "SHIFTFOREST_SEED")]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let started = std::time::Instant::now();
    let outcome = match &cli.command {
        Command::DensityRatio(args) => cmd_density_ratio(args, cli.verbose),
        Command::Fit(args) => cmd_fit(args, cli.verbose),
        Command::Predict(args) => cmd_predict(args),
        Command::Tune(args) => cmd_tune(args, cli.verbose),
        Command::Impute(args) => cmd_impute(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Simulate(args) => cmd_simulate(args, cli.verbose),
        Command::Pipeline(args) => cmd_pipeline(args, cli.verbose),
    };
    match outcome {
        Ok(run) => {
            if let Err(e) = manifest::write(&cli, &run, started.elapsed()) {
                eprintln!("error: failed to write manifest: {e}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// What a subcommand produced; drives manifest placement.
pub struct RunOutcome {
    /// Primary output (manifest goes to `<primary>.manifest.json`).
    pub primary_output: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

fn load_weights(
    path: &Path,
    column: &str,
    expected_len: usize,
) -> Result<ImportanceWeights<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Config(format!("weights file has no '{column}' column")))?;
    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let value: f64 = record
            .get(idx)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse {
                row: i + 1,
                message: format!("non-numeric weight '{}'", record.get(idx).unwrap_or("")),
            })?;
        raw.push(value);
    }
    if raw.len() != expected_len {
        return Err(Error::Config(format!(
            "weights file has {} rows but the training data has {expected_len}",
            raw.len()
        )));
    }
    ImportanceWeights::from_raw(raw)
}

fn write_weights_csv(path: &Path, raw: &[f64], regularized: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["index", "raw", "regularized"])?;
    for (i, (r, e)) in raw.iter().zip(regularized.iter()).enumerate() {
        writer.write_record(&[i.to_string(), r.to_string(), e.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

fn estimate_weights(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    method: &str,
    n0_fraction: f64,
    max_centroids: usize,
    delta: f64,
    seed: u64,
    verbose: bool,
) -> Result<(Vec<f64>, ImportanceWeights<f64>)> {
    let raw: Vec<f64> = match method {
        "ulsif" => {
            let bandwidths = default_bandwidth_grid(train.features(), test.features(), seed);
            let ridges = default_ridge_grid();
            let model = ulsif_fit(
                train.features(),
                test.features(),
                &bandwidths,
                &ridges,
                max_centroids,
                seed,
            )?;
            if verbose {
                eprintln!(
                    "ulsif: bandwidth {:.5}, ridge {:.5}",
                    model.bandwidth(),
                    model.ridge()
                );
            }
            model.predict(train.features())?
        }
        "classifier" => {
            let config = ClassifierRatioConfig {
                delta,
                ..ClassifierRatioConfig::default()
            };
            classifier_ratio_fit(train.features(), test.features(), &config, seed)?
                .train_ratios()
                .to_vec()
        }
        other => {
            return Err(Error::Config(format!(
                "unknown density-ratio method '{other}' (expected ulsif or classifier)"
            )))
        }
    };
    let n = raw.len() as f64;
    let n0 = n0_fraction * n;
    let (weights, solution) = ImportanceWeights::regularized(raw.clone(), n0)?;
    if verbose {
        eprintln!(
            "weights: smoothing exponent {:.4}, effective sample size {:.1}{}",
            weights.smoothing_exponent(),
            weights.n_eff(),
            if solution.clamped { " (target unreachable)" } else { "" }
        );
    }
    Ok((raw, weights))
}

fn cmd_density_ratio(args: &DensityRatioArgs, verbose: bool) -> Result<RunOutcome> {
    let train: Dataset<f64> = load_dataset(&args.train, args.response.as_deref())?;
    let test: Dataset<f64> = load_dataset(&args.test, args.response.as_deref())?;
    train.require_complete()?;
    test.require_complete()?;
    let (raw, weights) = estimate_weights(
        &train,
        &test,
        &args.method,
        args.n0_fraction,
        args.max_centroids,
        args.delta,
        args.seed,
        verbose,
    )?;
    write_weights_csv(&args.out, &raw, weights.effective())?;
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

fn cmd_fit(args: &FitArgs, verbose: bool) -> Result<RunOutcome> {
    let train: Dataset<f64> = load_dataset(&args.train, Some(&args.response))?;
    let weights = match &args.weights {
        Some(path) => load_weights(path, &args.weights_column, train.n_rows())?,
        None => ImportanceWeights::uniform(train.n_rows()),
    };
    let controls = args.forest.controls(args.seed);
    let forest = fit_forest(&train, &weights, &controls)?;
    if verbose {
        eprintln!(
            "fitted {} trees on {} rows ({} zero-weight fallbacks)",
            forest.trees().len(),
            train.n_rows(),
            forest.zero_weight_fallbacks()
        );
    }
    forest.save_json(&args.out)?;
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

fn cmd_predict(args: &PredictArgs) -> Result<RunOutcome> {
    let forest = WeightedForest::<f64>::load_json(&args.model)?;
    let data: Dataset<f64> = load_dataset(&args.data, args.response.as_deref())?;
    data.require_complete()?;

    let mut levels = Vec::with_capacity(args.quantiles.len());
    for token in &args.quantiles {
        let level: f64 = token
            .parse()
            .map_err(|_| Error::Config(format!("bad quantile level '{token}'")))?;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!(
                "quantile level must lie in (0, 1), got {level}"
            )));
        }
        levels.push(level);
    }

    let mut writer = csv::Writer::from_path(&args.out)?;
    let mut header = vec!["mean".to_string()];
    header.extend(args.quantiles.iter().map(|q| format!("q{q}")));
    writer.write_record(&header)?;
    for r in 0..data.n_rows() {
        let x = data.features().row(r);
        let weights = forest.forest_weights(x)?;
        let mut record = vec![forest.predict_mean(x)?.to_string()];
        for &level in &levels {
            record.push(forest.quantile_from_weights(&weights, level)?.to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs: vec![args.out.clone()],
        seed: None,
    })
}

fn cmd_tune(args: &TuneArgs, verbose: bool) -> Result<RunOutcome> {
    let train: Dataset<f64> = load_dataset(&args.train, Some(&args.response))?;
    let weights = match &args.weights {
        Some(path) => load_weights(path, &args.weights_column, train.n_rows())?,
        None => ImportanceWeights::uniform(train.n_rows()),
    };
    let base = args.forest.controls(args.seed);
    let (best, table) = tune_by_oob(&train, &weights, &args.mtry_grid, &base)?;
    let mut writer = csv::Writer::from_path(&args.out)?;
    writer.write_record(["mtry", "oob_weighted", "oob_uniform", "skipped"])?;
    for record in &table {
        writer.write_record(&[
            record.mtry.to_string(),
            record.oob_weighted.to_string(),
            record.oob_uniform.to_string(),
            record.skipped.to_string(),
        ])?;
    }
    writer.flush()?;
    let best_mtry = best.mtry.expect("tuned controls carry mtry");
    if verbose {
        eprintln!("best mtry by weighted OOB: {best_mtry}");
    }
    println!("{best_mtry}");
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

fn cmd_impute(args: &ImputeArgs) -> Result<RunOutcome> {
    let data: Dataset<f64> = load_dataset(&args.input, args.response.as_deref())?;
    let controls = ForestControls {
        n_trees: args.trees,
        nodesize: args.nodesize,
        ..ImputationPlan::default_controls(args.seed)
    };
    let mut plan = ImputationPlan::for_dataset(&data, controls, args.seed);
    plan.use_imputed_predictors = args.chained;

    #[derive(Serialize)]
    struct ColumnReport {
        column: String,
        missing: usize,
    }
    let report: Vec<ColumnReport> = data
        .feature_names()
        .iter()
        .zip(data.missing_counts())
        .map(|(name, missing)| ColumnReport {
            column: name.clone(),
            missing,
        })
        .collect();

    let imputed = shiftforest::impute(&data, &plan)?;
    save_dataset(&imputed, &args.out)?;

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| sibling_path(&args.out, "report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs: vec![args.out.clone(), report_path],
        seed: Some(args.seed),
    })
}

fn cmd_eval(args: &EvalArgs) -> Result<RunOutcome> {
    let truth: Dataset<f64> = load_dataset(&args.truth, Some(&args.response))?;
    let y = truth.require_response()?;

    let mut reader = csv::Reader::from_path(&args.pred)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("predictions file has no '{name}' column")))
    };
    let (mean_idx, lo_idx, hi_idx) = (col(&args.mean_col)?, col(&args.lo_col)?, col(&args.hi_col)?);
    let mut mean = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |idx: usize| -> Result<f64> {
            record.get(idx).unwrap_or("").parse().map_err(|_| Error::Parse {
                row: i + 1,
                message: "non-numeric prediction".into(),
            })
        };
        mean.push(parse(mean_idx)?);
        lo.push(parse(lo_idx)?);
        hi.push(parse(hi_idx)?);
    }
    let report = compute_metrics(y, &mean, &lo, &hi, args.alpha)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    println!(
        "rmse {:.4}  mae {:.4}  covg {:.4}  int_width {:.4}  score {:.4}",
        report.rmse, report.mae, report.coverage, report.interval_width, report.score
    );
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs: vec![args.out.clone()],
        seed: None,
    })
}

fn cmd_simulate(args: &SimulateArgs, verbose: bool) -> Result<RunOutcome> {
    let config = SimulationConfig {
        model_ids: args.models.clone(),
        lambda_grid: args.lambdas.clone(),
        replications: args.reps,
        n_train: args.n_train,
        n_test: args.n_test,
        noise_sd: 0.5,
        n_trees: args.trees,
        nodesize: args.nodesize,
        max_terminal_nodes: args.max_nodes,
        sample_fraction: args.sample_fraction,
        with_replacement: args.replace,
        weighted_mtry: args.weighted_mtry,
        unweighted_mtry: args.unweighted_mtry,
        weighted_min_gain: args.weighted_min_gain,
        unweighted_min_gain: args.unweighted_min_gain,
        n0_fraction: args.n0_fraction,
        alpha_level: args.alpha,
        seed: args.seed,
    };
    config.validate()?;
    let mut results: Vec<SimulationResult> = Vec::new();
    for &model_id in &config.model_ids {
        for (lambda_idx, &lambda) in config.lambda_grid.iter().enumerate() {
            if verbose {
                eprintln!("model {model_id}, lambda {lambda} ...");
            }
            results.push(run_simulation_cell(&config, model_id, lambda_idx, lambda)?);
        }
    }
    write_results_csv(&results, &args.out)?;
    let mut outputs = vec![args.out.clone()];
    if let Some(json_path) = &args.json_summary {
        std::fs::write(json_path, serde_json::to_string_pretty(&results)?)?;
        outputs.push(json_path.clone());
    }
    Ok(RunOutcome {
        primary_output: args.out.clone(),
        outputs,
        seed: Some(args.seed),
    })
}

fn cmd_pipeline(args: &PipelineArgs, verbose: bool) -> Result<RunOutcome> {
    std::fs::create_dir_all(&args.out_dir)?;
    let train: Dataset<f64> = load_dataset(&args.train, Some(&args.response))?;
    let test_has_response = {
        let headers = csv::Reader::from_path(&args.test)?
            .headers()?
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>();
        headers.iter().any(|h| h == &args.response)
    };
    let test: Dataset<f64> = load_dataset(
        &args.test,
        test_has_response.then_some(args.response.as_str()),
    )?;
    train.require_complete()?;
    test.require_complete()?;

    let (raw, weights) = estimate_weights(
        &train,
        &test,
        "ulsif",
        args.n0_fraction,
        DEFAULT_MAX_CENTROIDS,
        1e-2,
        args.seed,
        verbose,
    )?;
    let weights_path = args.out_dir.join("weights.csv");
    write_weights_csv(&weights_path, &raw, weights.effective())?;

    let controls = args.forest.controls(args.seed);
    let forest = fit_forest(&train, &weights, &controls)?;
    let model_path = args.out_dir.join("model.json");
    forest.save_json(&model_path)?;

    let mut levels = Vec::new();
    for token in &args.quantiles {
        let level: f64 = token
            .parse()
            .map_err(|_| Error::Config(format!("bad quantile level '{token}'")))?;
        levels.push(level);
    }
    let predictions_path = args.out_dir.join("predictions.csv");
    let mut writer = csv::Writer::from_path(&predictions_path)?;
    let mut header = vec!["mean".to_string()];
    header.extend(args.quantiles.iter().map(|q| format!("q{q}")));
    writer.write_record(&header)?;
    for r in 0..test.n_rows() {
        let x = test.features().row(r);
        let rw = forest.forest_weights(x)?;
        let mut record = vec![forest.predict_mean(x)?.to_string()];
        for &level in &levels {
            record.push(forest.quantile_from_weights(&rw, level)?.to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;

    let mut outputs = vec![weights_path, model_path, predictions_path.clone()];
    if test_has_response {
        let report = evaluate_forest(&forest, &test, 0.1)?;
        let metrics_path = args.out_dir.join("metrics.json");
        std::fs::write(&metrics_path, serde_json::to_string_pretty(&report)?)?;
        println!(
            "rmse {:.4}  mae {:.4}  covg {:.4}  int_width {:.4}  score {:.4}",
            report.rmse, report.mae, report.coverage, report.interval_width, report.score
        );
        outputs.push(metrics_path);
    }
    Ok(RunOutcome {
        primary_output: predictions_path,
        outputs,
        seed: Some(args.seed),
    })
}

fn sibling_path(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    base.with_file_name(name)
}
