//! Simulation studies: the Dirichlet-shift benchmark grid, the univariate
//! shift illustration, and the 1-D density-ratio comparison.

use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datagen::{
    generate_dirichlet_shift, generate_univariate_shift_with, univariate_oracle_ratio,
    univariate_signal, Role, ShiftBenchmarkSpec,
};
use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::eval::metrics::{compute_metrics, score_from_components, MetricsReport};
use crate::forest::{fit_forest, ForestControls, WeightedForest};
use crate::ratio::{
    classifier_ratio_fit, ulsif_fit_default, ClassifierRatioConfig, ImportanceWeights,
};
use crate::rng::{seeded_rng, split_seed, Stream};

/// Configuration of the Dirichlet-shift study grid.
///
/// The two competing methods mirror the benchmark setup they reproduce:
/// the weighted forest searches every feature at each split
/// (`weighted_mtry = None` means `p`, single-CART style) while the
/// unweighted reference uses the customary `floor(sqrt(p))`.
#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub model_ids: Vec<u8>,
    pub lambda_grid: Vec<f64>,
    pub replications: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub n_trees: usize,
    pub nodesize: usize,
    pub max_terminal_nodes: Option<usize>,
    pub sample_fraction: f64,
    pub with_replacement: bool,
    pub weighted_mtry: Option<usize>,
    pub unweighted_mtry: Option<usize>,
    /// Relative-gain floor of the weighted engine's trees.
    pub weighted_min_gain: Option<f64>,
    /// Relative-gain floor of the reference engine's trees.
    pub unweighted_min_gain: Option<f64>,
    /// Minimum effective sample size as a fraction of n.
    pub n0_fraction: f64,
    /// Lower quantile level of the prediction interval.
    pub alpha_level: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            model_ids: vec![1, 2, 3, 4, 5],
            lambda_grid: vec![1.0, 1.07, 1.14, 1.21, 1.29, 1.36, 1.43, 1.5],
            replications: 30,
            n_train: 1000,
            n_test: 200,
            noise_sd: 0.5,
            n_trees: 500,
            nodesize: 5,
            max_terminal_nodes: None,
            sample_fraction: 0.6,
            with_replacement: false,
            weighted_mtry: None,
            unweighted_mtry: None,
            weighted_min_gain: None,
            unweighted_min_gain: None,
            n0_fraction: 0.75,
            alpha_level: 0.1,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model_ids.is_empty() || self.lambda_grid.is_empty() {
            return Err(Error::Config("models and lambdas must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if !(self.n0_fraction > 0.0 && self.n0_fraction < 1.0) {
            return Err(Error::Config(format!(
                "n0_fraction must lie in (0, 1), got {}",
                self.n0_fraction
            )));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 0.5) {
            return Err(Error::Config(format!(
                "alpha_level must lie in (0, 0.5), got {}",
                self.alpha_level
            )));
        }
        Ok(())
    }

    fn forest_controls(&self, mtry: usize, min_gain: Option<f64>, seed: u64) -> ForestControls {
        ForestControls {
            n_trees: self.n_trees,
            mtry: Some(mtry),
            nodesize: self.nodesize,
            max_terminal_nodes: self.max_terminal_nodes,
            min_gain_fraction: min_gain,
            sample_fraction: self.sample_fraction,
            with_replacement: self.with_replacement,
            seed,
        }
    }
}

/// Aggregated outcome for one `(model, lambda)` grid cell. Component
/// metrics are means over successful replications; the score is recomputed
/// from those means so it stays reproducible from the stored components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationResult {
    pub model_id: u8,
    pub lambda_shift: f64,
    pub replications: usize,
    pub failures: usize,
    pub weighted: MetricsReport<f64>,
    pub unweighted: MetricsReport<f64>,
}

/// Mean metrics of a forest's predictions and `(alpha, 1-alpha)` interval
/// on a labelled dataset.
pub fn evaluate_forest(
    forest: &WeightedForest<f64>,
    data: &Dataset<f64>,
    alpha_level: f64,
) -> Result<MetricsReport<f64>> {
    let y = data.require_response()?;
    let n = data.n_rows();
    let mut mean = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for r in 0..n {
        let x = data.features().row(r);
        let weights = forest.forest_weights(x)?;
        mean.push(forest.predict_mean(x)?);
        lo.push(forest.quantile_from_weights(&weights, alpha_level)?);
        hi.push(forest.quantile_from_weights(&weights, 1.0 - alpha_level)?);
    }
    compute_metrics(y, &mean, &lo, &hi, alpha_level)
}

fn replication_seed(config: &SimulationConfig, model_id: u8, lambda_idx: usize, rep: usize) -> u64 {
    let tag = ((model_id as u64) << 48) | ((lambda_idx as u64) << 32) | rep as u64;
    split_seed(config.seed, Stream::Replication, tag)
}

fn run_replication(
    config: &SimulationConfig,
    model_id: u8,
    lambda_idx: usize,
    lambda: f64,
    rep: usize,
) -> Result<(MetricsReport<f64>, MetricsReport<f64>)> {
    let rep_seed = replication_seed(config, model_id, lambda_idx, rep);
    let spec = ShiftBenchmarkSpec {
        lambda_shift: lambda,
        n_train: config.n_train,
        n_test: config.n_test,
        model_id,
        noise_sd: config.noise_sd,
        seed: rep_seed,
    };
    let train = generate_dirichlet_shift::<f64>(&spec, Role::Train)?;
    let test = generate_dirichlet_shift::<f64>(&spec, Role::Test)?;
    let p = train.n_features();

    let ratio_model = ulsif_fit_default(
        train.features(),
        test.features(),
        split_seed(rep_seed, Stream::RatioFit, 0),
    )?;
    let raw = ratio_model.predict(train.features())?;
    let n0 = config.n0_fraction * config.n_train as f64;
    let (weights, _) = ImportanceWeights::regularized(raw, n0)?;

    let weighted_mtry = config.weighted_mtry.unwrap_or(p).clamp(1, p);
    let unweighted_mtry = config
        .unweighted_mtry
        .unwrap_or_else(|| (p as f64).sqrt().floor() as usize)
        .clamp(1, p);

    let weighted_forest = fit_forest(
        &train,
        &weights,
        &config.forest_controls(
            weighted_mtry,
            config.weighted_min_gain,
            split_seed(rep_seed, Stream::ForestWeighted, 0),
        ),
    )?;
    let unweighted_forest = fit_forest(
        &train,
        &ImportanceWeights::uniform(config.n_train),
        &config.forest_controls(
            unweighted_mtry,
            config.unweighted_min_gain,
            split_seed(rep_seed, Stream::ForestUnweighted, 0),
        ),
    )?;

    Ok((
        evaluate_forest(&weighted_forest, &test, config.alpha_level)?,
        evaluate_forest(&unweighted_forest, &test, config.alpha_level)?,
    ))
}

fn aggregate(reports: &[MetricsReport<f64>], alpha_level: f64) -> MetricsReport<f64> {
    let n = reports.len() as f64;
    let rmse = reports.iter().map(|r| r.rmse).sum::<f64>() / n;
    let mae = reports.iter().map(|r| r.mae).sum::<f64>() / n;
    let coverage = reports.iter().map(|r| r.coverage).sum::<f64>() / n;
    let interval_width = reports.iter().map(|r| r.interval_width).sum::<f64>() / n;
    MetricsReport {
        rmse,
        mae,
        coverage,
        interval_width,
        score: score_from_components(mae, rmse, coverage, interval_width, alpha_level),
        alpha_level,
    }
}

/// Runs every replication of one `(model, lambda)` cell. Failed
/// replications are excluded and counted; it is an error for all of them to
/// fail.
pub fn run_simulation_cell(
    config: &SimulationConfig,
    model_id: u8,
    lambda_idx: usize,
    lambda: f64,
) -> Result<SimulationResult> {
    config.validate()?;
    let mut weighted = Vec::with_capacity(config.replications);
    let mut unweighted = Vec::with_capacity(config.replications);
    let mut failures = 0usize;
    for rep in 0..config.replications {
        match run_replication(config, model_id, lambda_idx, lambda, rep) {
            Ok((w, u)) => {
                weighted.push(w);
                unweighted.push(u);
            }
            Err(_) => failures += 1,
        }
    }
    if weighted.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replications failed for model {model_id}, lambda {lambda}",
            config.replications
        )));
    }
    Ok(SimulationResult {
        model_id,
        lambda_shift: lambda,
        replications: weighted.len(),
        failures,
        weighted: aggregate(&weighted, config.alpha_level),
        unweighted: aggregate(&unweighted, config.alpha_level),
    })
}

/// Runs the full study grid: every model crossed with every shift factor.
pub fn run_simulation_study(config: &SimulationConfig) -> Result<Vec<SimulationResult>> {
    config.validate()?;
    let mut results = Vec::new();
    for &model_id in &config.model_ids {
        for (lambda_idx, &lambda) in config.lambda_grid.iter().enumerate() {
            results.push(run_simulation_cell(config, model_id, lambda_idx, lambda)?);
        }
    }
    Ok(results)
}

/// One row of the results CSV (two per grid cell, one per method).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: u8,
    pub lambda: f64,
    pub method: String,
    pub rmse: f64,
    pub mae: f64,
    pub covg: f64,
    pub int_width: f64,
    pub score: f64,
}

impl ResultRow {
    fn from_report(model: u8, lambda: f64, method: &str, r: &MetricsReport<f64>) -> Self {
        Self {
            model,
            lambda,
            method: method.to_string(),
            rmse: r.rmse,
            mae: r.mae,
            covg: r.coverage,
            int_width: r.interval_width,
            score: r.score,
        }
    }
}

pub fn write_results_csv(results: &[SimulationResult], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    for res in results {
        writer.serialize(ResultRow::from_report(
            res.model_id,
            res.lambda_shift,
            "weighted",
            &res.weighted,
        ))?;
        writer.serialize(ResultRow::from_report(
            res.model_id,
            res.lambda_shift,
            "unweighted",
            &res.unweighted,
        ))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Configuration of the univariate-shift study.
///
/// Both weighting schemes share identical forest controls; the terminal
/// budget is what lets the weighted criterion spend its splits where the
/// test density lives instead of where training data is plentiful.
#[derive(Clone, Debug)]
pub struct UnivariateStudyConfig {
    pub runs: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_trees: usize,
    pub nodesize: usize,
    pub max_terminal_nodes: Option<usize>,
    pub sample_fraction: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for UnivariateStudyConfig {
    fn default() -> Self {
        Self {
            runs: 30,
            n_train: 500,
            n_test: 250,
            n_trees: 500,
            nodesize: 5,
            max_terminal_nodes: Some(8),
            sample_fraction: 0.6,
            noise_sd: 0.5,
            seed: 0,
        }
    }
}

/// Mean test RMSE (against the noiseless signal) of the three weighting
/// schemes: analytic oracle ratio, learned ratio, and uniform.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnivariateStudyResult {
    pub runs: usize,
    pub rmse_oracle: f64,
    pub rmse_learned: f64,
    pub rmse_unweighted: f64,
}

/// Replicates the univariate illustration: forests fitted with oracle,
/// learned and uniform weights, scored by RMSE of the mean prediction
/// against the true signal over the test draw.
pub fn run_univariate_study(config: &UnivariateStudyConfig) -> Result<UnivariateStudyResult> {
    if config.runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    let mut totals = [0.0f64; 3];
    for run in 0..config.runs {
        let run_seed = split_seed(config.seed, Stream::Replication, run as u64);
        let (train, test) = generate_univariate_shift_with::<f64>(
            config.n_train,
            config.n_test,
            config.noise_sd,
            run_seed,
        )?;

        let oracle_raw: Vec<f64> = (0..train.n_rows())
            .map(|i| univariate_oracle_ratio(train.features().get(i, 0)))
            .collect();
        let oracle = ImportanceWeights::from_raw(oracle_raw)?;

        let ratio_model = ulsif_fit_default(
            train.features(),
            test.features(),
            split_seed(run_seed, Stream::RatioFit, 0),
        )?;
        let learned = ImportanceWeights::from_raw(ratio_model.predict(train.features())?)?;

        let uniform = ImportanceWeights::uniform(config.n_train);

        let controls = |seed: u64| ForestControls {
            n_trees: config.n_trees,
            mtry: Some(1),
            nodesize: config.nodesize,
            max_terminal_nodes: config.max_terminal_nodes,
            min_gain_fraction: None,
            sample_fraction: config.sample_fraction,
            with_replacement: false,
            seed,
        };
        let schemes = [
            (&oracle, split_seed(run_seed, Stream::ForestWeighted, 1)),
            (&learned, split_seed(run_seed, Stream::ForestWeighted, 2)),
            (&uniform, split_seed(run_seed, Stream::ForestUnweighted, 0)),
        ];
        for (slot, (weights, seed)) in schemes.iter().enumerate() {
            let forest = fit_forest(&train, weights, &controls(*seed))?;
            let mut sq = 0.0f64;
            for r in 0..test.n_rows() {
                let x = test.features().row(r);
                let truth = univariate_signal(x[0]);
                let pred = forest.predict_mean(x)?;
                sq += (pred - truth) * (pred - truth);
            }
            totals[slot] += (sq / test.n_rows() as f64).sqrt();
        }
    }
    let runs_f = config.runs as f64;
    Ok(UnivariateStudyResult {
        runs: config.runs,
        rmse_oracle: totals[0] / runs_f,
        rmse_learned: totals[1] / runs_f,
        rmse_unweighted: totals[2] / runs_f,
    })
}

/// Grid RMSE of the two ratio estimators in the 1-D Gaussian setting
/// (train N(0, 2.5^2) vs test N(0.5, 0.95^2)).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatioBenchmarkResult {
    pub ulsif_rmse: f64,
    pub classifier_rmse: f64,
}

const RATIO_GRID_POINTS: usize = 512;
const RATIO_GRID_RANGE: (f64, f64) = (-8.0, 8.0);

/// Runs the 1-D comparison with `n` points per sample: fits uLSIF and the
/// classifier baseline, evaluates both against the true normalized density
/// ratio on a 512-point grid over [-8, 8].
pub fn run_ratio_benchmark(n: usize, seed: u64) -> Result<RatioBenchmarkResult> {
    if n < 2 {
        return Err(Error::Config("need at least two points per sample".into()));
    }
    let mut rng = seeded_rng(split_seed(seed, Stream::DataTrain, 2));
    let train_dist = Normal::new(0.0, 2.5).expect("valid");
    let test_dist = Normal::new(0.5, 0.95).expect("valid");
    let train_x: Vec<f64> = (0..n).map(|_| train_dist.sample(&mut rng)).collect();
    let mut rng = seeded_rng(split_seed(seed, Stream::DataTest, 2));
    let test_x: Vec<f64> = (0..n).map(|_| test_dist.sample(&mut rng)).collect();
    let train = Matrix::from_vec(train_x, n, 1)?;
    let test = Matrix::from_vec(test_x, n, 1)?;

    let true_ratio = |x: f64| -> f64 {
        let pdf = |x: f64, mean: f64, sd: f64| {
            (-0.5 * ((x - mean) / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        pdf(x, 0.5, 0.95) / pdf(x, 0.0, 2.5)
    };
    let grid: Vec<f64> = (0..RATIO_GRID_POINTS)
        .map(|i| {
            RATIO_GRID_RANGE.0
                + (RATIO_GRID_RANGE.1 - RATIO_GRID_RANGE.0) * i as f64
                    / (RATIO_GRID_POINTS - 1) as f64
        })
        .collect();

    let ulsif = ulsif_fit_default(&train, &test, split_seed(seed, Stream::RatioFit, 1))?;
    let classifier = classifier_ratio_fit(
        &train,
        &test,
        &ClassifierRatioConfig::default(),
        split_seed(seed, Stream::Classifier, 1),
    )?;

    let mut ulsif_sq = 0.0f64;
    let mut classifier_sq = 0.0f64;
    for &x in &grid {
        let truth = true_ratio(x);
        let u = ulsif.predict_one(&[x])?;
        let c = classifier.predict_one(&[x])?;
        ulsif_sq += (u - truth) * (u - truth);
        classifier_sq += (c - truth) * (c - truth);
    }
    let count = grid.len() as f64;
    Ok(RatioBenchmarkResult {
        ulsif_rmse: (ulsif_sq / count).sqrt(),
        classifier_rmse: (classifier_sq / count).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> SimulationConfig {
        SimulationConfig {
            model_ids: vec![1],
            lambda_grid: vec![1.0, 1.5],
            replications: 2,
            n_train: 120,
            n_test: 40,
            n_trees: 15,
            seed: 3,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn study_produces_one_cell_per_model_lambda() {
        let config = tiny_config();
        let results = run_simulation_study(&config).unwrap();
        assert_eq!(results.len(), 2);
        for cell in &results {
            assert_eq!(cell.replications + cell.failures, 2);
            assert!(cell.weighted.rmse.is_finite());
            assert!(cell.unweighted.rmse.is_finite());
        }
    }

    #[test]
    fn results_csv_round_trips_scores() {
        let config = tiny_config();
        let results = run_simulation_study(&config).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_results_csv(&results, file.path()).unwrap();
        let rows = read_results_csv(file.path()).unwrap();
        assert_eq!(rows.len(), 4);
        for row in rows {
            let recomputed =
                score_from_components(row.mae, row.rmse, row.covg, row.int_width, 0.1);
            assert!(
                (recomputed - row.score).abs() < 1e-9,
                "score {} vs recomputed {recomputed}",
                row.score
            );
        }
    }

    #[test]
    fn replications_are_deterministic() {
        let config = tiny_config();
        let a = run_simulation_cell(&config, 1, 0, 1.0).unwrap();
        let b = run_simulation_cell(&config, 1, 0, 1.0).unwrap();
        assert_eq!(a.weighted.rmse, b.weighted.rmse);
        assert_eq!(a.unweighted.score, b.unweighted.score);
    }
}
