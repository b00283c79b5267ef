//! Iterative quantile-forest imputation of missing covariates.
//!
//! Each column with missingness is filled in a random order: a quantile
//! forest is fit with that column as the response on the rows where it is
//! observed, using only the originally-complete columns as predictors, and
//! every missing cell is drawn as the conditional U-quantile for an
//! independent uniform U. Drawing quantiles instead of conditional means
//! preserves the column's conditional distribution rather than collapsing
//! it to a point mass.

use rand::seq::SliceRandom;

use crate::datagen::open_unit;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestControls};
use crate::ratio::ImportanceWeights;
use crate::rng::{seeded_rng, split_seed, Stream};
use crate::scalar::Scalar;

/// Plan for one imputation pass: which columns to fill, in what order, with
/// which forest controls.
#[derive(Clone, Debug)]
pub struct ImputationPlan {
    /// Columns with missingness, in processing order (a seeded random
    /// permutation).
    pub order: Vec<usize>,
    /// Originally-complete columns used as predictors throughout.
    pub complete_columns: Vec<usize>,
    pub controls: ForestControls,
    pub seed: u64,
    /// Also condition on columns imputed earlier in the pass (chained
    /// style). Off by default: predictors stay restricted to the
    /// originally-complete columns.
    pub use_imputed_predictors: bool,
}

impl ImputationPlan {
    /// Builds a plan for `dataset`: finds the missing columns, permutes them
    /// with the seed, and records the complete predictor set.
    pub fn for_dataset<F: Scalar>(
        dataset: &Dataset<F>,
        controls: ForestControls,
        seed: u64,
    ) -> Self {
        let missing = dataset.missing_columns();
        let complete: Vec<usize> = (0..dataset.n_features())
            .filter(|j| !missing.contains(j))
            .collect();
        let mut order = missing;
        order.shuffle(&mut seeded_rng(split_seed(seed, Stream::ImputeOrder, 0)));
        Self {
            order,
            complete_columns: complete,
            controls,
            seed,
            use_imputed_predictors: false,
        }
    }

    /// Forest controls suited to per-column quantile forests.
    pub fn default_controls(seed: u64) -> ForestControls {
        ForestControls {
            n_trees: 100,
            mtry: None,
            nodesize: 5,
            max_terminal_nodes: None,
            min_gain_fraction: None,
            sample_fraction: 1.0,
            with_replacement: true,
            seed,
        }
    }
}

/// Imputes every missing covariate cell of `dataset` per the plan and
/// returns a complete copy (mask all false). Observed cells are never
/// modified.
pub fn impute<F: Scalar>(dataset: &Dataset<F>, plan: &ImputationPlan) -> Result<Dataset<F>> {
    let mut result = dataset.clone();
    if plan.order.is_empty() {
        return Ok(result);
    }
    if plan.complete_columns.is_empty() {
        return Err(Error::Config(
            "no fully-observed predictor columns available for imputation".into(),
        ));
    }

    let mut predictors = plan.complete_columns.clone();
    for (step, &column) in plan.order.iter().enumerate() {
        let observed: Vec<usize> = (0..result.n_rows())
            .filter(|&r| !result.is_missing(r, column))
            .collect();
        let missing: Vec<usize> = (0..result.n_rows())
            .filter(|&r| result.is_missing(r, column))
            .collect();
        if observed.is_empty() {
            return Err(Error::Domain(format!(
                "column '{}' has no observed rows to learn from",
                result.feature_names()[column]
            )));
        }
        if observed.len() < plan.controls.nodesize {
            return Err(Error::Domain(format!(
                "column '{}' has only {} observed rows (< nodesize {})",
                result.feature_names()[column],
                observed.len(),
                plan.controls.nodesize
            )));
        }
        if missing.is_empty() {
            continue;
        }

        let features = result.features().select(&observed, &predictors);
        let responses: Vec<F> = observed
            .iter()
            .map(|&r| result.features().get(r, column))
            .collect();
        let names = predictors
            .iter()
            .map(|&j| result.feature_names()[j].clone())
            .collect();
        let training = Dataset::new(features, Some(responses), names)?;

        let mut controls = plan.controls.clone();
        controls.seed = split_seed(plan.seed, Stream::ImputeColumn, column as u64);
        let n_obs = training.n_rows();
        let weights = ImportanceWeights::uniform(n_obs);
        let forest = fit_forest(&training, &weights, &controls)?;

        let mut rng = seeded_rng(split_seed(plan.seed, Stream::ImputeColumn, (column as u64) << 32 | 1));
        for &row in &missing {
            let x: Vec<F> = predictors
                .iter()
                .map(|&j| result.features().get(row, j))
                .collect();
            let u = F::from_f64_lossy(open_unit(&mut rng));
            let value = forest.conditional_quantile(&x, u)?;
            result.features_mut().set(row, column, value);
            result.set_missing(row, column, false);
        }
        if plan.use_imputed_predictors {
            predictors.push(column);
        }
        let _ = step;
    }
    Ok(result)
}
