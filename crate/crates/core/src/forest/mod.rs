//! Importance-weighted random forests: fitting, mean and quantile
//! prediction, out-of-bag error and OOB-based tuning.

mod tree;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ratio::ImportanceWeights;
use crate::rng::{split_seed, Stream};
use crate::scalar::Scalar;

pub use tree::{grow_weighted_tree, split_gain, SplitCandidate, TreeNode, WeightedTree};

/// Forest hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestControls {
    /// Number of trees (B).
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    pub mtry: Option<usize>,
    /// Minimum rows per terminal node (raw row count, not weight mass).
    pub nodesize: usize,
    /// Terminal-node budget per tree; `None` grows until nodesize stops it.
    pub max_terminal_nodes: Option<usize>,
    /// Relative gain threshold: a split is admissible only when its
    /// weighted deviance reduction reaches this fraction of the root's
    /// weighted deviance (single-tree complexity-pruning style). `None`
    /// accepts any strictly positive gain.
    pub min_gain_fraction: Option<f64>,
    /// Per-tree resample size as a fraction of n, in (0, 1].
    pub sample_fraction: f64,
    /// Resample with replacement instead of without.
    pub with_replacement: bool,
    pub seed: u64,
}

impl Default for ForestControls {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            nodesize: 5,
            max_terminal_nodes: None,
            min_gain_fraction: None,
            sample_fraction: 0.6,
            with_replacement: false,
            seed: 0,
        }
    }
}

impl ForestControls {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > p {
                return Err(Error::Config(format!(
                    "mtry must lie in 1..={p}, got {m}"
                )));
            }
        }
        if self.nodesize == 0 {
            return Err(Error::Config("nodesize must be >= 1".into()));
        }
        if let Some(t) = self.max_terminal_nodes {
            if t == 0 {
                return Err(Error::Config("max_terminal_nodes must be >= 1".into()));
            }
        }
        if let Some(g) = self.min_gain_fraction {
            if !(g >= 0.0 && g < 1.0) {
                return Err(Error::Config(format!(
                    "min_gain_fraction must lie in [0, 1), got {g}"
                )));
            }
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sample_fraction must lie in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        Ok(())
    }

    /// Resolved number of candidate features per split.
    pub fn mtry_for(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| p.div_ceil(3)).clamp(1, p)
    }
}

/// A fitted weighted forest.
///
/// Holds the training responses and (effective) training weights so that
/// quantile prediction and serialization are self-contained.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedForest<F> {
    trees: Vec<WeightedTree<F>>,
    controls: ForestControls,
    responses: Vec<F>,
    training_weights: Vec<F>,
    feature_names: Vec<String>,
    /// Training rows ordered by ascending response (ties by row index);
    /// rebuilt on load, used by the quantile grid search.
    response_order: Vec<u32>,
}

/// Out-of-bag error mode: Eq.-(6)-style uniform averaging or the
/// importance-weighted variant.
#[derive(Clone, Copy, Debug)]
pub enum OobMode<'a, F> {
    Uniform,
    Weighted(&'a [F]),
}

/// Out-of-bag error plus how many rows had to be skipped because every
/// resample contained them.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OobReport<F> {
    pub error: F,
    pub skipped: usize,
}

/// One entry of the OOB tuning table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuneRecord<F> {
    pub mtry: usize,
    pub oob_weighted: F,
    pub oob_uniform: F,
    pub skipped: usize,
}

/// Fits a weighted forest: `n_trees` trees, each grown on an independent
/// uniform resample carrying the (effective) importance weights.
///
/// Per-tree seeds are derived from `controls.seed` up front, so the result
/// is identical regardless of how many threads participate.
pub fn fit_forest<F: Scalar>(
    dataset: &Dataset<F>,
    weights: &ImportanceWeights<F>,
    controls: &ForestControls,
) -> Result<WeightedForest<F>> {
    dataset.require_complete()?;
    let responses = dataset.require_response()?;
    controls.validate(dataset.n_features())?;
    if weights.len() != dataset.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_rows(),
            actual: weights.len(),
        });
    }

    let w = weights.effective();
    let seeds: Vec<u64> = (0..controls.n_trees)
        .map(|k| split_seed(controls.seed, Stream::Tree, k as u64))
        .collect();
    let trees: Result<Vec<WeightedTree<F>>> = seeds
        .par_iter()
        .map(|&seed| grow_weighted_tree(dataset.features(), responses, w, controls, seed))
        .collect();

    Ok(WeightedForest::from_parts(
        trees?,
        controls.clone(),
        responses.to_vec(),
        w.to_vec(),
        dataset.feature_names().to_vec(),
    ))
}

impl<F: Scalar> WeightedForest<F> {
    /// Assembles a forest from already-grown trees (used by fitting,
    /// deserialization and tests).
    pub fn from_parts(
        trees: Vec<WeightedTree<F>>,
        controls: ForestControls,
        responses: Vec<F>,
        training_weights: Vec<F>,
        feature_names: Vec<String>,
    ) -> Self {
        let mut order: Vec<u32> = (0..responses.len() as u32).collect();
        order.sort_by(|&a, &b| {
            responses[a as usize]
                .partial_cmp(&responses[b as usize])
                .expect("finite responses")
                .then(a.cmp(&b))
        });
        Self {
            trees,
            controls,
            responses,
            training_weights,
            feature_names,
            response_order: order,
        }
    }

    pub fn trees(&self) -> &[WeightedTree<F>] {
        &self.trees
    }

    pub fn controls(&self) -> &ForestControls {
        &self.controls
    }

    pub fn n_rows(&self) -> usize {
        self.responses.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn responses(&self) -> &[F] {
        &self.responses
    }

    pub fn training_weights(&self) -> &[F] {
        &self.training_weights
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn zero_weight_fallbacks(&self) -> u32 {
        self.trees.iter().map(|t| t.zero_weight_fallbacks()).sum()
    }

    fn check_query(&self, x: &[F]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("query point must be finite".into()));
        }
        Ok(())
    }

    /// Forest mean prediction: the average of the trees' leaf means at `x`.
    pub fn predict_mean(&self, x: &[F]) -> Result<F> {
        self.check_query(x)?;
        let mut total = F::zero();
        for tree in &self.trees {
            total = total + tree.predict(x);
        }
        Ok(total / F::from_count(self.trees.len()))
    }

    /// Mean predictions for every row of a dataset.
    pub fn predict_dataset(&self, dataset: &Dataset<F>) -> Result<Vec<F>> {
        dataset.require_complete()?;
        (0..dataset.n_rows())
            .map(|r| self.predict_mean(dataset.features().row(r)))
            .collect()
    }

    /// Per-training-row forest weights at `x`: each tree contributes its
    /// leaf's normalized member weights, averaged over trees. Nonnegative
    /// and summing to one.
    pub fn forest_weights(&self, x: &[F]) -> Result<Vec<F>> {
        self.check_query(x)?;
        let mut acc = vec![F::zero(); self.n_rows()];
        for tree in &self.trees {
            match &tree.nodes()[tree.leaf_index(x)] {
                TreeNode::Terminal {
                    member_rows,
                    member_weights,
                    weight_total,
                    ..
                } => {
                    for (&row, &w) in member_rows.iter().zip(member_weights.iter()) {
                        acc[row as usize] = acc[row as usize] + w / *weight_total;
                    }
                }
                TreeNode::Internal { .. } => unreachable!(),
            }
        }
        let b = F::from_count(self.trees.len());
        for v in acc.iter_mut() {
            *v = *v / b;
        }
        Ok(acc)
    }

    /// Conditional `p`-quantile at `x`: the smallest training response whose
    /// cumulative forest weight reaches `p`.
    pub fn conditional_quantile(&self, x: &[F], p: F) -> Result<F> {
        if !(p > F::zero() && p < F::one()) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0, 1), got {p}"
            )));
        }
        let weights = self.forest_weights(x)?;
        self.quantile_from_weights(&weights, p)
    }

    /// Quantile grid search over precomputed forest weights; callers needing
    /// several levels at one point reuse the weight vector.
    pub fn quantile_from_weights(&self, weights: &[F], p: F) -> Result<F> {
        if weights.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                actual: weights.len(),
            });
        }
        if !(p > F::zero() && p < F::one()) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0, 1), got {p}"
            )));
        }
        let mut cumulative = F::zero();
        let mut last_positive: Option<F> = None;
        for &i in &self.response_order {
            let w = weights[i as usize];
            if w > F::zero() {
                cumulative = cumulative + w;
                last_positive = Some(self.responses[i as usize]);
                if cumulative >= p {
                    return Ok(self.responses[i as usize]);
                }
            }
        }
        // Cumulative mass fell a few ulps short of 1: return the largest
        // response carrying weight.
        last_positive.ok_or_else(|| Error::Domain("forest weights are all zero".into()))
    }

    /// Out-of-bag predictions: for each training row, the average prediction
    /// of the trees whose resample excluded it (`None` when every tree saw
    /// the row).
    pub fn oob_predictions(&self, dataset: &Dataset<F>) -> Result<Vec<Option<F>>> {
        dataset.require_complete()?;
        let n = dataset.n_rows();
        if n != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                actual: n,
            });
        }
        let mut in_bag = vec![false; n * self.trees.len()];
        for (k, tree) in self.trees.iter().enumerate() {
            let base = k * n;
            for &row in tree.resample_indices() {
                in_bag[base + row as usize] = true;
            }
        }
        let preds: Vec<Option<F>> = (0..n)
            .into_par_iter()
            .map(|row| {
                let x = dataset.features().row(row);
                let mut total = F::zero();
                let mut count = 0usize;
                for (k, tree) in self.trees.iter().enumerate() {
                    if !in_bag[k * n + row] {
                        total = total + tree.predict(x);
                        count += 1;
                    }
                }
                (count > 0).then(|| total / F::from_count(count))
            })
            .collect();
        Ok(preds)
    }

    /// Out-of-bag squared error. Uniform mode averages the squared residuals
    /// over rows; weighted mode importance-weights them and normalizes by
    /// the included rows' total weight. Rows never out of bag are skipped.
    pub fn oob_error(&self, dataset: &Dataset<F>, mode: OobMode<'_, F>) -> Result<OobReport<F>> {
        let responses = dataset.require_response()?;
        if let OobMode::Weighted(w) = mode {
            if w.len() != self.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_rows(),
                    actual: w.len(),
                });
            }
        }
        let preds = self.oob_predictions(dataset)?;
        let mut numerator = F::zero();
        let mut denominator = F::zero();
        let mut skipped = 0usize;
        for (row, pred) in preds.iter().enumerate() {
            let Some(pred) = pred else {
                skipped += 1;
                continue;
            };
            let resid = *pred - responses[row];
            let sq = resid * resid;
            match mode {
                OobMode::Uniform => {
                    numerator = numerator + sq;
                    denominator = denominator + F::one();
                }
                OobMode::Weighted(w) => {
                    numerator = numerator + w[row] * sq;
                    denominator = denominator + w[row];
                }
            }
        }
        if denominator <= F::zero() {
            return Err(Error::Domain(
                "no rows were ever out of bag (or included rows carry zero weight)".into(),
            ));
        }
        Ok(OobReport {
            error: numerator / denominator,
            skipped,
        })
    }
}

/// Fits one forest per `mtry` value and returns the controls minimizing the
/// weighted out-of-bag error (ties broken toward smaller mtry), plus the
/// full table for diagnostics.
pub fn tune_by_oob<F: Scalar>(
    dataset: &Dataset<F>,
    weights: &ImportanceWeights<F>,
    mtry_grid: &[usize],
    base: &ForestControls,
) -> Result<(ForestControls, Vec<TuneRecord<F>>)> {
    if mtry_grid.is_empty() {
        return Err(Error::Config("mtry grid is empty".into()));
    }
    let mut table = Vec::with_capacity(mtry_grid.len());
    let mut best: Option<(usize, F)> = None;
    for &mtry in mtry_grid {
        let mut controls = base.clone();
        controls.mtry = Some(mtry);
        let forest = fit_forest(dataset, weights, &controls)?;
        let weighted = forest.oob_error(dataset, OobMode::Weighted(weights.effective()))?;
        let uniform = forest.oob_error(dataset, OobMode::Uniform)?;
        table.push(TuneRecord {
            mtry,
            oob_weighted: weighted.error,
            oob_uniform: uniform.error,
            skipped: weighted.skipped,
        });
        let better = match best {
            None => true,
            Some((best_mtry, best_err)) => {
                weighted.error < best_err || (weighted.error == best_err && mtry < best_mtry)
            }
        };
        if better {
            best = Some((mtry, weighted.error));
        }
    }
    let (best_mtry, _) = best.expect("grid is non-empty");
    let mut controls = base.clone();
    controls.mtry = Some(best_mtry);
    Ok((controls, table))
}

const FOREST_FORMAT_VERSION: u32 = 1;

/// On-disk forest document. Everything needed to reload and predict
/// bit-identically: controls, responses, weights and per-tree node arrays.
#[derive(Serialize, Deserialize)]
struct ForestDocument<F> {
    format_version: u32,
    controls: ForestControls,
    feature_names: Vec<String>,
    responses: Vec<F>,
    training_weights: Vec<F>,
    trees: Vec<WeightedTree<F>>,
}

impl<F: Scalar> WeightedForest<F> {
    pub fn to_json(&self) -> Result<String> {
        let doc = ForestDocument {
            format_version: FOREST_FORMAT_VERSION,
            controls: self.controls.clone(),
            feature_names: self.feature_names.clone(),
            responses: self.responses.clone(),
            training_weights: self.training_weights.clone(),
            trees: self.trees.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ForestDocument<F> = serde_json::from_str(text)?;
        if doc.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported forest format version {} (expected {})",
                doc.format_version, FOREST_FORMAT_VERSION
            )));
        }
        Ok(Self::from_parts(
            doc.trees,
            doc.controls,
            doc.responses,
            doc.training_weights,
            doc.feature_names,
        ))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
