//! Probabilistic-classification baseline for density-ratio estimation.
//!
//! Train and test covariates are stacked with synthetic labels 0/1; a
//! regression forest on the labels estimates the membership probability
//! (leaf class frequencies), and the ratio is recovered from the stabilized
//! odds `(π + δ) / (1 - π + δ)`.

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestControls, WeightedForest};
use crate::ratio::ImportanceWeights;
use crate::rng::{split_seed, Stream};
use crate::scalar::Scalar;

/// Controls for the classification forest plus the odds stabilizer δ.
#[derive(Clone, Debug)]
pub struct ClassifierRatioConfig {
    pub n_trees: usize,
    /// `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Terminal-node size. Leaf class frequencies feed the odds transform,
    /// which amplifies probability error near π = 1, so leaves need real
    /// mass: `None` means 2.5% of the stacked sample (at least 5).
    pub nodesize: Option<usize>,
    pub delta: f64,
}

impl Default for ClassifierRatioConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: None,
            nodesize: None,
            delta: 1e-2,
        }
    }
}

impl ClassifierRatioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta <= 0.0 {
            return Err(Error::Config(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fitted classifier-inversion model: ratio estimates on the training rows
/// plus the underlying forest for prediction at new points.
#[derive(Clone, Debug)]
pub struct ClassifierRatioModel<F> {
    forest: WeightedForest<F>,
    delta: F,
    train_ratios: Vec<F>,
}

impl<F: Scalar> ClassifierRatioModel<F> {
    /// Ratio estimates on the training covariates (out-of-bag class
    /// probabilities where available).
    pub fn train_ratios(&self) -> &[F] {
        &self.train_ratios
    }

    pub fn forest(&self) -> &WeightedForest<F> {
        &self.forest
    }

    /// Ratio estimate at a new point.
    pub fn predict_one(&self, x: &[F]) -> Result<F> {
        let pi = self.forest.predict_mean(x)?;
        Ok(odds_ratio(pi, self.delta))
    }

    pub fn predict(&self, points: &Matrix<F>) -> Result<Vec<F>> {
        (0..points.rows())
            .map(|r| self.predict_one(points.row(r)))
            .collect()
    }
}

/// Stabilized odds transform `(π + δ) / (1 - π + δ)`.
pub fn odds_ratio<F: Scalar>(pi: F, delta: F) -> F {
    (pi + delta) / (F::one() - pi + delta)
}

/// Fits the classification forest on the stacked sample and returns ratio
/// estimates for the training rows.
///
/// Probabilities for the stacked rows are taken out of bag (rows a tree
/// resampled do not vote for themselves); rows that appear in every
/// resample fall back to the plain forest prediction.
pub fn classifier_ratio_fit<F: Scalar>(
    train: &Matrix<F>,
    test: &Matrix<F>,
    config: &ClassifierRatioConfig,
    seed: u64,
) -> Result<ClassifierRatioModel<F>> {
    config.validate()?;
    let n = train.rows();
    let m = test.rows();
    if n == 0 || m == 0 {
        return Err(Error::Config(
            "both samples must be non-empty to form the two classes".into(),
        ));
    }
    if train.cols() != test.cols() {
        return Err(Error::DimensionMismatch {
            expected: train.cols(),
            actual: test.cols(),
        });
    }
    let p = train.cols();

    let mut data = Vec::with_capacity((n + m) * p);
    for r in 0..n {
        data.extend_from_slice(train.row(r));
    }
    for r in 0..m {
        data.extend_from_slice(test.row(r));
    }
    let features = Matrix::from_vec(data, n + m, p)?;
    let labels: Vec<F> = (0..n + m)
        .map(|i| if i < n { F::zero() } else { F::one() })
        .collect();
    let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
    let stacked = Dataset::new(features, Some(labels), names)?;

    let mtry = config
        .mtry
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    let nodesize = config
        .nodesize
        .unwrap_or_else(|| (((n + m) as f64) * 0.025).ceil() as usize)
        .max(5);
    let controls = ForestControls {
        n_trees: config.n_trees,
        mtry: Some(mtry),
        nodesize,
        max_terminal_nodes: None,
        min_gain_fraction: None,
        sample_fraction: 1.0,
        with_replacement: true,
        seed: split_seed(seed, Stream::Classifier, 0),
    };
    let forest = fit_forest(&stacked, &ImportanceWeights::uniform(n + m), &controls)?;

    let oob = forest.oob_predictions(&stacked)?;
    let delta = F::from_f64_lossy(config.delta);
    let mut train_ratios = Vec::with_capacity(n);
    for i in 0..n {
        let pi = match oob[i] {
            Some(pi) => pi,
            None => forest.predict_mean(stacked.features().row(i))?,
        };
        train_ratios.push(odds_ratio(pi, delta));
    }
    Ok(ClassifierRatioModel {
        forest,
        delta,
        train_ratios,
    })
}
