//! Importance-weighted random forests for prediction under covariate shift.
//!
//! When training and test covariates come from different distributions but
//! share the conditional law of the response, training observations can be
//! reweighted by the test/train density ratio. This crate estimates those
//! weights (uLSIF or a classifier baseline), regularizes them through an
//! effective-sample-size target, and grows regression forests whose splits,
//! leaf predictions, conditional quantiles and out-of-bag error are all
//! taken under the weighted empirical measure. An iterative quantile-forest
//! imputer and a simulation/metrics harness round out the pipeline.
//!
//! The numeric core is generic over the scalar type ([`Scalar`]: `f32` or
//! `f64`); concrete aliases live at the crate root.

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod impute;
pub mod ratio;
pub mod rng;
pub mod scalar;

pub use dataset::{load_dataset, save_dataset, Dataset, Matrix};
pub use error::{Error, Result};
pub use eval::{compute_metrics, MetricsReport};
pub use forest::{
    fit_forest, grow_weighted_tree, split_gain, tune_by_oob, ForestControls, OobMode, OobReport,
    SplitCandidate, TreeNode, WeightedForest, WeightedTree,
};
pub use impute::{impute, ImputationPlan};
pub use ratio::{
    classifier_ratio_fit, effective_sample_size, solve_smoothing_exponent, ulsif_fit,
    ClassifierRatioConfig, ClassifierRatioModel, ImportanceWeights, SmoothingSolution, UlsifModel,
};
pub use scalar::Scalar;

/// `f64` aliases for the main data types.
pub type DatasetF64 = Dataset<f64>;
pub type MatrixF64 = Matrix<f64>;
pub type ImportanceWeightsF64 = ImportanceWeights<f64>;
pub type UlsifModelF64 = UlsifModel<f64>;
pub type WeightedForestF64 = WeightedForest<f64>;
pub type MetricsReportF64 = MetricsReport<f64>;

/// `f32` aliases for the main data types.
pub type DatasetF32 = Dataset<f32>;
pub type MatrixF32 = Matrix<f32>;
pub type ImportanceWeightsF32 = ImportanceWeights<f32>;
pub type UlsifModelF32 = UlsifModel<f32>;
pub type WeightedForestF32 = WeightedForest<f32>;
pub type MetricsReportF32 = MetricsReport<f32>;
