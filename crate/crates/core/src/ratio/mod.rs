//! Train/test density-ratio estimation and weight regularization.

mod classifier;
mod ulsif;
mod weights;

pub use classifier::{classifier_ratio_fit, odds_ratio, ClassifierRatioConfig, ClassifierRatioModel};
pub use ulsif::{
    default_bandwidth_grid, default_ridge_grid, ulsif_fit, ulsif_fit_at, ulsif_fit_default,
    UlsifModel, DEFAULT_MAX_CENTROIDS,
};
pub use weights::{
    effective_sample_size, solve_smoothing_exponent, ImportanceWeights, SmoothingSolution,
};
