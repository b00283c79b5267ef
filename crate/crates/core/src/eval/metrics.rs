//! Point and interval prediction metrics with the composite score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Metrics bundle for one evaluation run. The score combines reciprocal
/// losses with an interval-width penalty and a coverage factor:
/// `(1/MAE + 1/RMSE + 4/IntWidth) * Covg / (1 - alpha)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MetricsReport<F> {
    pub rmse: F,
    pub mae: F,
    pub coverage: F,
    pub interval_width: F,
    pub score: F,
    /// Lower quantile level of the interval (0.1 for an 80% interval whose
    /// score divides by 0.9).
    pub alpha_level: F,
}

/// Recomputes the score from its components; infinite when a component that
/// is divided by is zero.
pub fn score_from_components<F: Scalar>(
    mae: F,
    rmse: F,
    coverage: F,
    interval_width: F,
    alpha_level: F,
) -> F {
    if mae <= F::zero() || rmse <= F::zero() || interval_width <= F::zero() {
        return F::infinity();
    }
    let four = F::from_f64_lossy(4.0);
    (F::one() / mae + F::one() / rmse + four / interval_width) * coverage
        / (F::one() - alpha_level)
}

/// Computes RMSE/MAE on the mean predictions, empirical coverage and mean
/// width of `[lo, hi]`, and the composite score at level `alpha_level`.
pub fn compute_metrics<F: Scalar>(
    y_true: &[F],
    y_pred_mean: &[F],
    interval_lo: &[F],
    interval_hi: &[F],
    alpha_level: F,
) -> Result<MetricsReport<F>> {
    let n = y_true.len();
    if n == 0 {
        return Err(Error::Domain("metrics need at least one observation".into()));
    }
    for other in [y_pred_mean.len(), interval_lo.len(), interval_hi.len()] {
        if other != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: other,
            });
        }
    }
    if !(alpha_level > F::zero() && alpha_level < F::one()) {
        return Err(Error::Domain(format!(
            "alpha level must lie in (0, 1), got {alpha_level}"
        )));
    }

    let n_f = F::from_count(n);
    let mut abs_sum = F::zero();
    let mut sq_sum = F::zero();
    let mut covered = 0usize;
    let mut width_sum = F::zero();
    for i in 0..n {
        if interval_lo[i] > interval_hi[i] {
            return Err(Error::Domain(format!(
                "interval bounds inverted at index {i}"
            )));
        }
        let err = y_pred_mean[i] - y_true[i];
        abs_sum = abs_sum + err.abs();
        sq_sum = sq_sum + err * err;
        if y_true[i] >= interval_lo[i] && y_true[i] <= interval_hi[i] {
            covered += 1;
        }
        width_sum = width_sum + (interval_hi[i] - interval_lo[i]);
    }
    let mae = abs_sum / n_f;
    let rmse = (sq_sum / n_f).sqrt();
    let coverage = F::from_count(covered) / n_f;
    let interval_width = width_sum / n_f;
    let score = score_from_components(mae, rmse, coverage, interval_width, alpha_level);
    Ok(MetricsReport {
        rmse,
        mae,
        coverage,
        interval_width,
        score,
        alpha_level,
    })
}
