//! Density-ratio estimation by unconstrained least-squares importance
//! fitting.
//!
//! The ratio of test to training covariate densities is modelled as a
//! linear combination of Gaussian kernels centered on a subsample of the
//! test points. Coefficients solve a ridge-regularized least-squares
//! system; `(bandwidth, ridge)` are selected from grids by k-fold
//! cross-validation on the empirical squared-loss objective.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, split_seed, Stream};
use crate::scalar::Scalar;

/// Fitted kernel model for the density ratio.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UlsifModel<F> {
    centroids: Matrix<F>,
    coefficients: Vec<F>,
    bandwidth: F,
    ridge: F,
}

impl<F: Scalar> UlsifModel<F> {
    pub fn centroids(&self) -> &Matrix<F> {
        &self.centroids
    }

    /// Raw coefficients; negatives are retained, predictions are clamped.
    pub fn coefficients(&self) -> &[F] {
        &self.coefficients
    }

    pub fn bandwidth(&self) -> F {
        self.bandwidth
    }

    pub fn ridge(&self) -> F {
        self.ridge
    }

    /// `max(0, Σ_k α_k exp(-||x - c_k||² / (2σ²)))`.
    pub fn predict_one(&self, x: &[F]) -> Result<F> {
        if x.len() != self.centroids.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.centroids.cols(),
                actual: x.len(),
            });
        }
        let sigma = self.bandwidth.to_f64_lossy();
        let denom = 2.0 * sigma * sigma;
        let mut total = 0.0f64;
        for (k, &alpha) in self.coefficients.iter().enumerate() {
            let d2 = squared_distance(x, self.centroids.row(k));
            total += alpha.to_f64_lossy() * (-d2 / denom).exp();
        }
        Ok(F::from_f64_lossy(total.max(0.0)))
    }

    pub fn predict(&self, points: &Matrix<F>) -> Result<Vec<F>> {
        (0..points.rows())
            .map(|r| self.predict_one(points.row(r)))
            .collect()
    }
}

fn squared_distance<F: Scalar>(a: &[F], b: &[F]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            d * d
        })
        .sum()
}

/// Default ridge grid: log-spaced over `[1e-3, 1e1]`.
pub fn default_ridge_grid<F: Scalar>() -> Vec<F> {
    log_spaced(1e-3, 1e1, 9)
}

/// Default bandwidth grid: 10 log-spaced values spanning the 10th to 90th
/// percentile of pairwise distances among a pooled subsample of the two
/// samples (the usual median-heuristic bracket).
pub fn default_bandwidth_grid<F: Scalar>(
    train: &Matrix<F>,
    test: &Matrix<F>,
    seed: u64,
) -> Vec<F> {
    const SUBSAMPLE: usize = 200;
    let mut rng = seeded_rng(split_seed(seed, Stream::Centroids, 7));
    let mut pooled: Vec<&[F]> = Vec::new();
    let take = |m: &Matrix<F>, k: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
        if m.rows() <= k {
            (0..m.rows()).collect()
        } else {
            let mut idx = rand::seq::index::sample(rng, m.rows(), k).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    for r in take(train, SUBSAMPLE / 2, &mut rng) {
        pooled.push(train.row(r));
    }
    for r in take(test, SUBSAMPLE / 2, &mut rng) {
        pooled.push(test.row(r));
    }
    let mut distances: Vec<f64> = Vec::new();
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            let d2 = squared_distance(pooled[i], pooled[j]);
            if d2 > 0.0 {
                distances.push(d2.sqrt());
            }
        }
    }
    if distances.is_empty() {
        return vec![F::one()];
    }
    distances.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let pick = |q: f64| -> f64 {
        let idx = ((distances.len() - 1) as f64 * q).round() as usize;
        distances[idx]
    };
    let (lo, hi) = (pick(0.1), pick(0.9));
    if !(hi > lo) {
        return vec![F::from_f64_lossy(lo.max(1e-8))];
    }
    log_spaced(lo, hi, 10)
}

fn log_spaced<F: Scalar>(lo: f64, hi: f64, count: usize) -> Vec<F> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            F::from_f64_lossy((llo + t * (lhi - llo)).exp())
        })
        .collect()
}

/// Fits the ratio model with `(bandwidth, ridge)` selected from the grids by
/// `CV_FOLDS`-fold cross-validation of the empirical objective
/// `½ αᵀĤα − ĥᵀα` (ties prefer the smaller bandwidth, then the larger
/// ridge). Centroids are a uniform subsample of the test points of size
/// `min(m, max_centroids)`.
pub fn ulsif_fit<F: Scalar>(
    train: &Matrix<F>,
    test: &Matrix<F>,
    bandwidth_grid: &[F],
    ridge_grid: &[F],
    max_centroids: usize,
    seed: u64,
) -> Result<UlsifModel<F>> {
    let n = train.rows();
    let m = test.rows();
    if n < 2 || m < 2 {
        return Err(Error::Domain(format!(
            "uLSIF needs at least two points per sample, got n={n}, m={m}"
        )));
    }
    if bandwidth_grid.is_empty() || ridge_grid.is_empty() {
        return Err(Error::Config("bandwidth and ridge grids must be non-empty".into()));
    }
    if train.cols() != test.cols() {
        return Err(Error::DimensionMismatch {
            expected: train.cols(),
            actual: test.cols(),
        });
    }
    check_finite(train)?;
    check_finite(test)?;

    let centroids = choose_centroids(test, max_centroids, seed);
    let b = centroids.rows();

    let mut sigmas: Vec<F> = bandwidth_grid.to_vec();
    sigmas.sort_by(|a, b| a.partial_cmp(b).expect("finite bandwidths"));
    let mut ridges: Vec<F> = ridge_grid.to_vec();
    ridges.sort_by(|a, b| b.partial_cmp(a).expect("finite ridges")); // descending
    for &s in &sigmas {
        if !(s > F::zero()) {
            return Err(Error::Config("bandwidths must be > 0".into()));
        }
    }
    for &r in &ridges {
        if r < F::zero() {
            return Err(Error::Config("ridge penalties must be >= 0".into()));
        }
    }

    const CV_FOLDS: usize = 5;
    let folds = CV_FOLDS.min(n).min(m);
    let train_folds = fold_assignment(n, folds, split_seed(seed, Stream::CvFolds, 0));
    let test_folds = fold_assignment(m, folds, split_seed(seed, Stream::CvFolds, 1));

    let mut best: Option<(f64, F, F)> = None; // (score, sigma, ridge)
    for &sigma in &sigmas {
        let k_de = kernel_block(train, &centroids, sigma);
        let k_nu = kernel_block(test, &centroids, sigma);

        // Per-fold partial sums of the Gram matrix and mean kernel vector.
        let mut gram_fold = vec![DMatrix::<f64>::zeros(b, b); folds];
        let mut count_de = vec![0usize; folds];
        for (i, &f) in train_folds.iter().enumerate() {
            let row = DVector::from_column_slice(&k_de[i * b..(i + 1) * b]);
            gram_fold[f] += &row * row.transpose();
            count_de[f] += 1;
        }
        let mut h_fold = vec![DVector::<f64>::zeros(b); folds];
        let mut count_nu = vec![0usize; folds];
        for (j, &f) in test_folds.iter().enumerate() {
            h_fold[f] += DVector::from_column_slice(&k_nu[j * b..(j + 1) * b]);
            count_nu[f] += 1;
        }
        let gram_all: DMatrix<f64> = gram_fold.iter().sum();
        let h_all: DVector<f64> = h_fold.iter().sum();

        for &ridge in &ridges {
            let mut score_total = 0.0f64;
            let mut usable = true;
            for f in 0..folds {
                let n_tr = n - count_de[f];
                let m_tr = m - count_nu[f];
                if n_tr == 0 || m_tr == 0 || count_de[f] == 0 || count_nu[f] == 0 {
                    usable = false;
                    break;
                }
                let h_train = (&gram_all - &gram_fold[f]) / n_tr as f64;
                let rhs = (&h_all - &h_fold[f]) / m_tr as f64;
                let Some(alpha) = solve_ridge(&h_train, &rhs, ridge.to_f64_lossy()) else {
                    usable = false;
                    break;
                };
                let h_val = &gram_fold[f] / count_de[f] as f64;
                let rhs_val = &h_fold[f] / count_nu[f] as f64;
                score_total +=
                    0.5 * (alpha.transpose() * &h_val * &alpha)[(0, 0)] - rhs_val.dot(&alpha);
            }
            if !usable {
                continue;
            }
            let score = score_total / folds as f64;
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, sigma, ridge));
            }
        }
    }

    let (_, sigma, ridge) =
        best.ok_or_else(|| Error::Numerical("every CV fit failed (singular systems)".into()))?;
    fit_with(train, test, centroids, sigma, ridge)
}

/// Convenience entry point using the default grids and 100 centroids.
pub fn ulsif_fit_default<F: Scalar>(
    train: &Matrix<F>,
    test: &Matrix<F>,
    seed: u64,
) -> Result<UlsifModel<F>> {
    let bandwidths = default_bandwidth_grid(train, test, seed);
    let ridges = default_ridge_grid();
    ulsif_fit(train, test, &bandwidths, &ridges, DEFAULT_MAX_CENTROIDS, seed)
}

/// Bounds the size of the kernel system; the cited method uses every test
/// point, which is quadratic in m.
pub const DEFAULT_MAX_CENTROIDS: usize = 100;

/// Fits at a fixed `(bandwidth, ridge)` with no cross-validation. Accepts
/// single-point samples; useful for hand-sized systems and diagnostics.
pub fn ulsif_fit_at<F: Scalar>(
    train: &Matrix<F>,
    test: &Matrix<F>,
    bandwidth: F,
    ridge: F,
    max_centroids: usize,
    seed: u64,
) -> Result<UlsifModel<F>> {
    if train.rows() == 0 || test.rows() == 0 {
        return Err(Error::Domain("samples must be non-empty".into()));
    }
    if !(bandwidth > F::zero()) {
        return Err(Error::Config("bandwidth must be > 0".into()));
    }
    check_finite(train)?;
    check_finite(test)?;
    let centroids = choose_centroids(test, max_centroids, seed);
    fit_with(train, test, centroids, bandwidth, ridge)
}

fn fit_with<F: Scalar>(
    train: &Matrix<F>,
    test: &Matrix<F>,
    centroids: Matrix<F>,
    sigma: F,
    ridge: F,
) -> Result<UlsifModel<F>> {
    let n = train.rows();
    let m = test.rows();
    let b = centroids.rows();
    let k_de = kernel_block(train, &centroids, sigma);
    let k_nu = kernel_block(test, &centroids, sigma);

    let mut gram = DMatrix::<f64>::zeros(b, b);
    for i in 0..n {
        let row = DVector::from_column_slice(&k_de[i * b..(i + 1) * b]);
        gram += &row * row.transpose();
    }
    gram /= n as f64;
    let mut h = DVector::<f64>::zeros(b);
    for j in 0..m {
        h += DVector::from_column_slice(&k_nu[j * b..(j + 1) * b]);
    }
    h /= m as f64;

    let alpha = solve_ridge(&gram, &h, ridge.to_f64_lossy())
        .ok_or_else(|| Error::Numerical("kernel system is singular after ridge".into()))?;
    Ok(UlsifModel {
        centroids,
        coefficients: alpha.iter().map(|&a| F::from_f64_lossy(a)).collect(),
        bandwidth: sigma,
        ridge,
    })
}

fn solve_ridge(gram: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let b = gram.nrows();
    let mut system = gram.clone();
    for i in 0..b {
        system[(i, i)] += ridge;
    }
    Cholesky::new(system).map(|chol| chol.solve(rhs))
}

/// Row-major `points.rows() x centroids.rows()` kernel evaluations.
fn kernel_block<F: Scalar>(points: &Matrix<F>, centroids: &Matrix<F>, sigma: F) -> Vec<f64> {
    let sigma = sigma.to_f64_lossy();
    let denom = 2.0 * sigma * sigma;
    let b = centroids.rows();
    let mut out = Vec::with_capacity(points.rows() * b);
    for i in 0..points.rows() {
        let x = points.row(i);
        for k in 0..b {
            let d2 = squared_distance(x, centroids.row(k));
            out.push((-d2 / denom).exp());
        }
    }
    out
}

fn choose_centroids<F: Scalar>(test: &Matrix<F>, max_centroids: usize, seed: u64) -> Matrix<F> {
    let m = test.rows();
    let b = max_centroids.max(1).min(m);
    let rows: Vec<usize> = if b == m {
        (0..m).collect()
    } else {
        let mut rng = seeded_rng(split_seed(seed, Stream::Centroids, 0));
        let mut idx = rand::seq::index::sample(&mut rng, m, b).into_vec();
        idx.sort_unstable();
        idx
    };
    let cols: Vec<usize> = (0..test.cols()).collect();
    test.select(&rows, &cols)
}

fn check_finite<F: Scalar>(m: &Matrix<F>) -> Result<()> {
    for r in 0..m.rows() {
        if m.row(r).iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
    }
    Ok(())
}

fn fold_assignment(count: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut assignment = vec![0usize; count];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % folds;
    }
    assignment
}
