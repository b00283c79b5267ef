//! Importance weights, effective sample size and the smoothing exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-observation importance weights with their regularized form.
///
/// `effective[i] = raw[i]^smoothing_exponent`; shrinking the exponent toward
/// zero flattens the weights and raises the effective sample size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceWeights<F> {
    raw: Vec<F>,
    smoothing_exponent: F,
    effective: Vec<F>,
    n_eff: F,
}

impl<F: Scalar> ImportanceWeights<F> {
    /// Raw weights used as-is (exponent 1).
    pub fn from_raw(raw: Vec<F>) -> Result<Self> {
        Self::with_exponent(raw, F::one())
    }

    /// Uniform weights of 1 for `n` observations.
    pub fn uniform(n: usize) -> Self {
        Self::with_exponent(vec![F::one(); n], F::one()).expect("uniform weights are valid")
    }

    pub fn with_exponent(raw: Vec<F>, smoothing_exponent: F) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Domain("weight vector is empty".into()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < F::zero()) {
            return Err(Error::Domain(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if smoothing_exponent <= F::zero() || smoothing_exponent > F::one() {
            return Err(Error::Config(format!(
                "smoothing exponent must lie in (0, 1], got {smoothing_exponent}"
            )));
        }
        let effective: Vec<F> = raw
            .iter()
            .map(|&w| powf_weight(w, smoothing_exponent))
            .collect();
        let n_eff = effective_sample_size(&effective)?;
        Ok(Self {
            raw,
            smoothing_exponent,
            effective,
            n_eff,
        })
    }

    /// Regularizes raw weights so the effective sample size reaches `n0`.
    pub fn regularized(raw: Vec<F>, n0: F) -> Result<(Self, SmoothingSolution<F>)> {
        let solution = solve_smoothing_exponent(&raw, n0)?;
        let weights = Self::with_exponent(raw, solution.exponent)?;
        Ok((weights, solution))
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[F] {
        &self.raw
    }

    pub fn effective(&self) -> &[F] {
        &self.effective
    }

    pub fn smoothing_exponent(&self) -> F {
        self.smoothing_exponent
    }

    pub fn n_eff(&self) -> F {
        self.n_eff
    }
}

/// `w^lambda` with `0^lambda = 0`.
fn powf_weight<F: Scalar>(w: F, lambda: F) -> F {
    if w == F::zero() {
        F::zero()
    } else {
        w.powf(lambda)
    }
}

/// Effective sample size `(Σw)^2 / Σw^2`.
///
/// Uniform weights give `n`; a one-hot vector gives 1. Errors when every
/// weight is zero.
pub fn effective_sample_size<F: Scalar>(weights: &[F]) -> Result<F> {
    let mut sum = F::zero();
    let mut sum_sq = F::zero();
    for &w in weights {
        if !w.is_finite() || w < F::zero() {
            return Err(Error::Domain(
                "weights must be finite and nonnegative".into(),
            ));
        }
        sum = sum + w;
        sum_sq = sum_sq + w * w;
    }
    if sum_sq == F::zero() {
        return Err(Error::Domain(
            "effective sample size undefined for all-zero weights".into(),
        ));
    }
    Ok(sum * sum / sum_sq)
}

/// Result of the smoothing-exponent search.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmoothingSolution<F> {
    /// Exponent in (0, 1].
    pub exponent: F,
    /// Effective sample size attained at `exponent`.
    pub n_eff: F,
    /// Set when the target was unreachable and a boundary value is returned.
    pub clamped: bool,
}

const MAX_BISECTION_ITERS: usize = 200;
const GRID_STEP: f64 = 1e-3;
const LAMBDA_FLOOR: f64 = 1e-9;

/// Finds `lambda` in (0, 1] such that the effective sample size of
/// `w^lambda` equals `n0`, within `1e-6 * n`.
///
/// Bisection exploits that the effective size is nonincreasing in `lambda`
/// for nonconstant positive weights. Returns 1 when the raw weights already
/// satisfy the target, and the boundary value with `clamped` set when no
/// exponent reaches it. Should bisection stall (nonmonotone corner case), a
/// grid scan at 1e-3 resolution takes over.
pub fn solve_smoothing_exponent<F: Scalar>(weights: &[F], n0: F) -> Result<SmoothingSolution<F>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::Domain("weight vector is empty".into()));
    }
    let n_f = F::from_count(n);
    if n0 <= F::one() || n0 >= n_f {
        return Err(Error::Config(format!(
            "target effective size must lie in (1, n) = (1, {n}), got {n0}"
        )));
    }
    let tol = F::from_f64_lossy(1e-6) * n_f;
    let n_eff_at = |lambda: F| -> Result<F> {
        let powered: Vec<F> = weights.iter().map(|&w| powf_weight(w, lambda)).collect();
        effective_sample_size(&powered)
    };

    // No regularization needed when the raw weights already meet the target.
    let at_one = n_eff_at(F::one())?;
    if at_one >= n0 {
        return Ok(SmoothingSolution {
            exponent: F::one(),
            n_eff: at_one,
            clamped: false,
        });
    }

    // As lambda -> 0 the effective size approaches the number of positive
    // weights; if even that falls short the target is unreachable.
    let floor = F::from_f64_lossy(LAMBDA_FLOOR);
    let at_floor = n_eff_at(floor)?;
    if at_floor < n0 {
        return Ok(SmoothingSolution {
            exponent: floor,
            n_eff: at_floor,
            clamped: true,
        });
    }

    let mut lo = floor; // n_eff(lo) >= n0
    let mut hi = F::one(); // n_eff(hi) < n0
    let half = F::from_f64_lossy(0.5);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = (lo + hi) * half;
        let value = n_eff_at(mid)?;
        if (value - n0).abs() <= tol {
            return Ok(SmoothingSolution {
                exponent: mid,
                n_eff: value,
                clamped: false,
            });
        }
        if value >= n0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Grid fallback at 1e-3 resolution.
    let mut best = SmoothingSolution {
        exponent: F::one(),
        n_eff: at_one,
        clamped: true,
    };
    let mut best_gap = (at_one - n0).abs();
    let mut lambda = GRID_STEP;
    while lambda <= 1.0 {
        let l = F::from_f64_lossy(lambda);
        let value = n_eff_at(l)?;
        let gap = (value - n0).abs();
        if gap < best_gap {
            best_gap = gap;
            best = SmoothingSolution {
                exponent: l,
                n_eff: value,
                clamped: gap > tol,
            };
        }
        lambda += GRID_STEP;
    }
    Ok(best)
}
