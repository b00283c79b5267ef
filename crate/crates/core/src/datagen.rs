//! Synthetic data generators for the covariate-shift benchmarks.
//!
//! Two families are provided: a univariate study where training covariates
//! are drawn from `N(-4, 3.5^2)` and test covariates from `N(3.5, 1.5^2)`
//! with a known analytic density ratio, and a 31-feature design whose first
//! six coordinates follow a Dirichlet whose parameter vector is tilted
//! between train and test by a shift factor.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Open01};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, split_seed, Stream};
use crate::scalar::Scalar;

/// Which side of the shifted pair to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// Configuration of the Dirichlet-shift benchmark.
///
/// Columns 1-6 are Dirichlet with parameters `lambda_shift^[1..6]` for the
/// training side and `lambda_shift^[6..1]` for the test side; columns 7-31
/// are iid Uniform(0,1). The response follows one of five models plus
/// Gaussian noise with standard deviation `noise_sd`.
#[derive(Clone, Debug)]
pub struct ShiftBenchmarkSpec {
    pub lambda_shift: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub model_id: u8,
    pub noise_sd: f64,
    pub seed: u64,
}

pub const DIRICHLET_DIMS: usize = 6;
pub const UNIFORM_DIMS: usize = 25;
pub const TOTAL_DIMS: usize = DIRICHLET_DIMS + UNIFORM_DIMS;

impl ShiftBenchmarkSpec {
    pub fn new(lambda_shift: f64, n_train: usize, n_test: usize, model_id: u8, seed: u64) -> Self {
        Self {
            lambda_shift,
            n_train,
            n_test,
            model_id,
            // noise variance 0.25
            noise_sd: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_shift <= 0.0 {
            return Err(Error::Config(format!(
                "lambda_shift must be > 0, got {}",
                self.lambda_shift
            )));
        }
        if !(1..=5).contains(&self.model_id) {
            return Err(Error::Config(format!(
                "model_id must be in 1..=5, got {}",
                self.model_id
            )));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        Ok(())
    }

    /// Dirichlet parameter vector for the given role:
    /// `lambda^k` for k = 1..6 on the training side, reversed on the test side.
    pub fn dirichlet_alpha(&self, role: Role) -> [f64; DIRICHLET_DIMS] {
        let mut alpha = [0.0; DIRICHLET_DIMS];
        for (k, slot) in alpha.iter_mut().enumerate() {
            let exponent = match role {
                Role::Train => (k + 1) as i32,
                Role::Test => (DIRICHLET_DIMS - k) as i32,
            };
            *slot = self.lambda_shift.powi(exponent);
        }
        alpha
    }
}

/// Noiseless regression surface for each benchmark model.
///
/// Model 3 is the MARS function; model 5 depends only on squared Dirichlet
/// coordinates so its response distribution is insensitive to the shift.
pub fn benchmark_signal(model_id: u8, x: &[f64]) -> f64 {
    match model_id {
        1 => 5.0 * x[0],
        2 => 5.0 * (std::f64::consts::PI * x[0]).sin(),
        3 => {
            10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                + 20.0 * (x[2] - 0.5).powi(2)
                + 10.0 * x[3]
                + 5.0 * x[4]
        }
        4 => 5.0 * (2.0 * (x[0] * x[1]).sqrt() + x[5]).exp(),
        5 => 5.0 * x[..5].iter().map(|v| v * v).sum::<f64>(),
        other => panic!("model_id {other} out of range"),
    }
}

/// Generates one side of the Dirichlet-shift benchmark.
///
/// Deterministic in `(spec.seed, role)`; the train and test streams are
/// independent. Dirichlet coordinates are sampled as normalized Gamma draws.
pub fn generate_dirichlet_shift<F: Scalar>(
    spec: &ShiftBenchmarkSpec,
    role: Role,
) -> Result<Dataset<F>> {
    spec.validate()?;
    let n = match role {
        Role::Train => spec.n_train,
        Role::Test => spec.n_test,
    };
    let stream = match role {
        Role::Train => Stream::DataTrain,
        Role::Test => Stream::DataTest,
    };
    let mut rng = seeded_rng(split_seed(spec.seed, stream, 0));

    let alpha = spec.dirichlet_alpha(role);
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::Numerical(e.to_string())))
        .collect::<Result<_>>()?;
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Numerical(e.to_string()))?;

    let mut data = Vec::with_capacity(n * TOTAL_DIMS);
    let mut response = Vec::with_capacity(n);
    let mut row = [0.0f64; TOTAL_DIMS];
    for _ in 0..n {
        let mut total = 0.0;
        for (k, g) in gammas.iter().enumerate() {
            let draw = g.sample(&mut rng);
            row[k] = draw;
            total += draw;
        }
        for v in row[..DIRICHLET_DIMS].iter_mut() {
            *v /= total;
        }
        for v in row[DIRICHLET_DIMS..].iter_mut() {
            *v = rng.random::<f64>();
        }
        let y = benchmark_signal(spec.model_id, &row) + noise.sample(&mut rng);
        data.extend(row.iter().map(|&v| F::from_f64_lossy(v)));
        response.push(F::from_f64_lossy(y));
    }

    let names = (1..=TOTAL_DIMS).map(|j| format!("x{j}")).collect();
    let features = Matrix::from_vec(data, n, TOTAL_DIMS)?;
    let mut dataset = Dataset::new(features, Some(response), names)?;
    dataset.set_response(dataset.response().map(|y| y.to_vec()), Some("y".into()));
    Ok(dataset)
}

/// Noiseless signal of the univariate study:
/// `max(logistic(x) sin(x), logistic(-x) sin(-x))`.
pub fn univariate_signal(x: f64) -> f64 {
    let logistic = |v: f64| v.exp() / (1.0 + v.exp());
    (logistic(x) * x.sin()).max(logistic(-x) * (-x).sin())
}

/// Analytic density ratio of the univariate study, up to a constant factor:
/// standard-normal pdf at `(x - 3.5)/1.5` over pdf at `(x + 4)/3.5`.
pub fn univariate_oracle_ratio(x: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp();
    phi((x - 3.5) / 1.5) / phi((x + 4.0) / 3.5)
}

pub const UNIVARIATE_TRAIN_MEAN: f64 = -4.0;
pub const UNIVARIATE_TRAIN_SD: f64 = 3.5;
pub const UNIVARIATE_TEST_MEAN: f64 = 3.5;
pub const UNIVARIATE_TEST_SD: f64 = 1.5;
/// Default dispersion of the response around the signal, read as a standard
/// deviation (noise variance 0.25). The reference results for this study
/// are only attainable under this reading: with noise variance 0.5 the
/// handful of training points covering the far test region already carry
/// more mean-estimation noise than the entire reported error.
pub const UNIVARIATE_NOISE_SD: f64 = 0.5;

/// Generates the univariate-shift train/test pair with the default noise
/// level ([`UNIVARIATE_NOISE_SD`]).
pub fn generate_univariate_shift<F: Scalar>(
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset<F>, Dataset<F>)> {
    generate_univariate_shift_with(n_train, n_test, UNIVARIATE_NOISE_SD, seed)
}

/// Same as [`generate_univariate_shift`] with an explicit noise standard
/// deviation, for callers preferring another reading of the dispersion
/// (e.g. variance 0.5 via `noise_sd = 0.5f64.sqrt()`).
pub fn generate_univariate_shift_with<F: Scalar>(
    n_train: usize,
    n_test: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset<F>, Dataset<F>)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::Config("sample sizes must be positive".into()));
    }
    let train = univariate_side::<F>(
        n_train,
        UNIVARIATE_TRAIN_MEAN,
        UNIVARIATE_TRAIN_SD,
        noise_sd,
        split_seed(seed, Stream::DataTrain, 1),
    )?;
    let test = univariate_side::<F>(
        n_test,
        UNIVARIATE_TEST_MEAN,
        UNIVARIATE_TEST_SD,
        noise_sd,
        split_seed(seed, Stream::DataTest, 1),
    )?;
    Ok((train, test))
}

fn univariate_side<F: Scalar>(
    n: usize,
    mean: f64,
    sd: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset<F>> {
    let mut rng = seeded_rng(seed);
    let x_dist = Normal::new(mean, sd).map_err(|e| Error::Numerical(e.to_string()))?;
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = x_dist.sample(&mut rng);
        let y = univariate_signal(x) + noise.sample(&mut rng);
        xs.push(F::from_f64_lossy(x));
        ys.push(F::from_f64_lossy(y));
    }
    let features = Matrix::from_vec(xs, n, 1)?;
    let mut dataset = Dataset::new(features, Some(ys), vec!["x".into()])?;
    dataset.set_response(dataset.response().map(|y| y.to_vec()), Some("y".into()));
    Ok(dataset)
}

/// Uniform(0,1) draw on the open interval, used where a quantile level must
/// stay strictly inside (0,1).
pub fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}
