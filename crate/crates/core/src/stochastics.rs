//! Gaussian sampling, the sample-mean statistic, and the conjugate
//! posterior/marginal formulas behind the Bayes rules and prior scans.
//!
//! Every estimator in this crate is a function of the sample mean only, so a
//! [`Sample`] caches its mean once at construction. Draws go through the
//! lower-triangular factor of the covariance: `xi = mu + L z` with `z`
//! standard normal.
//!
//! Reproducibility: all Monte Carlo code draws from [`StreamFactory`]
//! substreams, one per replication index, so results do not depend on worker
//! count or scheduling. The factory keys a counter-based generator (ChaCha)
//! and assigns the replication index to the generator's stream counter.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochasticsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("covariance must be symmetric within 1e-12, entry ({i},{j}) differs by {delta}")]
    Asymmetric { i: usize, j: usize, delta: f64 },
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
}

/// Deterministic factory of independent random substreams.
///
/// `StreamFactory::new(seed)` fixes a key; `stream(r)` yields the generator
/// for replication `r`. `labeled(name)` derives an independent factory for a
/// different purpose under the same user seed, so e.g. a numerator scan and a
/// denominator scan never share draws.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        StreamFactory { key }
    }

    /// Derive an independent factory for a named purpose.
    pub fn labeled(&self, label: &str) -> Self {
        let mut state = fnv1a64(label.as_bytes());
        let mut key = [0u8; 32];
        for (chunk, old) in key.chunks_exact_mut(8).zip(self.key.chunks_exact(8)) {
            let old = u64::from_le_bytes(old.try_into().expect("8-byte chunk"));
            state ^= old;
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        StreamFactory { key }
    }

    /// Generator for substream `index`. Distinct indices give statistically
    /// independent streams of the underlying counter-based cipher.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// State of nature: mean `mu`, positive definite covariance `sigma`, and the
/// number of draws `n` an estimator observes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    n: usize,
    chol_lower: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, n: usize) -> Result<Self, StochasticsError> {
        let d = mu.len();
        if d == 0 {
            return Err(StochasticsError::InvalidModel(
                "mean must have dimension >= 1".into(),
            ));
        }
        if n == 0 {
            return Err(StochasticsError::InvalidModel(
                "sample count must be >= 1".into(),
            ));
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(StochasticsError::DimensionMismatch {
                expected: d,
                got: sigma.nrows().max(sigma.ncols()),
            });
        }
        if !mu.iter().all(|x| x.is_finite()) || !sigma.iter().all(|x| x.is_finite()) {
            return Err(StochasticsError::InvalidModel(
                "model parameters must be finite".into(),
            ));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let delta = (sigma[(i, j)] - sigma[(j, i)]).abs();
                if delta > 1e-12 {
                    return Err(StochasticsError::Asymmetric { i, j, delta });
                }
            }
        }
        let chol_lower = cholesky_lower(&sigma)?;
        Ok(GaussianModel {
            mu,
            sigma,
            n,
            chol_lower,
        })
    }

    /// Model with a diagonal covariance.
    pub fn with_diag(mu: DVector<f64>, diag: DVector<f64>, n: usize) -> Result<Self, StochasticsError> {
        if diag.len() != mu.len() {
            return Err(StochasticsError::DimensionMismatch {
                expected: mu.len(),
                got: diag.len(),
            });
        }
        let sigma = DMatrix::from_diagonal(&diag);
        GaussianModel::new(mu, sigma, n)
    }

    /// Standard model `N(mu, I)` with `n` draws.
    pub fn standard(mu: DVector<f64>, n: usize) -> Result<Self, StochasticsError> {
        let d = mu.len();
        GaussianModel::new(mu, DMatrix::identity(d, d), n)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    /// Same covariance and sample count, different state of nature.
    pub fn at_mean(&self, mu: DVector<f64>) -> Result<Self, StochasticsError> {
        if mu.len() != self.dim() {
            return Err(StochasticsError::DimensionMismatch {
                expected: self.dim(),
                got: mu.len(),
            });
        }
        Ok(GaussianModel {
            mu,
            sigma: self.sigma.clone(),
            n: self.n,
            chol_lower: self.chol_lower.clone(),
        })
    }

    /// Same state and covariance, different sample count.
    pub fn with_n(&self, n: usize) -> Result<Self, StochasticsError> {
        if n == 0 {
            return Err(StochasticsError::InvalidModel(
                "sample count must be >= 1".into(),
            ));
        }
        Ok(GaussianModel {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            n,
            chol_lower: self.chol_lower.clone(),
        })
    }
}

fn cholesky_lower(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, StochasticsError> {
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?;
    let lower = chol.l();
    if lower.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(StochasticsError::NotPositiveDefinite);
    }
    Ok(lower)
}

/// An observed data set: `n` rows of `d`-dimensional draws plus the cached
/// sample mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    draws: DMatrix<f64>,
    mean: DVector<f64>,
}

impl Sample {
    pub fn from_draws(draws: DMatrix<f64>) -> Self {
        let n = draws.nrows();
        let d = draws.ncols();
        let mut mean = DVector::zeros(d);
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..n {
                acc += draws[(i, j)];
            }
            mean[j] = acc / n as f64;
        }
        Sample { draws, mean }
    }

    /// Degenerate sample whose every row equals `mean`; used when an operation
    /// needs to evaluate a rule at a prescribed sample mean.
    pub fn from_mean(mean: DVector<f64>, n: usize) -> Self {
        let d = mean.len();
        let draws = DMatrix::from_fn(n.max(1), d, |_, j| mean[j]);
        Sample { draws, mean }
    }

    pub fn n(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

/// Draw `model.n()` i.i.d. vectors from `N(mu, sigma)` using the model's
/// triangular factor, and cache their mean.
pub fn draw_samples<R: Rng + ?Sized>(model: &GaussianModel, rng: &mut R) -> Sample {
    let n = model.n();
    let d = model.dim();
    let lower = model.chol_lower();
    let mut draws = DMatrix::<f64>::zeros(n, d);
    let mut z = DVector::<f64>::zeros(d);
    for row in 0..n {
        for k in 0..d {
            z[k] = rng.sample::<f64, _>(StandardNormal);
        }
        for i in 0..d {
            let mut acc = model.mu()[i];
            for k in 0..=i {
                acc += lower[(i, k)] * z[k];
            }
            draws[(row, i)] = acc;
        }
    }
    Sample::from_draws(draws)
}

/// Draw a single vector from `N(mean, cov)` given the lower factor of `cov`.
pub fn draw_gaussian<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    chol_lower: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let d = mean.len();
    let mut z = DVector::<f64>::zeros(d);
    for k in 0..d {
        z[k] = rng.sample::<f64, _>(StandardNormal);
    }
    let mut x = mean.clone();
    for i in 0..d {
        for k in 0..=i {
            x[i] += chol_lower[(i, k)] * z[k];
        }
    }
    x
}

/// Posterior mean and covariance of the state given the sample mean, for a
/// Gaussian prior `N(prior_mean, prior_cov)`:
///
/// ```text
/// cov  = (S0^-1 + n S^-1)^-1
/// mean = cov (S0^-1 m0 + n S^-1 xbar)
/// ```
pub fn posterior_params(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    model: &GaussianModel,
    xbar: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), StochasticsError> {
    let d = model.dim();
    if prior_mean.len() != d || xbar.len() != d {
        return Err(StochasticsError::DimensionMismatch {
            expected: d,
            got: prior_mean.len().min(xbar.len()),
        });
    }
    if prior_cov.nrows() != d || prior_cov.ncols() != d {
        return Err(StochasticsError::DimensionMismatch {
            expected: d,
            got: prior_cov.nrows(),
        });
    }
    let prior_precision = prior_cov
        .clone()
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?
        .inverse();
    let data_precision = model
        .sigma()
        .clone()
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?
        .inverse()
        * model.n() as f64;
    let total = &prior_precision + &data_precision;
    let cov = total
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?
        .inverse();
    let mean = &cov * (&prior_precision * prior_mean + &data_precision * xbar);
    Ok((mean, cov))
}

/// Marginal distribution of the sample mean under the centered prior
/// `N(0, tau^2 sigma)`: mean zero, covariance `((n tau^2 + 1)/n) sigma`.
pub fn marginal_of_mean(
    tau: f64,
    model: &GaussianModel,
) -> Result<(DVector<f64>, DMatrix<f64>), StochasticsError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(StochasticsError::InvalidModel(format!(
            "tau must be a positive real, got {tau}"
        )));
    }
    let n = model.n() as f64;
    let factor = (n * tau * tau + 1.0) / n;
    Ok((DVector::zeros(model.dim()), model.sigma() * factor))
}
