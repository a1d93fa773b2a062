//! Deterministic dataset generation: honest statistical models, strategic
//! reports, and Byzantine fabrication.
//!
//! Reproducibility contract: everything is driven by ChaCha12, a named
//! portable generator, seeded via `seed_from_u64` with two fixed stream
//! ids. Queries draw from a stream keyed by the distribution's own seed,
//! labels and noise from a stream keyed by the generating call's seed.
//! Holding the distribution fixed therefore reproduces the exact same
//! query cloud across arms of an experiment, so paired runs differ only in
//! answers. Uniform doubles take the top 53 bits of each 64-bit output;
//! Gaussians use the Box-Muller transform, two draws per sample.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{Dataset, Vector};
use crate::losses::sigmoid;

/// Stream id for query sampling, keyed by the distribution seed.
const QUERY_STREAM: u64 = 0x71;
/// Stream id for labels and label noise, keyed by the call seed.
const LABEL_STREAM: u64 = 0xa2;

#[derive(Debug, Error, PartialEq)]
pub enum DataGenError {
    #[error("query distribution is over {expected} coordinates, parameter has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("logistic data needs a bounded query distribution")]
    UnboundedQueries,
    #[error("invalid generator input: {0}")]
    InvalidInput(String),
}

/// Query sampling model. Each kind is sub-Gaussian; the bounded kinds are
/// the only ones a logistic generator accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// Independent centered Gaussian coordinates with the given variances.
    GaussianIid { covariance_diag: Vector },
    /// Independent uniform coordinates on [-half_width, half_width].
    BoundedUniform { half_width: f64 },
    /// Queries proportional to a canonical basis vector: a uniformly
    /// chosen axis j yields magnitudes[j] * e_j. Every query touches
    /// exactly one coordinate.
    CanonicalAxes { magnitudes: Vector },
}

/// A query model plus the seed that keys its sampling stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDistribution {
    pub kind: QueryKind,
    pub seed: u64,
}

impl QueryDistribution {
    pub fn gaussian_iid(dim: usize, variance: f64, seed: u64) -> Self {
        QueryDistribution { kind: QueryKind::GaussianIid { covariance_diag: vec![variance; dim] }, seed }
    }

    pub fn bounded_uniform(half_width: f64, seed: u64) -> Self {
        QueryDistribution { kind: QueryKind::BoundedUniform { half_width }, seed }
    }

    pub fn canonical_axes(magnitudes: Vector, seed: u64) -> Self {
        QueryDistribution { kind: QueryKind::CanonicalAxes { magnitudes }, seed }
    }

    fn is_bounded(&self) -> bool {
        !matches!(self.kind, QueryKind::GaussianIid { .. })
    }

    fn validate(&self, dim: usize) -> Result<(), DataGenError> {
        match &self.kind {
            QueryKind::GaussianIid { covariance_diag } => {
                if covariance_diag.len() != dim {
                    return Err(DataGenError::DimensionMismatch {
                        expected: covariance_diag.len(),
                        got: dim,
                    });
                }
                if covariance_diag.iter().any(|&v| !v.is_finite() || v <= 0.0) {
                    return Err(DataGenError::InvalidInput(
                        "Gaussian query variances must be positive and finite".to_string(),
                    ));
                }
            }
            QueryKind::BoundedUniform { half_width } => {
                if !half_width.is_finite() || *half_width <= 0.0 {
                    return Err(DataGenError::InvalidInput(
                        "uniform query half-width must be positive and finite".to_string(),
                    ));
                }
            }
            QueryKind::CanonicalAxes { magnitudes } => {
                if magnitudes.len() != dim {
                    return Err(DataGenError::DimensionMismatch {
                        expected: magnitudes.len(),
                        got: dim,
                    });
                }
                if magnitudes.iter().any(|&v| !v.is_finite() || v == 0.0) {
                    return Err(DataGenError::InvalidInput(
                        "canonical-axis magnitudes must be nonzero and finite".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Which answer model fabricated data targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Linear,
    Logistic,
}

/// Byzantine fabrication modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByzantineMode {
    /// Answers of the given magnitude with random signs. Against logistic
    /// users, where answers must stay in {-1, +1}, the magnitude moves to
    /// the queries instead.
    HugeLabels { magnitude: f64 },
    /// Unit Gaussian queries with pure-noise answers (fair signs for
    /// logistic users).
    RandomNoise,
    /// Honest-process data generated as though the true parameter were
    /// `pretend_theta`; delegates to [`gen_strategic`] over unit-box
    /// queries with zero noise.
    FixedTarget { pretend_theta: Vector },
}

pub(crate) struct Prng(ChaCha12Rng);

impl Prng {
    pub(crate) fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Prng(rng)
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    pub(crate) fn uniform01(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    pub(crate) fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal via Box-Muller; consumes two draws.
    pub(crate) fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform01();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub(crate) fn index(&mut self, n: usize) -> usize {
        // Modulo bias is below 2^-50 for the axis counts used here.
        (self.0.next_u64() % n as u64) as usize
    }

    pub(crate) fn sign(&mut self) -> f64 {
        if self.0.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn sample_query(kind: &QueryKind, dim: usize, rng: &mut Prng) -> Vector {
    match kind {
        QueryKind::GaussianIid { covariance_diag } => {
            covariance_diag.iter().map(|&v| v.sqrt() * rng.gaussian()).collect()
        }
        QueryKind::BoundedUniform { half_width } => {
            (0..dim).map(|_| rng.uniform(-half_width, *half_width)).collect()
        }
        QueryKind::CanonicalAxes { magnitudes } => {
            let j = rng.index(dim);
            let mut x = vec![0.0; dim];
            x[j] = magnitudes[j];
            x
        }
    }
}

fn check_theta(theta: &[f64]) -> Result<(), DataGenError> {
    if theta.is_empty() {
        return Err(DataGenError::InvalidInput("parameter must have dimension >= 1".to_string()));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(DataGenError::InvalidInput("parameter entries must be finite".to_string()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// n pairs with y = x^T theta_true + Gaussian(0, sigma^2) noise.
pub fn gen_linear(
    theta_true: &[f64],
    n: usize,
    dist: &QueryDistribution,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset, DataGenError> {
    check_theta(theta_true)?;
    dist.validate(theta_true.len())?;
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(DataGenError::InvalidInput(format!(
            "noise level must be finite and nonnegative (got {noise_sigma})"
        )));
    }
    let mut queries = Prng::new(dist.seed, QUERY_STREAM);
    let mut labels = Prng::new(seed, LABEL_STREAM);
    let mut out = Dataset::empty(0);
    for _ in 0..n {
        let x = sample_query(&dist.kind, theta_true.len(), &mut queries);
        let noise = if noise_sigma > 0.0 { noise_sigma * labels.gaussian() } else { 0.0 };
        let y = dot(&x, theta_true) + noise;
        out.items.push(crate::core::QueryAnswer { query: x, answer: y });
    }
    Ok(out)
}

/// n pairs with y = +1 with probability sigmoid(x^T theta_true), else -1.
/// Requires a bounded query distribution.
pub fn gen_logistic(
    theta_true: &[f64],
    n: usize,
    dist: &QueryDistribution,
    seed: u64,
) -> Result<Dataset, DataGenError> {
    check_theta(theta_true)?;
    dist.validate(theta_true.len())?;
    if !dist.is_bounded() {
        return Err(DataGenError::UnboundedQueries);
    }
    let mut queries = Prng::new(dist.seed, QUERY_STREAM);
    let mut labels = Prng::new(seed, LABEL_STREAM);
    let mut out = Dataset::empty(0);
    for _ in 0..n {
        let x = sample_query(&dist.kind, theta_true.len(), &mut queries);
        let y = if labels.uniform01() < sigmoid(dot(&x, theta_true)) { 1.0 } else { -1.0 };
        out.items.push(crate::core::QueryAnswer { query: x, answer: y });
    }
    Ok(out)
}

/// Honest-process data generated as though the user's preference were
/// `pretend_theta`. With the true parameter this is exactly honest
/// reporting, bit for bit.
pub fn gen_strategic(
    pretend_theta: &[f64],
    n: usize,
    kind: DataKind,
    dist: &QueryDistribution,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset, DataGenError> {
    match kind {
        DataKind::Linear => gen_linear(pretend_theta, n, dist, noise_sigma, seed),
        DataKind::Logistic => gen_logistic(pretend_theta, n, dist, seed),
    }
}

/// Arbitrary well-formed fabrication: finite numbers, and answers kept in
/// {-1, +1} whenever the victims run logistic losses.
pub fn gen_byzantine(
    mode: &ByzantineMode,
    n: usize,
    dim: usize,
    kind: DataKind,
    seed: u64,
) -> Result<Dataset, DataGenError> {
    if dim == 0 {
        return Err(DataGenError::InvalidInput("dimension must be at least 1".to_string()));
    }
    match mode {
        ByzantineMode::HugeLabels { magnitude } => {
            if !magnitude.is_finite() || *magnitude <= 0.0 {
                return Err(DataGenError::InvalidInput(format!(
                    "label magnitude must be positive and finite (got {magnitude})"
                )));
            }
            let mut queries = Prng::new(seed, QUERY_STREAM);
            let mut labels = Prng::new(seed, LABEL_STREAM);
            let mut out = Dataset::empty(0);
            for _ in 0..n {
                let base: Vector = (0..dim).map(|_| queries.uniform(-1.0, 1.0)).collect();
                let (x, y) = match kind {
                    DataKind::Linear => (base, labels.sign() * magnitude),
                    DataKind::Logistic => {
                        (base.iter().map(|v| v * magnitude).collect(), labels.sign())
                    }
                };
                out.items.push(crate::core::QueryAnswer { query: x, answer: y });
            }
            Ok(out)
        }
        ByzantineMode::RandomNoise => {
            let mut queries = Prng::new(seed, QUERY_STREAM);
            let mut labels = Prng::new(seed, LABEL_STREAM);
            let mut out = Dataset::empty(0);
            for _ in 0..n {
                let x: Vector = (0..dim).map(|_| queries.gaussian()).collect();
                let y = match kind {
                    DataKind::Linear => labels.gaussian(),
                    DataKind::Logistic => labels.sign(),
                };
                out.items.push(crate::core::QueryAnswer { query: x, answer: y });
            }
            Ok(out)
        }
        ByzantineMode::FixedTarget { pretend_theta } => {
            if pretend_theta.len() != dim {
                return Err(DataGenError::DimensionMismatch {
                    expected: pretend_theta.len(),
                    got: dim,
                });
            }
            let dist = QueryDistribution::bounded_uniform(1.0, seed);
            gen_strategic(pretend_theta, n, kind, &dist, 0.0, seed)
        }
    }
}
