//! Monte-Carlo check of the gradient lower bound on data-driven losses.
//!
//! For a dataset of n points drawn at a true parameter, the inner product
//! (theta - theta_true)^T grad L(theta) should dominate
//! `a*n*min(r, r^2) - b*n^alpha*r` (r the distance to the truth) with
//! probability approaching 1 as n grows. The run samples datasets over the
//! configured seeds, a fixed cloud of test points theta, and reports the
//! fraction of (seed, theta) pairs whose margin is nonnegative at each n.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{GradientPacConstants, NormSpec, UserSpec};
use crate::datagen::{gen_linear, gen_logistic, DataKind, Prng, QueryDistribution};
use crate::losses::{gradient_pac_margin, sigmoid};

use super::{
    join_floats, join_ints, join_usizes, l2_norm, mix_seed, parallel_map, CheckOutcome,
    ExperimentError, ExperimentReport, ReportBuilder,
};

/// Stream tag for the shared test-point cloud.
const THETA_STREAM: u64 = 0x54;
/// Salts deriving the per-seed query and label streams.
const QUERY_SALT: u64 = 1;
const LABEL_SALT: u64 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientPacParams {
    /// Which data-driven loss to probe.
    pub kind: DataKind,
    pub dimension: usize,
    /// Dataset sizes, strictly increasing.
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub theta_true: Vec<f64>,
    /// Size of the test cloud around the truth.
    pub test_points: usize,
    /// Radius of the ball the test points are drawn from.
    pub sample_radius: f64,
    /// Label noise level (linear data only).
    pub noise_sigma: f64,
    /// Per-coordinate query variance (linear data).
    pub query_variance: f64,
    /// Query box half width (logistic data).
    pub query_half_width: f64,
}

impl Default for GradientPacParams {
    fn default() -> Self {
        GradientPacParams {
            kind: DataKind::Linear,
            dimension: 2,
            n_grid: vec![100, 1_000, 10_000],
            seeds: (0..20).collect(),
            theta_true: vec![0.8, -0.5],
            test_points: 500,
            sample_radius: 3.0,
            noise_sigma: 0.5,
            query_variance: 1.0,
            query_half_width: 1.0,
        }
    }
}

impl GradientPacParams {
    /// Curvature-floor constants for the configured data model: `a` is half
    /// the smallest eigenvalue of the expected query second-moment matrix
    /// (damped by the worst-case sigmoid slope for logistic data), `b` and
    /// `alpha` fix the n^(3/4) noise allowance.
    pub fn fitted_constants(&self) -> GradientPacConstants {
        let a = match self.kind {
            DataKind::Linear => self.query_variance / 2.0,
            DataKind::Logistic => {
                let reach = self.query_half_width
                    * (self.dimension as f64).sqrt()
                    * (self.sample_radius + l2_norm(&self.theta_true));
                let slope = sigmoid(reach) * (1.0 - sigmoid(reach));
                slope * self.query_half_width * self.query_half_width / 3.0 / 2.0
            }
        };
        GradientPacConstants { a, b: 1.0, alpha: 0.75 }
    }
}

impl GradientPacParams {
    /// Checks the parameter gates without running the experiment.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        gate(self)
    }
}

fn gate(params: &GradientPacParams) -> Result<(), ExperimentError> {
    if params.dimension == 0 || params.theta_true.len() != params.dimension {
        return Err(ExperimentError::Gate(format!(
            "theta_true must have the configured dimension {} (got {})",
            params.dimension,
            params.theta_true.len()
        )));
    }
    if params.n_grid.is_empty() || params.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Gate(
            "n_grid must be nonempty and strictly increasing".to_string(),
        ));
    }
    if params.n_grid[0] == 0 {
        return Err(ExperimentError::Gate("dataset sizes must be at least 1".to_string()));
    }
    if params.seeds.is_empty() || params.test_points == 0 {
        return Err(ExperimentError::Gate(
            "need at least one seed and one test point".to_string(),
        ));
    }
    if !(params.sample_radius > 0.0) || !(params.query_variance > 0.0)
        || !(params.query_half_width > 0.0) || params.noise_sigma < 0.0
    {
        return Err(ExperimentError::Gate(
            "radius, query variance and half width must be positive; noise nonnegative"
                .to_string(),
        ));
    }
    Ok(())
}

/// Test points uniform in the ball of `radius` around `center`. The cloud is
/// keyed by a fixed stream so every seed sees the same points.
fn test_cloud(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let dim = center.len();
    let mut rng = Prng::new(0x7468_6574, THETA_STREAM);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
            let len = l2_norm(&dir).max(f64::MIN_POSITIVE);
            let scale = radius * rng.uniform01().powf(1.0 / dim as f64) / len;
            dir.iter().zip(center).map(|(d, c)| c + d * scale).collect()
        })
        .collect()
}

pub fn exp_gradient_pac(
    params: &GradientPacParams,
    jobs: usize,
) -> Result<ExperimentReport, ExperimentError> {
    gate(params)?;
    let constants = params.fitted_constants();
    let spec = match params.kind {
        DataKind::Linear => UserSpec::linear(1.0, 2.0, NormSpec::l2(params.dimension)),
        DataKind::Logistic => UserSpec::logistic(1.0, 2.0, NormSpec::l2(params.dimension)),
    };
    let cloud = test_cloud(&params.theta_true, params.sample_radius, params.test_points);

    // Per seed, the number of satisfied test points at each n.
    let per_seed: Vec<Result<Vec<usize>, ExperimentError>> =
        parallel_map(&params.seeds, jobs, |&seed| {
            let mut satisfied = Vec::with_capacity(params.n_grid.len());
            for &n in &params.n_grid {
                let dist = match params.kind {
                    DataKind::Linear => QueryDistribution::gaussian_iid(
                        params.dimension,
                        params.query_variance,
                        mix_seed(seed, QUERY_SALT),
                    ),
                    DataKind::Logistic => QueryDistribution::bounded_uniform(
                        params.query_half_width,
                        mix_seed(seed, QUERY_SALT),
                    ),
                };
                let data = match params.kind {
                    DataKind::Linear => gen_linear(
                        &params.theta_true,
                        n,
                        &dist,
                        params.noise_sigma,
                        mix_seed(seed, LABEL_SALT),
                    )?,
                    DataKind::Logistic => gen_logistic(
                        &params.theta_true,
                        n,
                        &dist,
                        mix_seed(seed, LABEL_SALT),
                    )?,
                };
                let mut count = 0usize;
                for theta in &cloud {
                    let margin =
                        gradient_pac_margin(&data, &spec, &params.theta_true, theta, &constants)?;
                    if margin >= 0.0 {
                        count += 1;
                    }
                }
                satisfied.push(count);
            }
            Ok(satisfied)
        });

    let mut builder = ReportBuilder::new("gradient_pac", &params.seeds);
    builder.param("kind", format!("{:?}", params.kind).to_lowercase());
    builder.param("dimension", params.dimension);
    builder.param("n_grid", join_usizes(&params.n_grid));
    builder.param("seeds", join_ints(&params.seeds));
    builder.param("theta_true", join_floats(&params.theta_true));
    builder.param("test_points", params.test_points);
    builder.param("sample_radius", params.sample_radius);
    builder.param("noise_sigma", params.noise_sigma);
    builder.param("query_variance", params.query_variance);
    builder.param("query_half_width", params.query_half_width);
    builder.param("constant_a", constants.a);
    builder.param("constant_b", constants.b);
    builder.param("constant_alpha", constants.alpha);

    let mut pooled = vec![0usize; params.n_grid.len()];
    for (seed, outcome) in params.seeds.iter().zip(per_seed) {
        let satisfied = outcome?;
        let mut row = BTreeMap::new();
        for (&n, &count) in params.n_grid.iter().zip(&satisfied) {
            row.insert(
                format!("fraction_n{n}"),
                count as f64 / params.test_points as f64,
            );
        }
        builder.seed_metrics(*seed, row);
        for (slot, count) in pooled.iter_mut().zip(&satisfied) {
            *slot += count;
        }
    }

    let pairs = (params.seeds.len() * params.test_points) as f64;
    let fractions: Vec<f64> = pooled.iter().map(|&c| c as f64 / pairs).collect();
    for (&n, &f) in params.n_grid.iter().zip(&fractions) {
        builder.metric(&format!("fraction_n{n}"), f);
    }
    // A single n in the grid leaves no steps to compare; treat as flat.
    let min_step = if fractions.len() < 2 {
        0.0
    } else {
        fractions.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    };
    builder.metric("min_fraction_step", min_step);

    builder.check(CheckOutcome::ge(
        "final_fraction_at_least_0.99",
        *fractions.last().expect("n_grid nonempty"),
        0.99,
    ));
    builder.check(CheckOutcome::ge("fraction_nondecreasing_in_n", min_step, 0.0));

    Ok(builder.finish())
}
