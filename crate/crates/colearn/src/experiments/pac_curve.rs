//! Recovery curves for one honest user as their dataset grows.
//!
//! Weak mode: all users honest, and the observed user's error
//! ||theta_0* - theta_true|| must fall to a quarter of its small-n value by
//! the largest n. Strong mode: the observed user keeps coupling power 1 and
//! the co-users are replaced by adversarial data; the decay must survive
//! five different adversarial choices, and each adversarial curve must stay
//! within twice the byzantine-free curve computed from identical honest
//! data (paired seeds).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{Dataset, GlobalSpec, NormSpec, UserSpec};
use crate::datagen::{gen_byzantine, gen_linear, ByzantineMode, DataKind, QueryDistribution};
use crate::solver::{solve, SolverConfig};

use super::{
    join_floats, join_ints, join_usizes, l2_dist, mean, mix_seed, parallel_map, CheckOutcome,
    ExperimentError, ExperimentReport, ReportBuilder,
};

const OBSERVED_QUERY_SALT: u64 = 100;
const OBSERVED_LABEL_SALT: u64 = 200;
const CO_QUERY_SALT: u64 = 300;
const CO_LABEL_SALT: u64 = 400;
const BYZ_SALT: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacMode {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacCurveParams {
    pub mode: PacMode,
    pub dimension: usize,
    /// Total number of users including the observed one.
    pub n_users: usize,
    /// Dataset sizes for the observed user, strictly increasing.
    pub n_grid: Vec<usize>,
    /// Fixed dataset size of each co-user.
    pub n_co: usize,
    /// Fraction of co-users replaced by adversarial data in strong mode.
    pub byzantine_fraction: f64,
    pub seeds: Vec<u64>,
    /// True parameter of the observed user.
    pub theta_true: Vec<f64>,
    /// True parameters the honest co-users cycle through.
    pub co_targets: Vec<Vec<f64>>,
    pub query_variance: f64,
    pub noise_sigma: f64,
}

impl Default for PacCurveParams {
    fn default() -> Self {
        PacCurveParams {
            mode: PacMode::Weak,
            dimension: 2,
            n_users: 5,
            n_grid: vec![100, 1_000, 10_000],
            n_co: 200,
            byzantine_fraction: 1.0,
            seeds: (0..8).collect(),
            theta_true: vec![1.0, -0.6],
            co_targets: vec![
                vec![0.5, 0.5],
                vec![-0.5, 0.2],
                vec![0.2, -0.9],
                vec![-0.3, -0.4],
            ],
            query_variance: 4.0,
            noise_sigma: 0.3,
        }
    }
}

/// The co-user data regimes a strong-mode run is exposed to.
fn adversarial_arms(dim: usize) -> Vec<(&'static str, ByzantineMode)> {
    vec![
        ("huge_labels_1e6", ByzantineMode::HugeLabels { magnitude: 1e6 }),
        ("huge_labels_1e9", ByzantineMode::HugeLabels { magnitude: 1e9 }),
        ("random_noise", ByzantineMode::RandomNoise),
        ("fixed_target_pos", ByzantineMode::FixedTarget { pretend_theta: vec![1e6; dim] }),
        ("fixed_target_neg", ByzantineMode::FixedTarget { pretend_theta: vec![-1e6; dim] }),
    ]
}

impl PacCurveParams {
    /// Checks the parameter gates without running the experiment.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        gate(self)
    }
}

fn gate(params: &PacCurveParams) -> Result<(), ExperimentError> {
    if params.dimension == 0 || params.theta_true.len() != params.dimension {
        return Err(ExperimentError::Gate(format!(
            "theta_true must have the configured dimension {} (got {})",
            params.dimension,
            params.theta_true.len()
        )));
    }
    if params.n_users < 2 {
        return Err(ExperimentError::Gate("need the observed user plus at least one co-user".to_string()));
    }
    if params.n_grid.len() < 2 || params.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Gate(
            "n_grid must hold at least two strictly increasing sizes".to_string(),
        ));
    }
    if params.n_grid[0] == 0 || params.n_co == 0 {
        return Err(ExperimentError::Gate("dataset sizes must be at least 1".to_string()));
    }
    if params.seeds.is_empty() {
        return Err(ExperimentError::Gate("need at least one seed".to_string()));
    }
    if !(0.0..=1.0).contains(&params.byzantine_fraction) {
        return Err(ExperimentError::Gate("byzantine_fraction must lie in [0, 1]".to_string()));
    }
    if params.co_targets.is_empty()
        || params.co_targets.iter().any(|t| t.len() != params.dimension)
    {
        return Err(ExperimentError::Gate(
            "co_targets must be nonempty vectors of the configured dimension".to_string(),
        ));
    }
    if !(params.query_variance > 0.0) || params.noise_sigma < 0.0 {
        return Err(ExperimentError::Gate(
            "query variance must be positive and noise nonnegative".to_string(),
        ));
    }
    Ok(())
}

struct SeedErrors {
    /// Arm name -> error per n_grid entry.
    arms: BTreeMap<String, Vec<f64>>,
}

pub fn exp_pac_curve(
    params: &PacCurveParams,
    jobs: usize,
) -> Result<ExperimentReport, ExperimentError> {
    gate(params)?;
    let dim = params.dimension;
    let coupling_power = match params.mode {
        PacMode::Weak => 2.0,
        PacMode::Strong => 1.0,
    };
    let users: Vec<UserSpec> = (0..params.n_users)
        .map(|_| UserSpec::linear(1.0, coupling_power, NormSpec::l2(dim)))
        .collect();
    let global = GlobalSpec::new(0.1, 2.0, NormSpec::l2(dim));
    let solver = SolverConfig { tolerance: 1e-5, ..SolverConfig::default() };
    let n_co_users = params.n_users - 1;
    let byz_count = match params.mode {
        PacMode::Weak => 0,
        PacMode::Strong => {
            (params.byzantine_fraction * n_co_users as f64).round() as usize
        }
    };
    let arms: Vec<(String, Option<ByzantineMode>)> = match params.mode {
        PacMode::Weak => vec![("free".to_string(), None)],
        PacMode::Strong => {
            let mut out = vec![("free".to_string(), None)];
            for (name, mode) in adversarial_arms(dim) {
                out.push((name.to_string(), Some(mode)));
            }
            out
        }
    };

    let per_seed: Vec<Result<SeedErrors, ExperimentError>> =
        parallel_map(&params.seeds, jobs, |&seed| {
            let observed_dist = QueryDistribution::gaussian_iid(
                dim,
                params.query_variance,
                mix_seed(seed, OBSERVED_QUERY_SALT),
            );
            // Honest co-user data is drawn once per seed and shared by every
            // arm so adversarial effects are isolated to the replaced users.
            let honest_co: Vec<Dataset> = (0..n_co_users)
                .map(|j| {
                    let dist = QueryDistribution::gaussian_iid(
                        dim,
                        params.query_variance,
                        mix_seed(seed, CO_QUERY_SALT + j as u64),
                    );
                    let target = &params.co_targets[j % params.co_targets.len()];
                    let mut d = gen_linear(
                        target,
                        params.n_co,
                        &dist,
                        params.noise_sigma,
                        mix_seed(seed, CO_LABEL_SALT + j as u64),
                    )?;
                    d.owner = j + 1;
                    Ok(d)
                })
                .collect::<Result<_, ExperimentError>>()?;

            let mut arms_out = BTreeMap::new();
            for (arm_idx, (arm_name, byz_mode)) in arms.iter().enumerate() {
                let mut errs = Vec::with_capacity(params.n_grid.len());
                for &n in &params.n_grid {
                    let observed = gen_linear(
                        &params.theta_true,
                        n,
                        &observed_dist,
                        params.noise_sigma,
                        mix_seed(seed, OBSERVED_LABEL_SALT),
                    )?;
                    let mut data = vec![observed];
                    for (j, honest) in honest_co.iter().enumerate() {
                        let byzantine = j >= n_co_users - byz_count;
                        match (byz_mode, byzantine) {
                            (Some(mode), true) => {
                                let mut d = gen_byzantine(
                                    mode,
                                    params.n_co,
                                    dim,
                                    DataKind::Linear,
                                    mix_seed(seed, BYZ_SALT * (arm_idx as u64 + 1) + j as u64),
                                )?;
                                d.owner = j + 1;
                                data.push(d);
                            }
                            _ => data.push(honest.clone()),
                        }
                    }
                    let report = solve(&users, &global, &data, &solver)?;
                    errs.push(l2_dist(&report.state.users[0], &params.theta_true));
                }
                arms_out.insert(arm_name.clone(), errs);
            }
            Ok(SeedErrors { arms: arms_out })
        });

    let mut builder = ReportBuilder::new("pac_curve", &params.seeds);
    builder.param("mode", format!("{:?}", params.mode).to_lowercase());
    builder.param("dimension", dim);
    builder.param("n_users", params.n_users);
    builder.param("n_grid", join_usizes(&params.n_grid));
    builder.param("n_co", params.n_co);
    builder.param("byzantine_fraction", params.byzantine_fraction);
    builder.param("byzantine_co_users", byz_count);
    builder.param("seeds", join_ints(&params.seeds));
    builder.param("theta_true", join_floats(&params.theta_true));
    builder.param("coupling_power", coupling_power);
    builder.param("query_variance", params.query_variance);
    builder.param("noise_sigma", params.noise_sigma);

    // Collect per-arm, per-n errors over seeds.
    let mut collected: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (seed, outcome) in params.seeds.iter().zip(per_seed) {
        let errors = outcome?;
        let mut row = BTreeMap::new();
        for (arm, errs) in &errors.arms {
            for (&n, &e) in params.n_grid.iter().zip(errs) {
                row.insert(format!("err_{arm}_n{n}"), e);
            }
            collected
                .entry(arm.clone())
                .or_insert_with(|| vec![Vec::new(); params.n_grid.len()])
                .iter_mut()
                .zip(errs)
                .for_each(|(bucket, &e)| bucket.push(e));
        }
        builder.seed_metrics(*seed, row);
    }

    let mut mean_errs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (arm, buckets) in &collected {
        let means: Vec<f64> = buckets.iter().map(|b| mean(b)).collect();
        for (&n, &e) in params.n_grid.iter().zip(&means) {
            builder.metric(&format!("err_{arm}_n{n}"), e);
        }
        mean_errs.insert(arm.clone(), means);
    }

    for (arm, means) in &mean_errs {
        let decay = means.last().expect("n_grid nonempty")
            / means.first().expect("n_grid nonempty");
        builder.metric(&format!("decay_{arm}"), decay);
        builder.check(CheckOutcome::le(&format!("error_decay_{arm}"), decay, 0.25));
    }
    if params.mode == PacMode::Strong {
        let free = &mean_errs["free"];
        for (arm, means) in &mean_errs {
            if arm == "free" {
                continue;
            }
            let worst_ratio = means
                .iter()
                .zip(free)
                .map(|(a, f)| a / f)
                .fold(f64::NEG_INFINITY, f64::max);
            builder.metric(&format!("ratio_to_free_{arm}"), worst_ratio);
            builder.check(CheckOutcome::le(
                &format!("within_twice_of_free_{arm}"),
                worst_ratio,
                2.0,
            ));
        }
    }

    Ok(builder.finish())
}
