//! Unconditional cap on the common vector under arbitrary data.
//!
//! With every coupling at power 1, each user's pull on the common vector is
//! bounded no matter what their data says, so the common regularizer caps
//! the common norm at
//! (sum_n w_n b_n / (a_0^q0 * lambda0 * q0))^(1/(q0-1)),
//! where a_0 and b_n are norm-equivalence constants against l2. The run
//! floods every user with each adversarial data mode and verifies the cap;
//! a no-data arm checks the common vector stays at the origin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{Dataset, GlobalSpec, NormSpec, UserSpec};
use crate::datagen::{gen_byzantine, ByzantineMode, DataKind};
use crate::geometry::equivalence_constants;
use crate::solver::{solve, SolverConfig};

use super::{
    join_ints, l2_norm, mix_seed, parallel_map, CheckOutcome, ExperimentError, ExperimentReport,
    ReportBuilder,
};

/// Numerical allowance on the cap; the tight arm (all users pulling one
/// direction) sits exactly on the bound.
const CAP_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ByzantineAbsoluteParams {
    pub dimension: usize,
    pub n_users: usize,
    pub user_weight: f64,
    pub lambda0: f64,
    pub q0: f64,
    /// Adversarial points per user.
    pub n_points: usize,
    pub seeds: Vec<u64>,
}

impl Default for ByzantineAbsoluteParams {
    fn default() -> Self {
        ByzantineAbsoluteParams {
            dimension: 2,
            n_users: 4,
            user_weight: 1.0,
            lambda0: 1.0,
            q0: 2.0,
            n_points: 200,
            seeds: (0..5).collect(),
        }
    }
}

fn flood_modes(dim: usize) -> Vec<(&'static str, ByzantineMode)> {
    vec![
        ("huge_labels", ByzantineMode::HugeLabels { magnitude: 1e9 }),
        ("random_noise", ByzantineMode::RandomNoise),
        ("fixed_target", ByzantineMode::FixedTarget { pretend_theta: vec![1e6; dim] }),
    ]
}

impl ByzantineAbsoluteParams {
    /// Checks the parameter gates without running the experiment.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        gate(self)
    }
}

fn gate(params: &ByzantineAbsoluteParams) -> Result<(), ExperimentError> {
    if params.dimension == 0 {
        return Err(ExperimentError::Gate("dimension must be at least 1".to_string()));
    }
    if params.n_users == 0 || params.n_points == 0 {
        return Err(ExperimentError::Gate(
            "need at least one user and one data point per user".to_string(),
        ));
    }
    if !(params.user_weight > 0.0) || !(params.lambda0 > 0.0) {
        return Err(ExperimentError::Gate("weights must be positive".to_string()));
    }
    if !(params.q0 > 1.0) || !params.q0.is_finite() {
        return Err(ExperimentError::Gate(format!(
            "the common power must be finite and exceed 1 (got {})",
            params.q0
        )));
    }
    if params.seeds.is_empty() {
        return Err(ExperimentError::Gate("need at least one seed".to_string()));
    }
    Ok(())
}

pub fn exp_byzantine_absolute(
    params: &ByzantineAbsoluteParams,
    jobs: usize,
) -> Result<ExperimentReport, ExperimentError> {
    gate(params)?;
    let dim = params.dimension;
    let users: Vec<UserSpec> = (0..params.n_users)
        .map(|_| UserSpec::linear(params.user_weight, 1.0, NormSpec::l2(dim)))
        .collect();
    let global = GlobalSpec::new(params.lambda0, params.q0, NormSpec::l2(dim));
    let solver = SolverConfig { tolerance: 1e-7, ..SolverConfig::default() };

    let (a0, _) = equivalence_constants(&global.norm, dim);
    let pull_cap: f64 = users
        .iter()
        .map(|u| u.weight * equivalence_constants(&u.norm, dim).1)
        .sum();
    let bound = (pull_cap / (a0.powf(params.q0) * params.lambda0 * params.q0))
        .powf(1.0 / (params.q0 - 1.0));

    let modes = flood_modes(dim);
    struct SeedOutcome {
        /// (norm of common vector, residual) per mode, then the no-data arm.
        norms: Vec<(f64, f64)>,
        no_data: f64,
    }
    let per_seed: Vec<Result<SeedOutcome, ExperimentError>> =
        parallel_map(&params.seeds, jobs, |&seed| {
            let mut norms = Vec::new();
            for (mode_idx, (_, mode)) in modes.iter().enumerate() {
                let data: Vec<Dataset> = (0..params.n_users)
                    .map(|u| {
                        let mut d = gen_byzantine(
                            mode,
                            params.n_points,
                            dim,
                            DataKind::Linear,
                            mix_seed(seed, 64 * mode_idx as u64 + u as u64),
                        )?;
                        d.owner = u;
                        Ok(d)
                    })
                    .collect::<Result<_, ExperimentError>>()?;
                let report = solve(&users, &global, &data, &solver)?;
                norms.push((l2_norm(&report.state.common), report.residual));
            }
            let empty: Vec<Dataset> = (0..params.n_users).map(Dataset::empty).collect();
            let report = solve(&users, &global, &empty, &solver)?;
            Ok(SeedOutcome { norms, no_data: l2_norm(&report.state.common) })
        });

    let mut builder = ReportBuilder::new("byzantine_absolute", &params.seeds);
    builder.param("dimension", dim);
    builder.param("n_users", params.n_users);
    builder.param("user_weight", params.user_weight);
    builder.param("lambda0", params.lambda0);
    builder.param("q0", params.q0);
    builder.param("n_points", params.n_points);
    builder.param("seeds", join_ints(&params.seeds));
    builder.param("cap_slack", CAP_SLACK);

    let mut max_norms = vec![f64::NEG_INFINITY; modes.len()];
    let mut max_residuals = vec![f64::NEG_INFINITY; modes.len()];
    let mut max_no_data: f64 = f64::NEG_INFINITY;
    for (seed, outcome) in params.seeds.iter().zip(per_seed) {
        let out = outcome?;
        let mut row = BTreeMap::new();
        for ((name, _), &(norm, residual)) in modes.iter().zip(&out.norms) {
            row.insert(format!("common_norm_{name}"), norm);
            row.insert(format!("residual_{name}"), residual);
        }
        row.insert("common_norm_no_data".to_string(), out.no_data);
        builder.seed_metrics(*seed, row);
        for (slot, &(norm, _)) in max_norms.iter_mut().zip(&out.norms) {
            *slot = slot.max(norm);
        }
        for (slot, &(_, residual)) in max_residuals.iter_mut().zip(&out.norms) {
            *slot = slot.max(residual);
        }
        max_no_data = max_no_data.max(out.no_data);
    }

    builder.metric("bound", bound);
    let mut overall: f64 = f64::NEG_INFINITY;
    for (i, (name, _)) in modes.iter().enumerate() {
        builder.metric(&format!("max_common_norm_{name}"), max_norms[i]);
        builder.metric(&format!("max_residual_{name}"), max_residuals[i]);
        overall = overall.max(max_norms[i]);
        builder.check(CheckOutcome::le(
            &format!("cap_holds_{name}"),
            max_norms[i],
            bound + CAP_SLACK,
        ));
    }
    builder.metric("slack", bound + CAP_SLACK - overall);
    builder.metric("max_common_norm_no_data", max_no_data);
    builder.check(CheckOutcome::le("no_data_common_at_origin", max_no_data, 1e-6));

    Ok(builder.finish())
}
