//! End-to-end manipulation with a smooth coupling versus an absolute-value
//! defense.
//!
//! Main arm: an attacker with coupling power > 1 plans a report via the
//! counter-gradient construction, fabricates 10^4 points at it, and the full
//! solve must land the common vector within 0.1 of each random target; the
//! same pipeline must land a victim user's vector on targets as well.
//!
//! Defense arm: every coupling switches to power 1 and the honest side holds
//! a strict weight majority, so the common vector cannot leave a ball around
//! the honest-only aggregate. Each target far enough outside that ball keeps
//! a guaranteed shortfall: achieved distance >= distance-to-aggregate minus
//! 4*w_H/(w_H - w_A) times the honest diameter, minus slack. The arm throws
//! its best fabrication attempts at each qualifying target and verifies the
//! shortfall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{plan_common_manipulation, plan_target_manipulation};
use crate::core::{Dataset, GlobalSpec, NormSpec, UserSpec};
use crate::datagen::{
    gen_byzantine, gen_linear, gen_strategic, ByzantineMode, DataKind, Prng, QueryDistribution,
};
use crate::solver::{solve, SolverConfig};

use super::{
    join_floats, join_ints, l2_dist, l2_norm, mix_seed, parallel_map, CheckOutcome,
    ExperimentError, ExperimentReport, ReportBuilder,
};

const TARGET_STREAM: u64 = 0x58;
const TARGET_SALT: u64 = 31;
const HONEST_QUERY_SALT: u64 = 41;
const HONEST_LABEL_SALT: u64 = 43;
const ATTACK_QUERY_SALT: u64 = 47;
const ATTACK_LABEL_SALT: u64 = 53;

/// Required closeness of the realized common (or victim) vector.
const GAP_TOL: f64 = 0.1;
/// Slack subtracted from the defense-arm floor.
const FLOOR_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManipulabilityParams {
    /// Attacker coupling power in the main arm; must exceed 1.
    pub attacker_power: f64,
    pub dimension: usize,
    pub n_targets: usize,
    /// Targets are drawn uniformly from this ball.
    pub target_radius: f64,
    /// Fabricated points per attack.
    pub strategic_points: usize,
    /// True parameter and dataset size of the main-arm honest co-user.
    pub honest_theta: Vec<f64>,
    pub n_honest: usize,
    /// True parameters of the defense-arm honest cluster.
    pub defense_cluster: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
}

impl Default for ManipulabilityParams {
    fn default() -> Self {
        ManipulabilityParams {
            attacker_power: 2.0,
            dimension: 2,
            n_targets: 10,
            target_radius: 3.0,
            strategic_points: 10_000,
            honest_theta: vec![0.4, -0.7],
            n_honest: 200,
            defense_cluster: vec![vec![0.5, 0.5], vec![0.65, 0.35], vec![0.4, 0.6]],
            seeds: vec![0],
        }
    }
}

impl ManipulabilityParams {
    /// Checks the parameter gates without running the experiment.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        gate(self)
    }
}

fn gate(params: &ManipulabilityParams) -> Result<(), ExperimentError> {
    if !(params.attacker_power > 1.0) {
        return Err(ExperimentError::Gate(format!(
            "the attacker coupling power must exceed 1 (got {})",
            params.attacker_power
        )));
    }
    if params.dimension == 0 || params.honest_theta.len() != params.dimension {
        return Err(ExperimentError::Gate(format!(
            "honest_theta must have the configured dimension {} (got {})",
            params.dimension,
            params.honest_theta.len()
        )));
    }
    if params.defense_cluster.len() < 2
        || params.defense_cluster.iter().any(|t| t.len() != params.dimension)
    {
        return Err(ExperimentError::Gate(
            "defense_cluster needs at least two vectors of the configured dimension (strict \
             majority over the single attacker)"
                .to_string(),
        ));
    }
    if params.n_targets == 0 || params.strategic_points == 0 || params.n_honest == 0 {
        return Err(ExperimentError::Gate(
            "target, fabrication and honest dataset counts must be positive".to_string(),
        ));
    }
    if !(params.target_radius > 0.0) {
        return Err(ExperimentError::Gate("target radius must be positive".to_string()));
    }
    if params.seeds.is_empty() {
        return Err(ExperimentError::Gate("need at least one seed".to_string()));
    }
    Ok(())
}

fn draw_targets(params: &ManipulabilityParams, seed: u64) -> Vec<Vec<f64>> {
    let dim = params.dimension;
    let mut rng = Prng::new(mix_seed(seed, TARGET_SALT), TARGET_STREAM);
    (0..params.n_targets)
        .map(|_| {
            let dir: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
            let len = l2_norm(&dir).max(f64::MIN_POSITIVE);
            let scale = params.target_radius * rng.uniform01().powf(1.0 / dim as f64) / len;
            dir.iter().map(|d| d * scale).collect()
        })
        .collect()
}

struct SeedOutcome {
    common_gaps: Vec<f64>,
    target_gaps: Vec<f64>,
    plan_gaps: Vec<f64>,
    /// (floor, best achieved gap) per qualifying defense target.
    defense: Vec<(f64, f64)>,
    delta_h: f64,
}

fn run_seed(params: &ManipulabilityParams, seed: u64) -> Result<SeedOutcome, ExperimentError> {
    let dim = params.dimension;
    let targets = draw_targets(params, seed);
    let solver = SolverConfig { tolerance: 1e-6, ..SolverConfig::default() };

    // Main arm: attacker (index 0) with smooth coupling, one honest co-user.
    let users = vec![
        UserSpec::linear(1.0, params.attacker_power, NormSpec::l2(dim)),
        UserSpec::linear(1.0, 2.0, NormSpec::l2(dim)),
    ];
    let global = GlobalSpec::new(0.5, 2.0, NormSpec::l2(dim));
    let honest_dist = QueryDistribution::gaussian_iid(dim, 1.0, mix_seed(seed, HONEST_QUERY_SALT));
    let mut honest = gen_linear(
        &params.honest_theta,
        params.n_honest,
        &honest_dist,
        0.1,
        mix_seed(seed, HONEST_LABEL_SALT),
    )?;
    honest.owner = 1;
    let base_data = vec![Dataset::empty(0), honest.clone()];

    let attack_dist = |salt: u64| {
        QueryDistribution::gaussian_iid(dim, 1.0, mix_seed(seed, ATTACK_QUERY_SALT + salt))
    };
    let mut common_gaps = Vec::new();
    let mut target_gaps = Vec::new();
    let mut plan_gaps = Vec::new();
    for (i, chi) in targets.iter().enumerate() {
        let plan = plan_common_manipulation(
            chi,
            &users,
            &global,
            &base_data,
            0,
            params.strategic_points,
            &solver,
        )?;
        plan_gaps.push(plan.achieved_gap);
        let mut fabricated = gen_strategic(
            &plan.strategic_vector,
            params.strategic_points,
            DataKind::Linear,
            &attack_dist(2 * i as u64),
            0.0,
            mix_seed(seed, ATTACK_LABEL_SALT + 2 * i as u64),
        )?;
        fabricated.owner = 0;
        let report = solve(&users, &global, &[fabricated, honest.clone()], &solver)?;
        common_gaps.push(l2_dist(&report.state.common, chi));

        let plan_t = plan_target_manipulation(
            1,
            chi,
            &users,
            &global,
            &base_data,
            0,
            params.strategic_points,
            &solver,
        )?;
        let mut fabricated = gen_strategic(
            &plan_t.strategic_vector,
            params.strategic_points,
            DataKind::Linear,
            &attack_dist(2 * i as u64 + 1),
            0.0,
            mix_seed(seed, ATTACK_LABEL_SALT + 2 * i as u64 + 1),
        )?;
        fabricated.owner = 0;
        let report = solve(&users, &global, &[fabricated, honest.clone()], &solver)?;
        target_gaps.push(l2_dist(&report.state.users[1], chi));
    }

    // Defense arm: all couplings power 1, honest majority cluster.
    let n_cluster = params.defense_cluster.len();
    let def_users: Vec<UserSpec> = (0..=n_cluster)
        .map(|_| UserSpec::linear(1.0, 1.0, NormSpec::l2(dim)))
        .collect();
    let def_global = GlobalSpec::new(0.2, 2.0, NormSpec::l2(dim));
    let mut def_data = vec![Dataset::empty(0)];
    for (j, truth) in params.defense_cluster.iter().enumerate() {
        let dist = QueryDistribution::gaussian_iid(
            dim,
            1.0,
            mix_seed(seed, HONEST_QUERY_SALT + 100 + j as u64),
        );
        let mut d = gen_linear(
            truth,
            params.n_honest,
            &dist,
            0.1,
            mix_seed(seed, HONEST_LABEL_SALT + 100 + j as u64),
        )?;
        d.owner = j + 1;
        def_data.push(d);
    }

    // Honest-only aggregate: solve with an empty attacker dataset (power-1
    // coupling with no data contributes nothing at theta_0 = rho).
    let honest_only = solve(&def_users, &def_global, &def_data, &solver)?;
    let rho_h = honest_only.state.common.clone();
    let mut delta_h = 0.0_f64;
    for (j, truth) in params.defense_cluster.iter().enumerate() {
        delta_h = delta_h
            .max(l2_dist(&rho_h, truth))
            .max(l2_dist(&rho_h, &honest_only.state.users[j + 1]));
    }
    let w_honest = n_cluster as f64;
    let lambda0_threshold = (w_honest - 1.0) / (2.0 * 2.0 * l2_norm(&rho_h).max(f64::MIN_POSITIVE));
    if def_global.weight > lambda0_threshold {
        return Err(ExperimentError::Gate(format!(
            "defense arm requires a small common weight: {} > {}",
            def_global.weight, lambda0_threshold
        )));
    }
    let reach = 4.0 * w_honest / (w_honest - 1.0) * delta_h;

    let mut defense = Vec::new();
    for (i, chi) in targets.iter().enumerate() {
        let floor = l2_dist(chi, &rho_h) - reach - FLOOR_SLACK;
        if floor <= 0.0 {
            continue;
        }
        let attempts: Vec<Dataset> = vec![
            gen_byzantine(
                &ByzantineMode::FixedTarget { pretend_theta: chi.clone() },
                params.strategic_points,
                dim,
                DataKind::Linear,
                mix_seed(seed, 900 + i as u64),
            )?,
            gen_byzantine(
                &ByzantineMode::FixedTarget {
                    pretend_theta: chi.iter().map(|c| c * 50.0).collect(),
                },
                params.strategic_points,
                dim,
                DataKind::Linear,
                mix_seed(seed, 930 + i as u64),
            )?,
            gen_byzantine(
                &ByzantineMode::HugeLabels { magnitude: 1e6 },
                params.strategic_points,
                dim,
                DataKind::Linear,
                mix_seed(seed, 960 + i as u64),
            )?,
        ];
        let mut best = f64::INFINITY;
        for mut attempt in attempts {
            attempt.owner = 0;
            let mut data = def_data.clone();
            data[0] = attempt;
            let report = solve(&def_users, &def_global, &data, &solver)?;
            best = best.min(l2_dist(&report.state.common, chi));
        }
        defense.push((floor, best));
    }

    Ok(SeedOutcome { common_gaps, target_gaps, plan_gaps, defense, delta_h })
}

pub fn exp_manipulability(
    params: &ManipulabilityParams,
    jobs: usize,
) -> Result<ExperimentReport, ExperimentError> {
    gate(params)?;
    let per_seed = parallel_map(&params.seeds, jobs, |&seed| run_seed(params, seed));

    let mut builder = ReportBuilder::new("manipulability", &params.seeds);
    builder.param("attacker_power", params.attacker_power);
    builder.param("dimension", params.dimension);
    builder.param("n_targets", params.n_targets);
    builder.param("target_radius", params.target_radius);
    builder.param("strategic_points", params.strategic_points);
    builder.param("honest_theta", join_floats(&params.honest_theta));
    builder.param("n_honest", params.n_honest);
    builder.param("defense_cluster_size", params.defense_cluster.len());
    builder.param("seeds", join_ints(&params.seeds));
    builder.param("gap_tolerance", GAP_TOL);
    builder.param("floor_slack", FLOOR_SLACK);

    let mut max_common: f64 = f64::NEG_INFINITY;
    let mut max_target: f64 = f64::NEG_INFINITY;
    let mut max_plan: f64 = f64::NEG_INFINITY;
    let mut min_defense_slack = f64::INFINITY;
    let mut qualifying = 0usize;
    for (seed, outcome) in params.seeds.iter().zip(per_seed) {
        let out = outcome?;
        let seed_common = out.common_gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let seed_target = out.target_gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let seed_plan = out.plan_gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let seed_slack = out
            .defense
            .iter()
            .map(|(floor, gap)| gap - floor)
            .fold(f64::INFINITY, f64::min);

        let mut row = BTreeMap::new();
        row.insert("max_common_gap".to_string(), seed_common);
        row.insert("max_target_gap".to_string(), seed_target);
        row.insert("max_plan_gap".to_string(), seed_plan);
        row.insert("defense_diameter".to_string(), out.delta_h);
        row.insert("defense_qualifying".to_string(), out.defense.len() as f64);
        row.insert(
            "defense_min_slack".to_string(),
            if out.defense.is_empty() { 0.0 } else { seed_slack },
        );
        builder.seed_metrics(*seed, row);

        max_common = max_common.max(seed_common);
        max_target = max_target.max(seed_target);
        max_plan = max_plan.max(seed_plan);
        if !out.defense.is_empty() {
            min_defense_slack = min_defense_slack.min(seed_slack);
        }
        qualifying += out.defense.len();
    }
    let min_defense_slack = if qualifying == 0 { 0.0 } else { min_defense_slack };

    builder.metric("max_common_gap", max_common);
    builder.metric("max_target_gap", max_target);
    builder.metric("max_plan_gap", max_plan);
    builder.metric("defense_qualifying_targets", qualifying as f64);
    builder.metric("defense_min_slack", min_defense_slack);

    builder.check(CheckOutcome::le("common_vector_reaches_targets", max_common, GAP_TOL));
    builder.check(CheckOutcome::le("victim_vector_reaches_targets", max_target, GAP_TOL));
    builder.check(CheckOutcome::ge(
        "defense_keeps_guaranteed_shortfall",
        min_defense_slack,
        0.0,
    ));

    Ok(builder.finish())
}
