//! Attack construction against the collaborative objective.
//!
//! In the coupling-power > 1 regime a single participant can steer the
//! shared vector anywhere: the coupling gradient's magnitude is unbounded
//! in the reported vector, so a suitable report cancels everyone else's
//! pull at the desired point. The planners here build that report and
//! audit it by actually solving the modified objective they induce.

use thiserror::Error;

use crate::core::{Dataset, GlobalSpec, UserSpec, Vector};
use crate::datagen::{gen_strategic, DataGenError, DataKind, QueryDistribution};
use crate::geometry::{counter_gradient, GeometryError};
use crate::solver::{common_profile, modified_solve, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("user {user} has coupling power {power}; steering requires power > 1")]
    PowerNotAboveOne { user: usize, power: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Data(#[from] DataGenError),
    #[error("invalid attack input: {0}")]
    InvalidInput(String),
}

/// A self-audited manipulation recipe for one strategic user.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    /// Index of the strategic user.
    pub attacker: usize,
    /// The parameter the attacker should mimic when fabricating data.
    pub strategic_vector: Vector,
    /// Common vector the modified objective actually settles at under the
    /// plan, from the audit solve.
    pub expected_common: Vector,
    /// Euclidean distance between the audit outcome and the requested
    /// target (the common vector or the victim's vector, depending on the
    /// planner).
    pub achieved_gap: f64,
    /// Suggested number of fabricated points for realizing the plan.
    pub dataset_size: usize,
}

fn check_target(chi: &[f64]) -> Result<(), AttackError> {
    if chi.is_empty() || chi.iter().any(|v| !v.is_finite()) {
        return Err(AttackError::InvalidInput(
            "target vector must be finite with dimension >= 1".to_string(),
        ));
    }
    Ok(())
}

fn check_attacker(users: &[UserSpec], s: usize) -> Result<(), AttackError> {
    if s >= users.len() {
        return Err(AttackError::InvalidInput(format!(
            "attacker index {s} out of range for {} users",
            users.len()
        )));
    }
    if users[s].power <= 1.0 {
        return Err(AttackError::PowerNotAboveOne { user: s, power: users[s].power });
    }
    Ok(())
}

/// Plans a report that moves the common optimum to `chi`.
///
/// The gradient g of the leave-one-out profile objective at `chi` is
/// estimated by central finite differences (step 1e-5; the profile is
/// convex and differentiable there in this regime). The report is
/// `w = chi + x` where x is the counter-gradient whose coupling pull at
/// chi equals -g, so the modified objective is stationary at chi. The plan
/// is audited by running `modified_solve` with w; `data[attacker]` is
/// ignored throughout.
pub fn plan_common_manipulation(
    chi: &[f64],
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    attacker: usize,
    dataset_size: usize,
    config: &SolverConfig,
) -> Result<AttackPlan, AttackError> {
    build_common_plan(chi, users, global, data, attacker, dataset_size, config).map(|(plan, _)| plan)
}

fn build_common_plan(
    chi: &[f64],
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    attacker: usize,
    dataset_size: usize,
    config: &SolverConfig,
) -> Result<(AttackPlan, crate::solver::SolveReport), AttackError> {
    check_target(chi)?;
    check_attacker(users, attacker)?;
    if dataset_size == 0 {
        return Err(AttackError::InvalidInput("dataset_size must be at least 1".to_string()));
    }
    let spec = &users[attacker];

    let h = 1e-5;
    let mut g = vec![0.0; chi.len()];
    for j in 0..chi.len() {
        let mut up = chi.to_vec();
        let mut down = chi.to_vec();
        up[j] += h;
        down[j] -= h;
        let fu = common_profile(users, global, data, attacker, &up)?;
        let fd = common_profile(users, global, data, attacker, &down)?;
        g[j] = (fu - fd) / (2.0 * h);
    }

    let x = counter_gradient(&spec.norm, spec.power, spec.weight, &g)?;
    let w: Vector = chi.iter().zip(&x).map(|(c, xi)| c + xi).collect();

    let audit = modified_solve(users, global, data, attacker, &w, config)?;
    let gap = l2_dist(&audit.state.common, chi);
    let plan = AttackPlan {
        attacker,
        strategic_vector: w,
        expected_common: audit.state.common.clone(),
        achieved_gap: gap,
        dataset_size,
    };
    Ok((plan, audit))
}

/// Plans a report that moves a victim's personal optimum to `chi`.
///
/// Stage one inverts the victim's stationarity condition: the common
/// vector `rho_target` at which the victim's inner minimizer equals chi
/// satisfies `coupling pull at (chi - rho_target) = -grad L_t(chi)`, again
/// a counter-gradient. Stage two steers the common vector there via
/// [`plan_common_manipulation`]. The reported gap is the audit distance
/// between the victim's vector and chi.
pub fn plan_target_manipulation(
    target_user: usize,
    chi: &[f64],
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    attacker: usize,
    dataset_size: usize,
    config: &SolverConfig,
) -> Result<AttackPlan, AttackError> {
    check_target(chi)?;
    check_attacker(users, attacker)?;
    if target_user >= users.len() {
        return Err(AttackError::InvalidInput(format!(
            "target user index {target_user} out of range for {} users",
            users.len()
        )));
    }
    if target_user == attacker {
        return Err(AttackError::InvalidInput(
            "target user is the attacker; their vector is replaced by the plan".to_string(),
        ));
    }
    let victim = &users[target_user];
    if victim.power <= 1.0 {
        return Err(AttackError::PowerNotAboveOne { user: target_user, power: victim.power });
    }

    let (_, grad_t) = crate::losses::independent_loss(victim, chi, &data[target_user])
        .map_err(SolverError::from)?;
    let neg: Vector = grad_t.iter().map(|v| -v).collect();
    let shift = counter_gradient(&victim.norm, victim.power, victim.weight, &neg)?;
    let rho_target: Vector = chi.iter().zip(&shift).map(|(c, s)| c - s).collect();

    let (mut plan, audit) =
        build_common_plan(&rho_target, users, global, data, attacker, dataset_size, config)?;
    plan.achieved_gap = l2_dist(&audit.state.users[target_user], chi);
    Ok(plan)
}

/// Honest baseline arm: the dataset user `s` would submit truthfully.
/// Identical to [`gen_strategic`] at the true parameter, with ownership
/// stamped.
pub fn honest_report(
    s: usize,
    theta_true: &[f64],
    n: usize,
    kind: DataKind,
    dist: &QueryDistribution,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset, DataGenError> {
    let mut data = gen_strategic(theta_true, n, kind, dist, noise_sigma, seed)?;
    data.owner = s;
    Ok(data)
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
