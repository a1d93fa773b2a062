//! A two-user construction where dishonest reporting is supposed to beat
//! honest reporting by a large factor.
//!
//! User 1 carries the tilted quadratic loss with tilt `a` and curvature
//! `eps = min((a-1)/2, 1/(2(a+1)))`; user 2 prefers (0, 1), both couplings
//! are plain l1 with power 1, and the common vector pays an l2-squared
//! penalty. The run solves the pinned problem twice, once with user 2
//! reporting the truthful (0, 1) and once with the crafted
//! w = ((1+2eps)/a, 1), and compares the achieved disutilities
//! ||rho - (0,1)|| + ||theta_1 - (0,1)||.
//!
//! The checks assert the construction's candidate optima and its predicted
//! gain a/(1+2eps). The honest-arm assertion holds. The strategic-arm
//! assertions are expected to fail: the crafted candidate satisfies the
//! blockwise sign conditions but admits no consistent joint subgradient
//! selection (the two picks for the shared coupling kink must be opposite,
//! and then the common block cannot reach zero), so the true joint minimum
//! sits far below it and the realized gain stays near 1. The report carries
//! both the predicted and the measured values.

use serde::{Deserialize, Serialize};

use crate::core::{Dataset, GlobalSpec, NormSpec, UserSpec};
use crate::losses::SyntheticLoss;
use crate::solver::{modified_solve, SolveReport, SolverConfig};

use super::{l2_dist, CheckOutcome, ExperimentError, ExperimentReport, ReportBuilder};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegativeExampleParams {
    /// Tilt of the synthetic loss; must exceed 1.
    pub a: f64,
}

impl Default for NegativeExampleParams {
    fn default() -> Self {
        NegativeExampleParams { a: 10.0 }
    }
}

/// Distance tolerance on the constructed optima.
const POSITION_TOL: f64 = 1e-3;
/// Allowed shortfall of the measured gain against the prediction.
const GAIN_SLACK: f64 = 0.05;

fn disutility(report: &SolveReport, preferred: &[f64]) -> f64 {
    l2_dist(&report.state.common, preferred) + l2_dist(&report.state.users[0], preferred)
}

fn gate(params: &NegativeExampleParams) -> Result<(), ExperimentError> {
    if !(params.a > 1.0) {
        return Err(ExperimentError::Gate(format!("the tilt must exceed 1 (got {})", params.a)));
    }
    Ok(())
}

impl NegativeExampleParams {
    /// Checks the parameter gates without running the experiment.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        gate(self)
    }
}

pub fn exp_negative_example(
    params: &NegativeExampleParams,
    _jobs: usize,
) -> Result<ExperimentReport, ExperimentError> {
    gate(params)?;
    let a = params.a;
    let eps = ((a - 1.0) / 2.0).min(1.0 / (2.0 * (a + 1.0)));
    let preferred = [0.0, 1.0];
    let crafted = [(1.0 + 2.0 * eps) / a, 1.0];
    let predicted_gain = a / (1.0 + 2.0 * eps);

    let users = vec![
        UserSpec::synthetic(
            1.0,
            1.0,
            NormSpec::l1(2),
            SyntheticLoss::TiltedQuadratic { a, eps },
        ),
        UserSpec::linear(1.0, 1.0, NormSpec::l1(2)),
    ];
    let global = GlobalSpec::new(1.0, 2.0, NormSpec::l2(2));
    let data = vec![Dataset::empty(0), Dataset::empty(1)];
    let solver = SolverConfig { tolerance: 1e-9, ..SolverConfig::default() };

    let honest = modified_solve(&users, &global, &data, 1, &preferred, &solver)?;
    let strategic = modified_solve(&users, &global, &data, 1, &crafted, &solver)?;

    let dis_honest = disutility(&honest, &preferred);
    let dis_strategic = disutility(&strategic, &preferred);
    let gain = dis_honest / dis_strategic;

    let mut builder = ReportBuilder::new("negative_example", &[]);
    builder.param("a", a);
    builder.param("eps", eps);
    builder.param("crafted_report", super::join_floats(&crafted));
    builder.param("position_tolerance", POSITION_TOL);
    builder.param("gain_slack", GAIN_SLACK);

    builder.metric("rho_honest_0", honest.state.common[0]);
    builder.metric("rho_honest_1", honest.state.common[1]);
    builder.metric("rho_strategic_0", strategic.state.common[0]);
    builder.metric("rho_strategic_1", strategic.state.common[1]);
    builder.metric("theta1_strategic_0", strategic.state.users[0][0]);
    builder.metric("theta1_strategic_1", strategic.state.users[0][1]);
    builder.metric("disutility_honest", dis_honest);
    builder.metric("disutility_strategic", dis_strategic);
    builder.metric("gain", gain);
    builder.metric("predicted_gain", predicted_gain);
    builder.metric("residual_honest", honest.residual);
    builder.metric("residual_strategic", strategic.residual);

    builder.check(CheckOutcome::le(
        "honest_common_at_origin",
        l2_dist(&honest.state.common, &[0.0, 0.0]),
        POSITION_TOL,
    ));
    builder.check(CheckOutcome::le(
        "strategic_common_at_crafted_report",
        l2_dist(&strategic.state.common, &crafted),
        POSITION_TOL,
    ));
    builder.check(CheckOutcome::ge(
        "gain_reaches_prediction",
        gain,
        predicted_gain - GAIN_SLACK,
    ));

    Ok(builder.finish())
}
