//! Independent loss functions, their gradients, and the empirical check of
//! the gradient lower bound that drives parameter recovery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{Dataset, GradientPacConstants, LossKind, ParamReg, QueryAnswer, UserSpec, Vector};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("dimension mismatch: theta has {theta} coordinates, query has {query}")]
    DimensionMismatch { theta: usize, query: usize },
    #[error("logistic answers must be -1 or +1 (got {0})")]
    BadLogisticAnswer(f64),
    #[error("dataset does not match the loss kind: {0}")]
    KindMismatch(String),
    #[error("operation needs a nonempty dataset")]
    EmptyDataset,
}

/// Numerically stable sigmoid, exact for |z| up to the exp underflow range.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow; -ln sigmoid(z) = softplus(-z).
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared error on one pair: value 0.5 (theta^T x - y)^2, gradient
/// (theta^T x - y) x.
pub fn linear_loss(theta: &[f64], qa: &QueryAnswer) -> Result<(f64, Vector), LossError> {
    if theta.len() != qa.query.len() {
        return Err(LossError::DimensionMismatch { theta: theta.len(), query: qa.query.len() });
    }
    let r = dot(theta, &qa.query) - qa.answer;
    Ok((0.5 * r * r, qa.query.iter().map(|&x| r * x).collect()))
}

/// Negative log-likelihood of a sigmoid label on one pair: value
/// -ln sigmoid(y theta^T x), gradient (sigmoid(theta^T x) - 1{y=1}) x.
pub fn logistic_loss(theta: &[f64], qa: &QueryAnswer) -> Result<(f64, Vector), LossError> {
    if theta.len() != qa.query.len() {
        return Err(LossError::DimensionMismatch { theta: theta.len(), query: qa.query.len() });
    }
    if qa.answer != 1.0 && qa.answer != -1.0 {
        return Err(LossError::BadLogisticAnswer(qa.answer));
    }
    let m = dot(theta, &qa.query);
    let value = softplus(-qa.answer * m);
    let slope = sigmoid(m) - if qa.answer == 1.0 { 1.0 } else { 0.0 };
    Ok((value, qa.query.iter().map(|&x| slope * x).collect()))
}

/// A closed-form convex loss used where a dataset would be indirect: the
/// two-dimensional tilted quadratic of the manipulation counterexample, and
/// a plain quadratic pin for tests. Both are nonnegative, strictly convex
/// and differentiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticLoss {
    /// 0.5 (a t0 - t1)^2 + t1 + eps (t0^2 + t1^2) + 1/(4 eps) on R^2.
    /// Nonnegative because the affine part completes to
    /// eps (t1 + 1/(2 eps))^2.
    TiltedQuadratic { a: f64, eps: f64 },
    /// weight * ||theta - center||_2^2.
    QuadraticPin { center: Vector, weight: f64 },
}

impl SyntheticLoss {
    pub fn evaluate(&self, theta: &[f64]) -> (f64, Vector) {
        match self {
            SyntheticLoss::TiltedQuadratic { a, eps } => {
                let (t0, t1) = (theta[0], theta[1]);
                let r = a * t0 - t1;
                let value = 0.5 * r * r + t1 + eps * (t0 * t0 + t1 * t1) + 1.0 / (4.0 * eps);
                let grad = vec![a * r + 2.0 * eps * t0, -r + 1.0 + 2.0 * eps * t1];
                (value, grad)
            }
            SyntheticLoss::QuadraticPin { center, weight } => {
                let value = weight
                    * theta.iter().zip(center).map(|(&t, &c)| (t - c) * (t - c)).sum::<f64>();
                let grad = theta.iter().zip(center).map(|(&t, &c)| 2.0 * weight * (t - c)).collect();
                (value, grad)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SyntheticLoss::TiltedQuadratic { .. } => 2,
            SyntheticLoss::QuadraticPin { center, .. } => center.len(),
        }
    }

    /// Invariant breaches for use by configuration validation.
    pub(crate) fn invariant_issues(&self, problem_dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            SyntheticLoss::TiltedQuadratic { a, eps } => {
                if !eps.is_finite() || *eps <= 0.0 {
                    out.push(format!("tilted quadratic needs eps > 0 for strict convexity (got {eps})"));
                }
                if !a.is_finite() {
                    out.push(format!("tilted quadratic coefficient must be finite (got {a})"));
                }
                if problem_dim != 2 {
                    out.push(format!("tilted quadratic is a 2-D loss (problem dimension is {problem_dim})"));
                }
            }
            SyntheticLoss::QuadraticPin { center, weight } => {
                if !weight.is_finite() || *weight <= 0.0 {
                    out.push(format!("quadratic pin needs weight > 0 (got {weight})"));
                }
                if center.len() != problem_dim {
                    out.push(format!(
                        "quadratic pin center has {} coordinates for dimension {problem_dim}",
                        center.len()
                    ));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    out.push("quadratic pin center must be finite".to_string());
                }
            }
        }
        out
    }
}

fn param_reg_terms(reg: &ParamReg, theta: &[f64]) -> (f64, Vector) {
    match reg {
        ParamReg::Zero => (0.0, vec![0.0; theta.len()]),
        ParamReg::Ridge { weight } => (
            weight * theta.iter().map(|t| t * t).sum::<f64>(),
            theta.iter().map(|t| 2.0 * weight * t).collect(),
        ),
    }
}

/// The user's full independent loss: the sum of per-pair losses over the
/// dataset plus the parameter regularization. An empty dataset with the
/// zero regularizer gives (0, zero vector).
pub fn independent_loss(
    spec: &UserSpec,
    theta: &[f64],
    data: &Dataset,
) -> Result<(f64, Vector), LossError> {
    let (mut value, mut grad) = param_reg_terms(&spec.param_reg, theta);
    match &spec.loss_kind {
        LossKind::LinearRegression => {
            for qa in &data.items {
                let (v, g) = linear_loss(theta, qa)?;
                value += v;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
        }
        LossKind::LogisticRegression => {
            for qa in &data.items {
                let (v, g) = logistic_loss(theta, qa)?;
                value += v;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
        }
        LossKind::Synthetic(loss) => {
            if !data.is_empty() {
                return Err(LossError::KindMismatch(
                    "synthetic losses are closed-form and take no dataset".to_string(),
                ));
            }
            if loss.dimension() != theta.len() {
                return Err(LossError::DimensionMismatch {
                    theta: theta.len(),
                    query: loss.dimension(),
                });
            }
            let (v, g) = loss.evaluate(theta);
            value += v;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
    }
    Ok((value, grad))
}

/// Left side minus right side of the gradient lower bound
///
/// ```text
/// (theta - theta_true)^T grad L(theta, D)
///     >= A n min(r, r^2) - B n^alpha r,      r = ||theta - theta_true||_2
/// ```
///
/// Nonnegative return means the bound holds at this theta. The bound is
/// asymptotic in n, so small datasets may legitimately return negative
/// values.
pub fn gradient_pac_margin(
    data: &Dataset,
    spec: &UserSpec,
    theta_true: &[f64],
    theta: &[f64],
    constants: &GradientPacConstants,
) -> Result<f64, LossError> {
    if data.is_empty() {
        return Err(LossError::EmptyDataset);
    }
    let (_, grad) = independent_loss(spec, theta, data)?;
    let diff: Vector = theta.iter().zip(theta_true).map(|(&t, &tt)| t - tt).collect();
    let lhs = dot(&diff, &grad);
    let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n = data.len() as f64;
    let rhs = constants.a * n * r.min(r * r) - constants.b * n.powf(constants.alpha) * r;
    Ok(lhs - rhs)
}
