//! Personalized collaborative learning under adversarial data.
//!
//! The crate models N users who each hold a dataset and a local parameter
//! vector, coupled through a shared common vector `rho` by norm penalties.
//! The joint objective is
//!
//! ```text
//! sum_n L_n(theta_n, D_n)
//!   + sum_n lambda_n * N_n(theta_n - rho)^{q_n}
//!   + lambda_0 * N_0(rho)^{q_0}
//! ```
//!
//! where every `N` is a diagonally scaled l_q norm. Minimizing the joint
//! objective personalizes each `theta_n` to its user's data while the
//! common vector aggregates everyone, median-like when the coupling powers
//! are 1 and mean-like when they are 2.
//!
//! Module layout:
//!
//! - [`core`]: domain types and configuration validation.
//! - [`geometry`]: norm evaluation, subgradients of norm powers, and the
//!   counter-gradient construction that underlies the attack planners.
//! - [`losses`]: linear, logistic and synthetic independent losses.
//! - [`datagen`]: deterministic honest, strategic and Byzantine datasets.
//! - [`solver`]: joint optimum computation with a certified subgradient
//!   residual, plus exact 1-D and coordinate-wise solvers and grid oracles.
//! - [`adversary`]: self-auditing plans that steer the common vector or a
//!   target user's vector when coupling powers exceed 1.
//! - [`experiments`]: runnable checks of the learning, manipulation and
//!   resilience claims, each emitting a machine-readable report.

pub mod adversary;
pub mod core;
pub mod datagen;
pub mod experiments;
pub mod geometry;
pub mod losses;
pub mod solver;

pub use crate::core::{
    ConfigViolation, Dataset, GlobalSpec, GradientPacConstants, LossKind, ModelState, NormSpec,
    ParamReg, QExponent, QueryAnswer, UserSpec, Vector,
};
