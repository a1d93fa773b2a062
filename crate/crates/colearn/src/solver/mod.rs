//! Joint minimization of the collaborative objective.
//!
//! The solver works through the profile view: with rho fixed, each free
//! user's term collapses to its minimized value, whose gradient in rho
//! equals the user's loss gradient at the inner minimizer. That makes the
//! profile once differentiable in rho wherever users are free, even when
//! the couplings themselves are nonsmooth, and its gradient stays bounded
//! by the coupling weights no matter how large the raw losses are. In one
//! dimension the profile minimum comes from derivative-sign bisection;
//! otherwise descent runs on the profile gradient, with a nonsmooth pinned
//! coupling handled by its prox when there is exactly one. Configurations
//! outside those shapes (several nonsmooth pinned couplings, max-norm
//! pinned couplings in dimension >= 2) fall back to joint subgradient
//! descent over all blocks with best-iterate tracking.
//!
//! Reported residuals are the Euclidean length of an explicitly assembled
//! subgradient of the full objective at the returned state, so `converged`
//! certifies the answer rather than trusting an iteration count. Max-norm
//! couplings in dimension >= 2 use an outer approximation of the
//! subdifferential; results there are approximate and flagged through the
//! residual as usual.

mod inner;
pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    validate_config, ConfigViolation, Dataset, GlobalSpec, ModelState, QExponent, UserSpec, Vector,
};
use crate::geometry::{norm_eval, norm_power_subgradient};
use crate::losses::{independent_loss, LossError};
use inner::{build_rep, inner_minimize, prox_norm_power, LossRep};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("configuration invalid: {}", describe_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("user count mismatch: {users} user specs, {datasets} datasets")]
    UserCount { users: usize, datasets: usize },
    #[error("problem dimension cannot be inferred: no data, no scaled norms, no closed-form losses")]
    DimensionUnknown,
    #[error("user index {index} out of range for {len} users")]
    BadIndex { index: usize, len: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("not coordinate-separable: {0}")]
    NotSeparable(String),
    #[error("bad bracket: {0}")]
    BadBracket(String),
}

fn describe_violations(v: &[ConfigViolation]) -> String {
    let mut out = format!("{} issue(s)", v.len());
    if let Some(first) = v.first() {
        out.push_str(&format!(", first at {}: {}", first.location, first.message));
    }
    out
}

/// Step size rule for the joint descent phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// initial / sqrt(k) at iteration k.
    InverseSqrt { initial: f64 },
    Constant { step: f64 },
}

impl StepSchedule {
    fn at(&self, k: usize) -> f64 {
        match self {
            StepSchedule::InverseSqrt { initial } => initial / (k as f64).sqrt(),
            StepSchedule::Constant { step } => *step,
        }
    }
}

/// Starting point for the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Zeros,
    State(ModelState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Certification target: largest acceptable subgradient length.
    pub tolerance: f64,
    /// Budget for outer iterations across both phases.
    pub max_iterations: usize,
    pub step_schedule: StepSchedule,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-7,
            max_iterations: 200_000,
            step_schedule: StepSchedule::InverseSqrt { initial: 1.0 },
            init: Init::Zeros,
        }
    }
}

/// Result of a joint minimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub state: ModelState,
    /// Objective value at `state`.
    pub loss_value: f64,
    /// Euclidean length of the assembled subgradient at `state`.
    pub residual: f64,
    /// Outer iterations used (inner line searches not counted).
    pub iterations: usize,
    /// True iff `residual <= tolerance`.
    pub converged: bool,
}

/// Full objective value: independent losses, user couplings, common
/// regularization.
pub fn joint_loss(
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    state: &ModelState,
) -> Result<f64, SolverError> {
    if users.len() != data.len() {
        return Err(SolverError::UserCount { users: users.len(), datasets: data.len() });
    }
    if state.users.len() != users.len() {
        return Err(SolverError::InvalidInput(format!(
            "state carries {} user vectors for {} users",
            state.users.len(),
            users.len()
        )));
    }
    let dim = state.dim();
    let violations = validate_config(users, global, dim);
    if !violations.is_empty() {
        return Err(SolverError::InvalidConfig(violations));
    }
    let mut total = 0.0;
    for (n, spec) in users.iter().enumerate() {
        let theta = &state.users[n];
        if theta.len() != dim {
            return Err(SolverError::InvalidInput(format!(
                "user {n} vector has dimension {}, expected {dim}",
                theta.len()
            )));
        }
        let (value, _) = independent_loss(spec, theta, &data[n])?;
        total += value;
        let shift: Vector = theta.iter().zip(&state.common).map(|(t, r)| t - r).collect();
        let nval = norm_eval(&spec.norm, &shift)
            .map_err(|e| SolverError::InvalidInput(e.to_string()))?;
        total += spec.weight * nval.powf(spec.power);
    }
    let nval = norm_eval(&global.norm, &state.common)
        .map_err(|e| SolverError::InvalidInput(e.to_string()))?;
    total += global.weight * nval.powf(global.power);
    Ok(total)
}

struct ProblemUser {
    spec: UserSpec,
    rep: LossRep,
    /// Some(w): the user's vector is fixed at w and only the coupling
    /// lambda * N(w - rho)^power remains active in rho.
    pinned: Option<Vector>,
}

struct Problem {
    users: Vec<ProblemUser>,
    global: GlobalSpec,
    dim: usize,
}

fn infer_dim(users: &[UserSpec], global: &GlobalSpec, data: &[Dataset], init: &Init) -> Option<usize> {
    if let Init::State(s) = init {
        if s.dim() > 0 {
            return Some(s.dim());
        }
    }
    for u in users {
        if u.norm.dim() > 0 {
            return Some(u.norm.dim());
        }
        if let crate::core::LossKind::Synthetic(s) = &u.loss_kind {
            return Some(s.dimension());
        }
    }
    if global.norm.dim() > 0 {
        return Some(global.norm.dim());
    }
    data.iter().flat_map(|d| d.items.first()).map(|item| item.query.len()).next()
}

impl Problem {
    fn build(
        users: &[UserSpec],
        global: &GlobalSpec,
        data: &[Dataset],
        pin: Option<(usize, Vector)>,
        init: &Init,
    ) -> Result<Self, SolverError> {
        if users.len() != data.len() {
            return Err(SolverError::UserCount { users: users.len(), datasets: data.len() });
        }
        let dim = infer_dim(users, global, data, init).ok_or(SolverError::DimensionUnknown)?;
        let violations = validate_config(users, global, dim);
        if !violations.is_empty() {
            return Err(SolverError::InvalidConfig(violations));
        }
        if let Some((s, w)) = &pin {
            if *s >= users.len() {
                return Err(SolverError::BadIndex { index: *s, len: users.len() });
            }
            if w.len() != dim {
                return Err(SolverError::InvalidInput(format!(
                    "pinned vector has dimension {}, expected {dim}",
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::InvalidInput(
                    "pinned vector entries must be finite".to_string(),
                ));
            }
        }
        let empty = Dataset::empty(0);
        let mut built = Vec::with_capacity(users.len());
        for (n, spec) in users.iter().enumerate() {
            let pinned = match &pin {
                Some((s, w)) if *s == n => Some(w.clone()),
                _ => None,
            };
            // A pinned user's dataset is dropped: only the coupling term and
            // any data-free regularizer of the fixed vector remain.
            let source = if pinned.is_some() { &empty } else { &data[n] };
            let rep = build_rep(spec, source, dim)?;
            built.push(ProblemUser { spec: spec.clone(), rep, pinned });
        }
        Ok(Problem { users: built, global: global.clone(), dim })
    }

    fn initial_state(&self, init: &Init) -> Result<ModelState, SolverError> {
        let mut state = match init {
            Init::Zeros => ModelState::zeros(self.users.len(), self.dim),
            Init::State(s) => {
                if s.users.len() != self.users.len() || s.dim() != self.dim {
                    return Err(SolverError::InvalidInput(format!(
                        "initial state has {} user vectors of dimension {}, expected {} of {}",
                        s.users.len(),
                        s.dim(),
                        self.users.len(),
                        self.dim
                    )));
                }
                if s.common.iter().chain(s.users.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(SolverError::InvalidInput(
                        "initial state entries must be finite".to_string(),
                    ));
                }
                s.clone()
            }
        };
        for (n, user) in self.users.iter().enumerate() {
            if let Some(w) = &user.pinned {
                state.users[n] = w.clone();
            }
        }
        Ok(state)
    }

    fn loss(&self, state: &ModelState) -> f64 {
        let mut total = 0.0;
        for (n, user) in self.users.iter().enumerate() {
            let theta = &state.users[n];
            total += user.rep.value(theta);
            total += inner::penalty_value(&user.spec.norm, user.spec.power, user.spec.weight, theta, &state.common);
        }
        let nval = norm_eval(&self.global.norm, &state.common).expect("validated norm");
        total + self.global.weight * nval.powf(self.global.power)
    }

    fn global_grad(&self, rho: &[f64]) -> Vector {
        let set = norm_power_subgradient(&self.global.norm, self.global.power, rho)
            .expect("validated norm");
        set.representative.iter().map(|s| self.global.weight * s).collect()
    }

    /// One representative subgradient of the full objective, split into the
    /// common block and the free user blocks.
    fn joint_subgradient(&self, state: &ModelState) -> (Vector, Vec<Option<Vector>>) {
        let mut rho_g = self.global_grad(&state.common);
        let mut theta_gs = Vec::with_capacity(self.users.len());
        for (n, user) in self.users.iter().enumerate() {
            let theta = &state.users[n];
            let shift: Vector = theta.iter().zip(&state.common).map(|(t, r)| t - r).collect();
            let set = norm_power_subgradient(&user.spec.norm, user.spec.power, &shift)
                .expect("validated norm");
            let lam = user.spec.weight;
            if user.pinned.is_some() {
                for j in 0..self.dim {
                    rho_g[j] -= lam * set.representative[j];
                }
                theta_gs.push(None);
            } else {
                let lg = user.rep.grad(theta);
                let mut tg = vec![0.0; self.dim];
                for j in 0..self.dim {
                    tg[j] = lg[j] + lam * set.representative[j];
                    rho_g[j] -= lam * set.representative[j];
                }
                theta_gs.push(Some(tg));
            }
        }
        (rho_g, theta_gs)
    }

    /// Euclidean length of the smallest assembled subgradient at `state`.
    ///
    /// Free users pick the penalty subgradient closest to the negated loss
    /// gradient coordinate-wise; the same choice then feeds the common
    /// block, keeping the assembly a genuine subgradient. Pinned couplings
    /// contribute per-coordinate intervals to the common block, absorbed in
    /// closed form.
    fn joint_residual(&self, state: &ModelState) -> f64 {
        let mut acc = 0.0;
        let mut rho_base = self.global_grad(&state.common);
        let mut rho_free = vec![(0.0f64, 0.0f64); self.dim];
        for (n, user) in self.users.iter().enumerate() {
            let theta = &state.users[n];
            let shift: Vector = theta.iter().zip(&state.common).map(|(t, r)| t - r).collect();
            let set = norm_power_subgradient(&user.spec.norm, user.spec.power, &shift)
                .expect("validated norm");
            let lam = user.spec.weight;
            if user.pinned.is_some() {
                for j in 0..self.dim {
                    let (lo, hi) = set.free_coords[j];
                    rho_free[j].0 -= lam * hi;
                    rho_free[j].1 -= lam * lo;
                }
            } else {
                let lg = user.rep.grad(theta);
                for j in 0..self.dim {
                    let (lo, hi) = set.free_coords[j];
                    let pick = (-lg[j] / lam).clamp(lo, hi);
                    let r = lg[j] + lam * pick;
                    acc += r * r;
                    rho_base[j] -= lam * pick;
                }
            }
        }
        for j in 0..self.dim {
            let (lo, hi) = rho_free[j];
            let r = rho_base[j] + (-rho_base[j]).clamp(lo, hi);
            acc += r * r;
        }
        acc.sqrt()
    }
}

enum OuterStrategy {
    Bisect1d,
    Smooth,
    /// index of the single pinned user whose nonsmooth coupling gets
    /// proximal treatment; all other terms are smooth in rho.
    Proximal(usize),
    SubgradientOnly,
}

fn pinned_coupling_is_smooth(user: &ProblemUser) -> bool {
    user.spec.power > 1.0
        && user.spec.norm.q != QExponent::Finite(1.0)
        && user.spec.norm.q != QExponent::Infinity
}

fn pinned_coupling_has_prox(user: &ProblemUser) -> bool {
    matches!(user.spec.norm.q, QExponent::Finite(q) if q == 1.0)
        || (user.spec.norm.q == QExponent::Finite(2.0) && user.spec.norm.is_identity_diag())
}

fn choose_strategy(problem: &Problem) -> OuterStrategy {
    if problem.dim == 1 {
        return OuterStrategy::Bisect1d;
    }
    let nonsmooth_pinned: Vec<usize> = problem
        .users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.pinned.is_some() && !pinned_coupling_is_smooth(u))
        .map(|(n, _)| n)
        .collect();
    match nonsmooth_pinned.as_slice() {
        [] => OuterStrategy::Smooth,
        [s] if pinned_coupling_has_prox(&problem.users[*s]) => OuterStrategy::Proximal(*s),
        _ => OuterStrategy::SubgradientOnly,
    }
}

/// Residual checks during fallback descent happen every this many iterations.
const CHECK_EVERY: usize = 25;

fn check_config(config: &SolverConfig) -> Result<(), SolverError> {
    if !config.tolerance.is_finite() || config.tolerance <= 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "tolerance must be positive and finite (got {})",
            config.tolerance
        )));
    }
    if config.max_iterations == 0 {
        return Err(SolverError::InvalidInput("max_iterations must be at least 1".to_string()));
    }
    let step_ok = match config.step_schedule {
        StepSchedule::InverseSqrt { initial } => initial.is_finite() && initial > 0.0,
        StepSchedule::Constant { step } => step.is_finite() && step > 0.0,
    };
    if !step_ok {
        return Err(SolverError::InvalidInput("step sizes must be positive and finite".to_string()));
    }
    Ok(())
}

/// Minimizes the joint objective over the common vector and all user
/// vectors. See the module docs for the phase structure and the meaning of
/// the reported residual.
pub fn solve(
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    check_config(config)?;
    let problem = Problem::build(users, global, data, None, &config.init)?;
    Ok(solve_problem(&problem, config))
}

/// Same objective with one user's vector frozen at `pinned_value` and that
/// user's dataset dropped; only their coupling term remains active. This is
/// the objective a strategic user faces when choosing what to report.
pub fn modified_solve(
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    pin_user: usize,
    pinned_value: &[f64],
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    check_config(config)?;
    let problem =
        Problem::build(users, global, data, Some((pin_user, pinned_value.to_vec())), &config.init)?;
    Ok(solve_problem(&problem, config))
}

/// Value of the profile objective at `rho` with user `exclude` removed:
/// the common regularization plus every other user's minimized term.
pub fn common_profile(
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    exclude: usize,
    rho: &[f64],
) -> Result<f64, SolverError> {
    if users.len() != data.len() {
        return Err(SolverError::UserCount { users: users.len(), datasets: data.len() });
    }
    if exclude >= users.len() {
        return Err(SolverError::BadIndex { index: exclude, len: users.len() });
    }
    let dim = rho.len();
    if dim == 0 || rho.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::InvalidInput(
            "profile point must be finite with dimension >= 1".to_string(),
        ));
    }
    let violations = validate_config(users, global, dim);
    if !violations.is_empty() {
        return Err(SolverError::InvalidConfig(violations));
    }
    let nval =
        norm_eval(&global.norm, rho).map_err(|e| SolverError::InvalidInput(e.to_string()))?;
    let mut total = global.weight * nval.powf(global.power);
    for (n, spec) in users.iter().enumerate() {
        if n == exclude {
            continue;
        }
        let rep = build_rep(spec, &data[n], dim)?;
        let outcome = inner_minimize(&rep, spec, rho, rho, 1e-11);
        total += outcome.objective;
    }
    Ok(total)
}

fn solve_problem(problem: &Problem, config: &SolverConfig) -> SolveReport {
    let strategy = choose_strategy(problem);
    let mut state = problem.initial_state(&config.init).expect("checked in build");
    let mut iterations = 0;
    match strategy {
        OuterStrategy::Bisect1d => {
            let (rho, used) = bisect_common(problem, state.common[0], config.tolerance);
            state.common = vec![rho];
            iterations += used;
        }
        OuterStrategy::Smooth => {
            iterations += polish_smooth(problem, &mut state, config.tolerance, config.max_iterations);
        }
        OuterStrategy::Proximal(pin) => {
            iterations +=
                polish_proximal(problem, &mut state, pin, config.tolerance, config.max_iterations);
        }
        OuterStrategy::SubgradientOnly => {
            let (s, used, _) = phase_a(problem, state, config, config.max_iterations);
            state = s;
            iterations += used;
        }
    }
    if !matches!(strategy, OuterStrategy::SubgradientOnly) {
        refresh_users(problem, &mut state, config.tolerance * 1e-2);
    }
    let residual = problem.joint_residual(&state);
    let loss_value = problem.loss(&state);
    SolveReport {
        converged: residual <= config.tolerance,
        state,
        loss_value,
        residual,
        iterations,
    }
}

/// Joint subgradient descent with best-iterate tracking. Returns the best
/// state, iterations used, and whether the tolerance was already met.
fn phase_a(
    problem: &Problem,
    mut state: ModelState,
    config: &SolverConfig,
    cap: usize,
) -> (ModelState, usize, bool) {
    let mut best = state.clone();
    let mut best_loss = problem.loss(&state);
    for k in 1..=cap {
        if k % CHECK_EVERY == 0 && problem.joint_residual(&best) <= config.tolerance {
            return (best, k, true);
        }
        let (rho_g, theta_gs) = problem.joint_subgradient(&state);
        let step = config.step_schedule.at(k);
        for j in 0..problem.dim {
            state.common[j] -= step * rho_g[j];
        }
        for (n, tg) in theta_gs.iter().enumerate() {
            if let Some(tg) = tg {
                for j in 0..problem.dim {
                    state.users[n][j] -= step * tg[j];
                }
            }
        }
        let loss = problem.loss(&state);
        if loss.is_finite() && loss < best_loss {
            best_loss = loss;
            best = state.clone();
        }
    }
    (best, cap, false)
}

/// Re-minimizes every free user at the current common vector.
fn refresh_users(problem: &Problem, state: &mut ModelState, tol: f64) {
    for (n, user) in problem.users.iter().enumerate() {
        if user.pinned.is_none() {
            let warm = state.users[n].clone();
            let outcome = inner_minimize(&user.rep, &user.spec, &state.common, &warm, tol);
            state.users[n] = outcome.theta;
        }
    }
}

/// Profile value and gradient at rho, inner-minimizing free users (warm
/// starts threaded through `thetas`). `skip_coupling_of` leaves one pinned
/// user's coupling term out, for proximal treatment by the caller.
fn profile_eval(
    problem: &Problem,
    rho: &[f64],
    thetas: &mut [Vector],
    inner_tol: f64,
    skip_coupling_of: Option<usize>,
) -> (f64, Vector) {
    let nval = norm_eval(&problem.global.norm, rho).expect("validated norm");
    let mut value = problem.global.weight * nval.powf(problem.global.power);
    let mut grad = problem.global_grad(rho);
    for (n, user) in problem.users.iter().enumerate() {
        match &user.pinned {
            Some(w) => {
                value += user.rep.value(w);
                if skip_coupling_of == Some(n) {
                    continue;
                }
                value +=
                    inner::penalty_value(&user.spec.norm, user.spec.power, user.spec.weight, w, rho);
                let shift: Vector = w.iter().zip(rho).map(|(a, b)| a - b).collect();
                let set = norm_power_subgradient(&user.spec.norm, user.spec.power, &shift)
                    .expect("validated norm");
                for j in 0..problem.dim {
                    grad[j] -= user.spec.weight * set.representative[j];
                }
            }
            None => {
                let warm = thetas[n].clone();
                let outcome = inner_minimize(&user.rep, &user.spec, rho, &warm, inner_tol);
                let lg = user.rep.grad(&outcome.theta);
                for j in 0..problem.dim {
                    grad[j] += lg[j];
                }
                value += outcome.objective;
                thetas[n] = outcome.theta;
            }
        }
    }
    (value, grad)
}

/// Descent on the profile objective with Barzilai-Borwein steps. The line
/// search tests the directional derivative at the candidate instead of the
/// objective value: the profile is convex, so any step whose directional
/// derivative is still nonpositive has not passed the line minimum and is a
/// true descent step, and gradients stay numerically meaningful at loss
/// scales where value differences drown in rounding. A short bisection then
/// closes in on the line minimum. The iterate with the smallest certified
/// residual wins, and the loop bails once the residual stops improving,
/// which is where the floating-point floor of the instance sits.
fn polish_smooth(problem: &Problem, state: &mut ModelState, tol: f64, budget: usize) -> usize {
    let inner_tol = tol * 1e-2;
    let mut rho = state.common.clone();
    let mut thetas = state.users.clone();
    let (_, mut gx) = profile_eval(problem, &rho, &mut thetas, inner_tol, None);
    let mut step = 1.0;
    let mut prev: Option<(Vector, Vector)> = None;
    let mut used = 0;
    let mut best_res = f64::INFINITY;
    let mut best: Option<(Vector, Vec<Vector>)> = None;
    let mut mark = (f64::INFINITY, 0usize);
    for it in 0..budget.min(20_000) {
        used += 1;
        state.common = rho.clone();
        state.users = thetas.clone();
        let res = problem.joint_residual(state);
        if res < best_res {
            best_res = res;
            best = Some((rho.clone(), thetas.clone()));
        }
        if res <= tol {
            return used;
        }
        if res < 0.5 * mark.0 {
            mark = (res, it);
        } else if it - mark.1 >= 300 {
            break;
        }
        if let Some((pr, pg)) = &prev {
            let mut sy = 0.0;
            let mut yy = 0.0;
            for j in 0..problem.dim {
                let s = rho[j] - pr[j];
                let y = gx[j] - pg[j];
                sy += s * y;
                yy += y * y;
            }
            if sy > 0.0 && yy > 0.0 {
                step = (sy / yy).clamp(1e-14, 1e12);
            }
        }
        let gnorm2: f64 = gx.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 || !gnorm2.is_finite() {
            break;
        }
        let slope_at = |t: f64, thetas: &mut Vec<Vector>| -> f64 {
            let cand: Vector = rho.iter().zip(&gx).map(|(r, g)| r - t * g).collect();
            let (_, gc) = profile_eval(problem, &cand, thetas, inner_tol, None);
            -gc.iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut t = step;
        let mut accepted = None;
        let mut t_hi = None;
        for _ in 0..60 {
            let dd = slope_at(t, &mut thetas);
            if dd <= 0.0 {
                accepted = Some(t);
                break;
            }
            t_hi = Some(t);
            t *= 0.5;
        }
        let Some(mut t_ok) = accepted else { break };
        if let Some(mut hi) = t_hi {
            for _ in 0..8 {
                let mid = 0.5 * (t_ok + hi);
                if slope_at(mid, &mut thetas) <= 0.0 {
                    t_ok = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let cand: Vector = rho.iter().zip(&gx).map(|(r, g)| r - t_ok * g).collect();
        let (_, gc) = profile_eval(problem, &cand, &mut thetas, inner_tol, None);
        prev = Some((std::mem::replace(&mut rho, cand), std::mem::replace(&mut gx, gc)));
        step = t_ok.max(1e-14);
    }
    if let Some((r, th)) = best {
        state.common = r;
        state.users = th;
    } else {
        state.common = rho;
        state.users = thetas;
    }
    used
}

/// Proximal gradient on the profile objective when exactly one pinned
/// coupling is nonsmooth: smooth part by gradient, pinned coupling by its
/// prox, with backtracking against the quadratic model.
fn polish_proximal(
    problem: &Problem,
    state: &mut ModelState,
    pin: usize,
    tol: f64,
    budget: usize,
) -> usize {
    let inner_tol = tol * 1e-2;
    let user = &problem.users[pin];
    let w = user.pinned.clone().expect("proximal strategy needs a pinned user");
    let lam = user.spec.weight;
    let power = user.spec.power;
    let norm = user.spec.norm.clone();
    let mut rho = state.common.clone();
    let mut thetas = state.users.clone();
    let (mut fx, mut gx) = profile_eval(problem, &rho, &mut thetas, inner_tol, Some(pin));
    let mut step = 1.0;
    let mut used = 0;
    for _ in 0..budget.min(20_000) {
        used += 1;
        state.common = rho.clone();
        state.users = thetas.clone();
        if problem.joint_residual(state) <= tol {
            break;
        }
        let mut accepted = false;
        for _ in 0..70 {
            let v: Vector = rho.iter().zip(&gx).map(|(r, g)| r - step * g).collect();
            let cand = prox_norm_power(&norm, power, step * lam, &w, &v)
                .expect("proximal strategy needs a supported prox");
            let (fc, gc) = profile_eval(problem, &cand, &mut thetas, inner_tol, Some(pin));
            let mut quad = fx;
            let mut moved = 0.0;
            for j in 0..problem.dim {
                let d = cand[j] - rho[j];
                quad += gx[j] * d + d * d / (2.0 * step);
                moved += d * d;
            }
            if fc <= quad + 8.0 * f64::EPSILON * (1.0 + fx.abs()) {
                rho = cand;
                fx = fc;
                gx = gc;
                accepted = moved > 0.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 1.3;
    }
    state.common = rho;
    state.users = thetas;
    used
}

/// Derivative interval of the one-dimensional profile objective at rho.
/// Free users with power 1 reduce to clamping the raw loss slope into
/// [-lam d, lam d]; other free users contribute the loss slope at their
/// inner minimizer; pinned couplings contribute intervals.
fn profile_slope_1d(problem: &Problem, rho: f64) -> (f64, f64) {
    let g0 = problem.global_grad(&[rho])[0];
    let mut lo = g0;
    let mut hi = g0;
    for user in &problem.users {
        let lam = user.spec.weight;
        match &user.pinned {
            Some(w) => {
                let shift = [w[0] - rho];
                let set = norm_power_subgradient(&user.spec.norm, user.spec.power, &shift)
                    .expect("validated norm");
                let (slo, shi) = set.free_coords[0];
                lo -= lam * shi;
                hi -= lam * slo;
            }
            None => {
                if user.rep.is_null() {
                    continue;
                }
                let d = user.spec.norm.diag[0];
                let slope = if user.spec.power == 1.0 {
                    user.rep.grad(&[rho])[0].clamp(-lam * d, lam * d)
                } else {
                    let outcome = inner_minimize(&user.rep, &user.spec, &[rho], &[rho], 1e-12);
                    user.rep.grad(&outcome.theta)[0]
                };
                lo += slope;
                hi += slope;
            }
        }
    }
    (lo, hi)
}

/// Sign bisection of the 1-d profile derivative. Returns the minimizing
/// rho and the number of derivative evaluations.
fn bisect_common(problem: &Problem, start: f64, _tol: f64) -> (f64, usize) {
    let mut used = 0usize;
    let mut a = start - 1.0;
    let mut b = start + 1.0;
    for _ in 0..240 {
        used += 1;
        let (lo, hi) = profile_slope_1d(problem, a);
        if lo <= 0.0 && hi >= 0.0 {
            return (a, used);
        }
        if lo > 0.0 {
            a -= b - a;
        } else {
            break;
        }
    }
    for _ in 0..240 {
        used += 1;
        let (lo, hi) = profile_slope_1d(problem, b);
        if lo <= 0.0 && hi >= 0.0 {
            return (b, used);
        }
        if hi < 0.0 {
            b += b - a;
        } else {
            break;
        }
    }
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        used += 1;
        let (lo, hi) = profile_slope_1d(problem, m);
        if lo <= 0.0 && hi >= 0.0 {
            return (m, used);
        }
        if hi < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if (b - a) <= 1e-14 * a.abs().max(b.abs()).max(1.0) {
            break;
        }
    }
    (0.5 * (a + b), used)
}

/// Minimizes a convex function of one variable given a subgradient-interval
/// oracle and a bracket. `f(x)` returns the interval `[lo, hi]` of
/// subgradients at x; the minimizer is where the interval contains zero.
/// Edges are honored: if the function already increases at the left edge
/// (or still decreases at the right edge), that edge is returned.
pub fn solve_1d(
    mut f: impl FnMut(f64) -> (f64, f64),
    bracket: (f64, f64),
) -> Result<f64, SolverError> {
    let (mut a, mut b) = bracket;
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(SolverError::BadBracket(format!(
            "need finite endpoints with left < right (got [{a}, {b}])"
        )));
    }
    let mut eval = |x: f64| -> Result<(f64, f64), SolverError> {
        let (lo, hi) = f(x);
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(SolverError::BadBracket(format!(
                "subgradient oracle returned an invalid interval [{lo}, {hi}] at x = {x}"
            )));
        }
        Ok((lo, hi))
    };
    let (lo_a, _) = eval(a)?;
    if lo_a >= 0.0 {
        return Ok(a);
    }
    let (_, hi_b) = eval(b)?;
    if hi_b <= 0.0 {
        return Ok(b);
    }
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let (lo, hi) = eval(m)?;
        if lo <= 0.0 && hi >= 0.0 {
            return Ok(m);
        }
        if hi < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if (b - a) <= 1e-13 * a.abs().max(b.abs()).max(1.0) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Decomposes a fully coordinate-wise problem into independent scalar
/// problems and solves them separately.
///
/// Requirements: every user couples through a weighted-l1 norm with power
/// 1; the common regularization has matching norm and power exponents so
/// it splits coordinate-wise; losses and regularizers are separable; and
/// every query touches at most one coordinate. Queries touching no
/// coordinate only add constants and are dropped from the subproblems.
pub fn solve_coordinatewise(
    users: &[UserSpec],
    global: &GlobalSpec,
    data: &[Dataset],
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    check_config(config)?;
    let problem = Problem::build(users, global, data, None, &config.init)?;
    let dim = problem.dim;
    for (n, spec) in users.iter().enumerate() {
        if spec.power != 1.0 {
            return Err(SolverError::NotSeparable(format!(
                "user {n} has coupling power {}, need exactly 1",
                spec.power
            )));
        }
        if spec.norm.q != QExponent::Finite(1.0) {
            return Err(SolverError::NotSeparable(format!(
                "user {n} couples through an l_{} norm, need l_1",
                spec.norm.q
            )));
        }
        if let crate::core::LossKind::Synthetic(s) = &spec.loss_kind {
            if matches!(s, crate::losses::SyntheticLoss::TiltedQuadratic { .. }) {
                return Err(SolverError::NotSeparable(format!(
                    "user {n} carries a cross-coordinate closed-form loss"
                )));
            }
        }
        for item in &data[n].items {
            if item.query.iter().filter(|&&x| x != 0.0).count() > 1 {
                return Err(SolverError::NotSeparable(format!(
                    "user {n} has a query touching more than one coordinate"
                )));
            }
        }
    }
    match global.norm.q {
        QExponent::Finite(q) if q == global.power => {}
        _ => {
            return Err(SolverError::NotSeparable(format!(
                "common regularization (l_{} norm, power {}) does not split by coordinate",
                global.norm.q, global.power
            )));
        }
    }

    let coord_config = |j: usize| -> SolverConfig {
        SolverConfig {
            tolerance: config.tolerance / (dim as f64).sqrt(),
            max_iterations: config.max_iterations,
            step_schedule: config.step_schedule,
            init: match &config.init {
                Init::Zeros => Init::Zeros,
                Init::State(s) => Init::State(ModelState {
                    common: vec![s.common[j]],
                    users: s.users.iter().map(|u| vec![u[j]]).collect(),
                }),
            },
        }
    };

    let mut state = ModelState::zeros(users.len(), dim);
    let mut iterations = 0;
    for j in 0..dim {
        let sub_users: Vec<UserSpec> = users
            .iter()
            .map(|spec| {
                let mut s = spec.clone();
                s.norm = crate::core::NormSpec::scaled(
                    QExponent::Finite(1.0),
                    vec![spec.norm.diag[j]],
                );
                if let crate::core::LossKind::Synthetic(crate::losses::SyntheticLoss::QuadraticPin {
                    center,
                    weight,
                }) = &spec.loss_kind
                {
                    s.loss_kind = crate::core::LossKind::Synthetic(
                        crate::losses::SyntheticLoss::QuadraticPin {
                            center: vec![center[j]],
                            weight: *weight,
                        },
                    );
                }
                s
            })
            .collect();
        let sub_global = GlobalSpec::new(
            global.weight,
            global.power,
            crate::core::NormSpec::scaled(QExponent::Finite(global.power), vec![global.norm.diag[j]]),
        );
        let sub_data: Vec<Dataset> = data
            .iter()
            .map(|d| {
                Dataset {
                    owner: d.owner,
                    items: d
                        .items
                        .iter()
                        .filter(|item| item.query[j] != 0.0)
                        .map(|item| crate::core::QueryAnswer {
                            query: vec![item.query[j]],
                            answer: item.answer,
                        })
                        .collect(),
                }
            })
            .collect();
        let report = solve(&sub_users, &sub_global, &sub_data, &coord_config(j))?;
        state.common[j] = report.state.common[0];
        for n in 0..users.len() {
            state.users[n][j] = report.state.users[n][0];
        }
        iterations = iterations.max(report.iterations);
    }
    let residual = problem.joint_residual(&state);
    let loss_value = problem.loss(&state);
    Ok(SolveReport {
        converged: residual <= config.tolerance,
        state,
        loss_value,
        residual,
        iterations,
    })
}
