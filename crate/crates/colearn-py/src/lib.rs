//! Python bindings: problem specification, dataset generation, the joint
//! solver, attack planners, and the experiment suite. Vectors cross the
//! boundary as plain lists of floats; errors surface as ValueError.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use colearn::datagen::{self, ByzantineMode, DataKind, QueryDistribution};
use colearn::experiments::{
    exp_byzantine_absolute, exp_byzantine_majority, exp_gradient_pac, exp_manipulability,
    exp_negative_example, exp_pac_curve, exp_strategyproof_1d,
};
use colearn::losses::SyntheticLoss;
use colearn::solver::{self, SolverConfig};
use colearn::{geometry, Dataset, GlobalSpec, ModelState, NormSpec, ParamReg, QExponent, UserSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn qexp(q: f64) -> QExponent {
    if q.is_infinite() {
        QExponent::Infinity
    } else {
        QExponent::Finite(q)
    }
}

fn data_kind(kind: &str) -> PyResult<DataKind> {
    match kind {
        "linear" => Ok(DataKind::Linear),
        "logistic" => Ok(DataKind::Logistic),
        other => Err(value_err(format!("unknown data kind {other:?}; use \"linear\" or \"logistic\""))),
    }
}

/// A diagonally scaled l_q norm. Use q=float("inf") for the max norm.
#[pyclass(name = "NormSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyNormSpec {
    inner: NormSpec,
}

#[pymethods]
impl PyNormSpec {
    #[staticmethod]
    fn l1(dim: usize) -> Self {
        PyNormSpec { inner: NormSpec::l1(dim) }
    }

    #[staticmethod]
    fn l2(dim: usize) -> Self {
        PyNormSpec { inner: NormSpec::l2(dim) }
    }

    #[staticmethod]
    fn linf(dim: usize) -> Self {
        PyNormSpec { inner: NormSpec::linf(dim) }
    }

    #[staticmethod]
    fn lq(q: f64, dim: usize) -> Self {
        PyNormSpec { inner: NormSpec::scaled(qexp(q), vec![1.0; dim]) }
    }

    #[staticmethod]
    fn scaled(q: f64, diag: Vec<f64>) -> Self {
        PyNormSpec { inner: NormSpec::scaled(qexp(q), diag) }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// One user's loss family, coupling weight, power, and norm.
#[pyclass(name = "UserSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyUserSpec {
    inner: UserSpec,
}

#[pymethods]
impl PyUserSpec {
    /// Squared-error data terms, optionally with a ridge penalty on the
    /// personal parameter.
    #[staticmethod]
    #[pyo3(signature = (weight, power, norm, ridge=0.0))]
    fn linear(weight: f64, power: f64, norm: PyNormSpec, ridge: f64) -> Self {
        let mut spec = UserSpec::linear(weight, power, norm.inner);
        if ridge != 0.0 {
            spec.param_reg = ParamReg::Ridge { weight: ridge };
        }
        PyUserSpec { inner: spec }
    }

    #[staticmethod]
    fn logistic(weight: f64, power: f64, norm: PyNormSpec) -> Self {
        PyUserSpec { inner: UserSpec::logistic(weight, power, norm.inner) }
    }

    /// Closed-form pull toward a point: loss weight/2 * ||theta - center||^2.
    #[staticmethod]
    fn quadratic_pin(weight: f64, power: f64, norm: PyNormSpec, center: Vec<f64>, pin_weight: f64) -> Self {
        PyUserSpec {
            inner: UserSpec::synthetic(
                weight,
                power,
                norm.inner,
                SyntheticLoss::QuadraticPin { center, weight: pin_weight },
            ),
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// The common regularizer: weight * norm(rho)^power.
#[pyclass(name = "GlobalSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyGlobalSpec {
    inner: GlobalSpec,
}

#[pymethods]
impl PyGlobalSpec {
    #[new]
    fn new(weight: f64, power: f64, norm: PyNormSpec) -> Self {
        PyGlobalSpec { inner: GlobalSpec::new(weight, power, norm.inner) }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Query and answer pairs owned by one user.
#[pyclass(name = "Dataset", frozen, from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn empty(owner: usize) -> Self {
        PyDataset { inner: Dataset::empty(owner) }
    }

    #[staticmethod]
    fn from_pairs(owner: usize, pairs: Vec<(Vec<f64>, f64)>) -> Self {
        PyDataset { inner: Dataset::from_pairs(owner, pairs) }
    }

    #[getter]
    fn owner(&self) -> usize {
        self.inner.owner
    }

    fn pairs(&self) -> Vec<(Vec<f64>, f64)> {
        self.inner.items.iter().map(|p| (p.query.clone(), p.answer)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.items.len()
    }
}

/// A seeded query model for dataset generation.
#[pyclass(name = "QueryDistribution", frozen, from_py_object)]
#[derive(Clone)]
struct PyQueryDistribution {
    inner: QueryDistribution,
}

#[pymethods]
impl PyQueryDistribution {
    #[staticmethod]
    fn gaussian_iid(dim: usize, variance: f64, seed: u64) -> Self {
        PyQueryDistribution { inner: QueryDistribution::gaussian_iid(dim, variance, seed) }
    }

    #[staticmethod]
    fn bounded_uniform(half_width: f64, seed: u64) -> Self {
        PyQueryDistribution { inner: QueryDistribution::bounded_uniform(half_width, seed) }
    }

    #[staticmethod]
    fn canonical_axes(magnitudes: Vec<f64>, seed: u64) -> Self {
        PyQueryDistribution { inner: QueryDistribution::canonical_axes(magnitudes, seed) }
    }
}

/// The solved state plus its certification.
#[pyclass(name = "SolveReport", frozen)]
struct PySolveReport {
    #[pyo3(get)]
    common: Vec<f64>,
    #[pyo3(get)]
    users: Vec<Vec<f64>>,
    #[pyo3(get)]
    loss_value: f64,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
}

impl From<solver::SolveReport> for PySolveReport {
    fn from(r: solver::SolveReport) -> Self {
        PySolveReport {
            common: r.state.common,
            users: r.state.users,
            loss_value: r.loss_value,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

/// A planned strategic report and its audit.
#[pyclass(name = "AttackPlan", frozen)]
struct PyAttackPlan {
    #[pyo3(get)]
    attacker: usize,
    #[pyo3(get)]
    strategic_vector: Vec<f64>,
    #[pyo3(get)]
    expected_common: Vec<f64>,
    #[pyo3(get)]
    achieved_gap: f64,
    #[pyo3(get)]
    dataset_size: usize,
}

impl From<colearn::adversary::AttackPlan> for PyAttackPlan {
    fn from(p: colearn::adversary::AttackPlan) -> Self {
        PyAttackPlan {
            attacker: p.attacker,
            strategic_vector: p.strategic_vector,
            expected_common: p.expected_common,
            achieved_gap: p.achieved_gap,
            dataset_size: p.dataset_size,
        }
    }
}

#[pyfunction]
fn norm_eval(norm: PyNormSpec, x: Vec<f64>) -> PyResult<f64> {
    geometry::norm_eval(&norm.inner, &x).map_err(value_err)
}

#[pyfunction]
fn dual_norm(norm: PyNormSpec, g: Vec<f64>) -> PyResult<f64> {
    geometry::dual_norm(&norm.inner, &g).map_err(value_err)
}

#[pyfunction]
fn equivalence_constants(norm: PyNormSpec, dim: usize) -> (f64, f64) {
    geometry::equivalence_constants(&norm.inner, dim)
}

/// Returns (subgradient, exact). The boolean is false when the point sits
/// on a max-norm tie and the returned vector is one member of the set.
#[pyfunction]
fn norm_power_subgradient(norm: PyNormSpec, power: f64, x: Vec<f64>) -> PyResult<(Vec<f64>, bool)> {
    geometry::norm_power_subgradient(&norm.inner, power, &x)
        .map(|s| (s.representative, s.exact))
        .map_err(value_err)
}

#[pyfunction]
fn counter_gradient(norm: PyNormSpec, power: f64, weight: f64, g: Vec<f64>) -> PyResult<Vec<f64>> {
    geometry::counter_gradient(&norm.inner, power, weight, &g).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (theta_true, n, dist, noise_sigma, seed, owner=0))]
fn gen_linear(
    theta_true: Vec<f64>,
    n: usize,
    dist: PyQueryDistribution,
    noise_sigma: f64,
    seed: u64,
    owner: usize,
) -> PyResult<PyDataset> {
    let mut d = datagen::gen_linear(&theta_true, n, &dist.inner, noise_sigma, seed).map_err(value_err)?;
    d.owner = owner;
    Ok(PyDataset { inner: d })
}

#[pyfunction]
#[pyo3(signature = (theta_true, n, dist, seed, owner=0))]
fn gen_logistic(
    theta_true: Vec<f64>,
    n: usize,
    dist: PyQueryDistribution,
    seed: u64,
    owner: usize,
) -> PyResult<PyDataset> {
    let mut d = datagen::gen_logistic(&theta_true, n, &dist.inner, seed).map_err(value_err)?;
    d.owner = owner;
    Ok(PyDataset { inner: d })
}

/// Fabricated data. `mode` is one of "huge_labels" (uses `magnitude`),
/// "random_noise", or "fixed_target" (uses `pretend_theta`).
#[pyfunction]
#[pyo3(signature = (mode, n, dim, kind, seed, magnitude=1e9, pretend_theta=None, owner=0))]
#[allow(clippy::too_many_arguments)]
fn gen_byzantine(
    mode: &str,
    n: usize,
    dim: usize,
    kind: &str,
    seed: u64,
    magnitude: f64,
    pretend_theta: Option<Vec<f64>>,
    owner: usize,
) -> PyResult<PyDataset> {
    let mode = match mode {
        "huge_labels" => ByzantineMode::HugeLabels { magnitude },
        "random_noise" => ByzantineMode::RandomNoise,
        "fixed_target" => ByzantineMode::FixedTarget {
            pretend_theta: pretend_theta
                .ok_or_else(|| value_err("fixed_target mode needs pretend_theta"))?,
        },
        other => {
            return Err(value_err(format!(
                "unknown mode {other:?}; use \"huge_labels\", \"random_noise\" or \"fixed_target\""
            )))
        }
    };
    let mut d = datagen::gen_byzantine(&mode, n, dim, data_kind(kind)?, seed).map_err(value_err)?;
    d.owner = owner;
    Ok(PyDataset { inner: d })
}

fn solver_config(tolerance: f64, max_iterations: usize) -> SolverConfig {
    SolverConfig { tolerance, max_iterations, ..SolverConfig::default() }
}

fn unwrap_specs(users: Vec<PyUserSpec>, datasets: Vec<PyDataset>) -> (Vec<UserSpec>, Vec<Dataset>) {
    (
        users.into_iter().map(|u| u.inner).collect(),
        datasets.into_iter().map(|d| d.inner).collect(),
    )
}

/// Minimizes the joint objective and certifies the result.
#[pyfunction]
#[pyo3(signature = (users, global_spec, datasets, tolerance=1e-7, max_iterations=200_000))]
fn solve(
    users: Vec<PyUserSpec>,
    global_spec: PyGlobalSpec,
    datasets: Vec<PyDataset>,
    tolerance: f64,
    max_iterations: usize,
) -> PyResult<PySolveReport> {
    let (users, data) = unwrap_specs(users, datasets);
    solver::solve(&users, &global_spec.inner, &data, &solver_config(tolerance, max_iterations))
        .map(PySolveReport::from)
        .map_err(value_err)
}

/// Same, but one user's vector is pinned at `pinned_value` and their
/// dataset is ignored.
#[pyfunction]
#[pyo3(signature = (users, global_spec, datasets, pin_user, pinned_value, tolerance=1e-7, max_iterations=200_000))]
fn modified_solve(
    users: Vec<PyUserSpec>,
    global_spec: PyGlobalSpec,
    datasets: Vec<PyDataset>,
    pin_user: usize,
    pinned_value: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> PyResult<PySolveReport> {
    let (users, data) = unwrap_specs(users, datasets);
    solver::modified_solve(
        &users,
        &global_spec.inner,
        &data,
        pin_user,
        &pinned_value,
        &solver_config(tolerance, max_iterations),
    )
    .map(PySolveReport::from)
    .map_err(value_err)
}

/// The joint objective at an explicit state.
#[pyfunction]
fn joint_loss(
    users: Vec<PyUserSpec>,
    global_spec: PyGlobalSpec,
    datasets: Vec<PyDataset>,
    common: Vec<f64>,
    user_vectors: Vec<Vec<f64>>,
) -> PyResult<f64> {
    let (users, data) = unwrap_specs(users, datasets);
    let state = ModelState { common, users: user_vectors };
    solver::joint_loss(&users, &global_spec.inner, &data, &state).map_err(value_err)
}

/// Plans a report that moves the common optimum to `chi`.
#[pyfunction]
#[pyo3(signature = (chi, users, global_spec, datasets, attacker, dataset_size, tolerance=1e-7))]
fn plan_common_manipulation(
    chi: Vec<f64>,
    users: Vec<PyUserSpec>,
    global_spec: PyGlobalSpec,
    datasets: Vec<PyDataset>,
    attacker: usize,
    dataset_size: usize,
    tolerance: f64,
) -> PyResult<PyAttackPlan> {
    let (users, data) = unwrap_specs(users, datasets);
    colearn::adversary::plan_common_manipulation(
        &chi,
        &users,
        &global_spec.inner,
        &data,
        attacker,
        dataset_size,
        &solver_config(tolerance, 200_000),
    )
    .map(PyAttackPlan::from)
    .map_err(value_err)
}

/// Plans a report that moves a victim's personal optimum to `chi`.
#[pyfunction]
#[pyo3(signature = (target_user, chi, users, global_spec, datasets, attacker, dataset_size, tolerance=1e-7))]
#[allow(clippy::too_many_arguments)]
fn plan_target_manipulation(
    target_user: usize,
    chi: Vec<f64>,
    users: Vec<PyUserSpec>,
    global_spec: PyGlobalSpec,
    datasets: Vec<PyDataset>,
    attacker: usize,
    dataset_size: usize,
    tolerance: f64,
) -> PyResult<PyAttackPlan> {
    let (users, data) = unwrap_specs(users, datasets);
    colearn::adversary::plan_target_manipulation(
        target_user,
        &chi,
        &users,
        &global_spec.inner,
        &data,
        attacker,
        dataset_size,
        &solver_config(tolerance, 200_000),
    )
    .map(PyAttackPlan::from)
    .map_err(value_err)
}

#[pyfunction]
fn list_experiments() -> Vec<&'static str> {
    vec![
        "byzantine_absolute",
        "byzantine_majority",
        "gradient_pac",
        "manipulability",
        "negative_example",
        "pac_curve",
        "strategyproof_1d",
    ]
}

/// Runs a catalog experiment. `params_json` holds parameter overrides as a
/// JSON object (unknown keys are rejected); the returned string is the
/// full report as JSON.
#[pyfunction]
#[pyo3(signature = (name, params_json="{}", jobs=1))]
fn run_experiment(name: &str, params_json: &str, jobs: usize) -> PyResult<String> {
    fn go<P, F>(params_json: &str, run: F, jobs: usize) -> PyResult<String>
    where
        P: serde::de::DeserializeOwned,
        F: FnOnce(&P, usize) -> Result<colearn::experiments::ExperimentReport, colearn::experiments::ExperimentError>,
    {
        let params: P = serde_json::from_str(params_json).map_err(value_err)?;
        let report = run(&params, jobs).map_err(value_err)?;
        serde_json::to_string(&report).map_err(value_err)
    }
    match name {
        "byzantine_absolute" => go(params_json, exp_byzantine_absolute, jobs),
        "byzantine_majority" => go(params_json, exp_byzantine_majority, jobs),
        "gradient_pac" => go(params_json, exp_gradient_pac, jobs),
        "manipulability" => go(params_json, exp_manipulability, jobs),
        "negative_example" => go(params_json, exp_negative_example, jobs),
        "pac_curve" => go(params_json, exp_pac_curve, jobs),
        "strategyproof_1d" => go(params_json, exp_strategyproof_1d, jobs),
        other => Err(value_err(format!(
            "unknown experiment {other:?}; see list_experiments()"
        ))),
    }
}

#[pymodule]
fn colearn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNormSpec>()?;
    m.add_class::<PyUserSpec>()?;
    m.add_class::<PyGlobalSpec>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyQueryDistribution>()?;
    m.add_class::<PySolveReport>()?;
    m.add_class::<PyAttackPlan>()?;
    m.add_function(wrap_pyfunction!(norm_eval, m)?)?;
    m.add_function(wrap_pyfunction!(dual_norm, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_constants, m)?)?;
    m.add_function(wrap_pyfunction!(norm_power_subgradient, m)?)?;
    m.add_function(wrap_pyfunction!(counter_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(gen_linear, m)?)?;
    m.add_function(wrap_pyfunction!(gen_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(gen_byzantine, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(modified_solve, m)?)?;
    m.add_function(wrap_pyfunction!(joint_loss, m)?)?;
    m.add_function(wrap_pyfunction!(plan_common_manipulation, m)?)?;
    m.add_function(wrap_pyfunction!(plan_target_manipulation, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
