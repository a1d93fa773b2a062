//! Domain types shared across the crate, plus configuration validation.
//!
//! All types are immutable value objects and safe to share across threads
//! by copy. Numeric fields are 64-bit floats throughout; the validation
//! entry point [`validate_config`] is the boundary that keeps NaN and
//! infinities out of the arithmetic paths.

use serde::{Deserialize, Serialize};

use crate::losses::SyntheticLoss;

/// Parameter and query vectors. Entries must stay finite; constructors and
/// [`validate_config`] enforce that at the crate boundary.
pub type Vector = Vec<f64>;

/// Exponent of an l_q norm, with infinity as a distinguished variant so
/// arithmetic paths never see a float infinity.
///
/// Serialized as a plain number, or the string `"inf"` for the max norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QExponentRepr", into = "QExponentRepr")]
pub enum QExponent {
    Finite(f64),
    Infinity,
}

impl QExponent {
    /// The exponent as a float, or None for the max norm.
    pub fn finite(self) -> Option<f64> {
        match self {
            QExponent::Finite(q) => Some(q),
            QExponent::Infinity => None,
        }
    }

    pub fn is_one(self) -> bool {
        matches!(self, QExponent::Finite(q) if q == 1.0)
    }

    /// Holder conjugate: 1 <-> inf, and q <-> q/(q-1) in between.
    pub fn conjugate(self) -> QExponent {
        match self {
            QExponent::Infinity => QExponent::Finite(1.0),
            QExponent::Finite(q) if q == 1.0 => QExponent::Infinity,
            QExponent::Finite(q) => QExponent::Finite(q / (q - 1.0)),
        }
    }
}

impl std::fmt::Display for QExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QExponent::Finite(q) => write!(f, "{q}"),
            QExponent::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QExponentRepr {
    Number(f64),
    Name(String),
}

impl TryFrom<QExponentRepr> for QExponent {
    type Error = String;

    fn try_from(repr: QExponentRepr) -> Result<Self, String> {
        match repr {
            QExponentRepr::Number(v) if v.is_finite() => Ok(QExponent::Finite(v)),
            QExponentRepr::Number(v) => Err(format!(
                "norm exponent must be a finite number or \"inf\", got {v}"
            )),
            QExponentRepr::Name(s) if s == "inf" => Ok(QExponent::Infinity),
            QExponentRepr::Name(s) => Err(format!(
                "unrecognized norm exponent {s:?}, expected a number or \"inf\""
            )),
        }
    }
}

impl From<QExponent> for QExponentRepr {
    fn from(q: QExponent) -> Self {
        match q {
            QExponent::Finite(v) => QExponentRepr::Number(v),
            QExponent::Infinity => QExponentRepr::Name("inf".to_string()),
        }
    }
}

/// A diagonally scaled l_q norm: N(x) = ||diag . x||_q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub q: QExponent,
    /// Diagonal of the scaling matrix; strictly positive entries.
    pub diag: Vector,
}

impl NormSpec {
    pub fn scaled(q: QExponent, diag: Vector) -> Self {
        NormSpec { q, diag }
    }

    /// Unscaled l_q norm in the given dimension.
    pub fn lq(q: f64, dim: usize) -> Self {
        NormSpec { q: QExponent::Finite(q), diag: vec![1.0; dim] }
    }

    pub fn l1(dim: usize) -> Self {
        Self::lq(1.0, dim)
    }

    pub fn l2(dim: usize) -> Self {
        Self::lq(2.0, dim)
    }

    pub fn linf(dim: usize) -> Self {
        NormSpec { q: QExponent::Infinity, diag: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_identity_diag(&self) -> bool {
        self.diag.iter().all(|&d| d == 1.0)
    }
}

/// Which independent loss a user's data feeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error, 0.5 (theta^T x - y)^2 per pair.
    LinearRegression,
    /// Negative log-likelihood of a sigmoid label model; answers in {-1, +1}.
    LogisticRegression,
    /// A closed-form convex loss injected directly, with no dataset.
    Synthetic(SyntheticLoss),
}

/// Optional per-user parameter regularization added to the independent loss.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamReg {
    /// No parameter regularization.
    #[default]
    Zero,
    /// weight * ||theta||_2^2 with weight > 0; strictly convex.
    Ridge { weight: f64 },
}

/// One user's loss family and coupling to the common vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    /// Coupling weight lambda_n > 0.
    pub weight: f64,
    /// Discrepancy power q_n >= 1 applied to the norm of theta_n - rho.
    pub power: f64,
    /// Discrepancy norm N_n.
    pub norm: NormSpec,
    pub loss_kind: LossKind,
    #[serde(default)]
    pub param_reg: ParamReg,
}

impl UserSpec {
    pub fn linear(weight: f64, power: f64, norm: NormSpec) -> Self {
        UserSpec { weight, power, norm, loss_kind: LossKind::LinearRegression, param_reg: ParamReg::Zero }
    }

    pub fn logistic(weight: f64, power: f64, norm: NormSpec) -> Self {
        UserSpec { weight, power, norm, loss_kind: LossKind::LogisticRegression, param_reg: ParamReg::Zero }
    }

    pub fn synthetic(weight: f64, power: f64, norm: NormSpec, loss: SyntheticLoss) -> Self {
        UserSpec { weight, power, norm, loss_kind: LossKind::Synthetic(loss), param_reg: ParamReg::Zero }
    }
}

/// Regularization of the common vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSpec {
    /// Weight lambda_0 > 0.
    pub weight: f64,
    /// Power q_0 > 1.
    pub power: f64,
    /// Norm N_0; its unit ball must be strictly convex (1 < q < inf).
    pub norm: NormSpec,
}

impl GlobalSpec {
    pub fn new(weight: f64, power: f64, norm: NormSpec) -> Self {
        GlobalSpec { weight, power, norm }
    }
}

/// One feature-label pair (x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryAnswer {
    pub query: Vector,
    pub answer: f64,
}

/// A user's dataset. May be empty (abstention, or a pinned user).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub items: Vec<QueryAnswer>,
    /// Index of the user this data belongs to.
    #[serde(default)]
    pub owner: usize,
}

impl Dataset {
    pub fn empty(owner: usize) -> Self {
        Dataset { items: Vec::new(), owner }
    }

    pub fn from_pairs(owner: usize, pairs: impl IntoIterator<Item = (Vector, f64)>) -> Self {
        Dataset {
            items: pairs
                .into_iter()
                .map(|(query, answer)| QueryAnswer { query, answer })
                .collect(),
            owner,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Common vector rho plus per-user vectors theta_n, all of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub common: Vector,
    pub users: Vec<Vector>,
}

impl ModelState {
    pub fn zeros(n_users: usize, dim: usize) -> Self {
        ModelState { common: vec![0.0; dim], users: vec![vec![0.0; dim]; n_users] }
    }

    pub fn dim(&self) -> usize {
        self.common.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}

/// Constants of the gradient lower bound
/// (theta - theta_true)^T grad L >= A n min(r, r^2) - B n^alpha r
/// with r the l2 distance to theta_true.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientPacConstants {
    /// A > 0, the data-strength constant.
    pub a: f64,
    /// B > 0, the noise-concentration constant.
    pub b: f64,
    /// alpha < 1, the sublinear noise exponent.
    pub alpha: f64,
}

/// One broken invariant found by [`validate_config`]. Violations are data,
/// not failures; a valid configuration yields an empty list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigViolation {
    /// Key path of the offending field, e.g. `users[2].weight`.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

fn check_norm(out: &mut Vec<ConfigViolation>, location: &str, norm: &NormSpec, dim: usize) {
    if let QExponent::Finite(q) = norm.q {
        if !q.is_finite() || q < 1.0 {
            out.push(ConfigViolation {
                location: format!("{location}.q"),
                message: format!("norm exponent must be at least 1 (got {q})"),
            });
        }
    }
    if norm.diag.len() != dim {
        out.push(ConfigViolation {
            location: format!("{location}.diag"),
            message: format!("{} scale entries for dimension {dim}", norm.diag.len()),
        });
    }
    for (j, &d) in norm.diag.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 {
            out.push(ConfigViolation {
                location: format!("{location}.diag[{j}]"),
                message: format!("scale entries must be strictly positive and finite (got {d})"),
            });
        }
    }
}

/// Checks every standing invariant of a problem instance: positive weights,
/// powers in range, a strictly convex common-norm unit ball, positive norm
/// scales, and dimension consistency. Returns one entry per breach.
pub fn validate_config(
    users: &[UserSpec],
    global: &GlobalSpec,
    dimension: usize,
) -> Vec<ConfigViolation> {
    let mut out = Vec::new();

    if dimension == 0 {
        out.push(ConfigViolation {
            location: "dimension".to_string(),
            message: "dimension must be at least 1".to_string(),
        });
    }

    if !global.weight.is_finite() || global.weight <= 0.0 {
        out.push(ConfigViolation {
            location: "global.weight".to_string(),
            message: format!("common regularization weight must be positive (got {})", global.weight),
        });
    }
    if !global.power.is_finite() || global.power <= 1.0 {
        out.push(ConfigViolation {
            location: "global.power".to_string(),
            message: format!(
                "common regularization power must exceed 1 so the penalty is strictly curved (got {})",
                global.power
            ),
        });
    }
    match global.norm.q {
        QExponent::Finite(q) if q == 1.0 => out.push(ConfigViolation {
            location: "global.norm.q".to_string(),
            message: "the common-norm unit ball must be strictly convex, which needs 1 < q < inf; \
                      the l1 ball has flat faces (got q = 1)"
                .to_string(),
        }),
        QExponent::Infinity => out.push(ConfigViolation {
            location: "global.norm.q".to_string(),
            message: "the common-norm unit ball must be strictly convex, which needs 1 < q < inf; \
                      the max-norm ball has flat faces (got q = inf)"
                .to_string(),
        }),
        _ => {}
    }
    check_norm(&mut out, "global.norm", &global.norm, dimension);

    for (n, user) in users.iter().enumerate() {
        let loc = |field: &str| format!("users[{n}].{field}");
        if !user.weight.is_finite() || user.weight <= 0.0 {
            out.push(ConfigViolation {
                location: loc("weight"),
                message: format!("coupling weight must be positive (got {})", user.weight),
            });
        }
        if !user.power.is_finite() || user.power < 1.0 {
            out.push(ConfigViolation {
                location: loc("power"),
                message: format!("discrepancy power must be at least 1 (got {})", user.power),
            });
        }
        check_norm(&mut out, &loc("norm"), &user.norm, dimension);
        if let ParamReg::Ridge { weight } = user.param_reg {
            if !weight.is_finite() || weight <= 0.0 {
                out.push(ConfigViolation {
                    location: loc("param_reg.weight"),
                    message: format!(
                        "ridge weight must be positive; use the zero regularizer to disable it (got {weight})"
                    ),
                });
            }
        }
        if let LossKind::Synthetic(loss) = &user.loss_kind {
            for issue in loss.invariant_issues(dimension) {
                out.push(ConfigViolation { location: loc("loss_kind"), message: issue });
            }
        }
    }

    out
}
