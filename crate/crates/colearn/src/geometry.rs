//! Norm evaluation, subgradients of norm powers, and the counter-gradient
//! construction that powers the attack planners.
//!
//! Everything here works on a diagonally scaled l_q norm N(x) = ||D x||_q
//! and its powers N(x)^p. Subdifferentials of N^p are exact per-coordinate
//! boxes when q = 1; for other exponents they are singletons away from the
//! kinks, and the kink cases are reported as documented approximations (see
//! [`SubgradientSet::exact`]).

use thiserror::Error;

use crate::core::{NormSpec, QExponent, Vector};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: norm is over {expected} coordinates, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("counter-gradient construction needs power > 1 (got {0})")]
    PowerNotAboveOne(f64),
    #[error("counter-gradient construction supports the unscaled norm only")]
    ScaledNormUnsupported,
}

fn check_dim(spec: &NormSpec, x: &[f64]) -> Result<(), GeometryError> {
    if spec.dim() != x.len() {
        return Err(GeometryError::DimensionMismatch { expected: spec.dim(), got: x.len() });
    }
    Ok(())
}

/// N(x) = ||diag . x||_q. Zero iff x = 0; absolutely homogeneous.
pub fn norm_eval(spec: &NormSpec, x: &[f64]) -> Result<f64, GeometryError> {
    check_dim(spec, x)?;
    let scaled = || spec.diag.iter().zip(x).map(|(&d, &v)| (d * v).abs());
    let value = match spec.q {
        QExponent::Infinity => scaled().fold(0.0_f64, f64::max),
        QExponent::Finite(q) if q == 1.0 => scaled().sum(),
        QExponent::Finite(q) => {
            // Factor out the max entry so large inputs cannot overflow u^q.
            let peak = scaled().fold(0.0_f64, f64::max);
            if peak == 0.0 {
                0.0
            } else {
                peak * scaled().map(|u| (u / peak).powf(q)).sum::<f64>().powf(1.0 / q)
            }
        }
    };
    Ok(value)
}

/// The dual norm N*(g) = ||D^-1 g||_{q'} with q' the Holder conjugate.
/// The subdifferential of N at 0 is exactly the dual unit ball.
pub fn dual_norm(spec: &NormSpec, g: &[f64]) -> Result<f64, GeometryError> {
    check_dim(spec, g)?;
    let unscaled: Vector = spec.diag.iter().zip(g).map(|(&d, &v)| v / d).collect();
    norm_eval(&NormSpec::scaled(spec.q.conjugate(), vec![1.0; g.len()]), &unscaled)
}

/// Tightest constants a, b with a ||x||_2 <= N(x) <= b ||x||_2 over the
/// given dimension, from the min and max diagonal scales and the standard
/// l_q vs l_2 comparison factor d^(1/q - 1/2).
pub fn equivalence_constants(spec: &NormSpec, dim: usize) -> (f64, f64) {
    let d_min = spec.diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_max = spec.diag.iter().cloned().fold(0.0_f64, f64::max);
    let inv_q = match spec.q {
        QExponent::Finite(q) => 1.0 / q,
        QExponent::Infinity => 0.0,
    };
    let factor = (dim as f64).powf(inv_q - 0.5);
    (d_min * factor.min(1.0), d_max * factor.max(1.0))
}

/// The subdifferential of N(.)^p at a point, reported coordinate-wise.
///
/// `representative` is always a valid subgradient, chosen with minimum
/// magnitude per free coordinate (and equal mass over tied coordinates for
/// the max norm). `free_coords` gives the per-coordinate interval of valid
/// values; it is degenerate wherever the function is differentiable.
///
/// `exact` is true when the intervals describe the subdifferential exactly
/// (every selection from the boxes is a valid subgradient). That holds for
/// q = 1 at any point and for every differentiable case. It fails in two
/// corners where a box cannot represent the true set and the intervals are
/// a per-coordinate hull instead: the max norm at a tie, and p = 1 at
/// x = 0 for 1 < q <= inf (where the set is the dual unit ball).
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSet {
    pub representative: Vector,
    pub free_coords: Vec<(f64, f64)>,
    pub exact: bool,
}

impl SubgradientSet {
    fn pointwise(g: Vector) -> Self {
        let free_coords = g.iter().map(|&v| (v, v)).collect();
        SubgradientSet { representative: g, free_coords, exact: true }
    }

    /// True when every coordinate interval is a single point.
    pub fn is_singleton(&self) -> bool {
        self.free_coords.iter().all(|&(lo, hi)| lo == hi)
    }

    /// Clamps a candidate vector into the per-coordinate intervals.
    pub fn clamp(&self, v: &[f64]) -> Vector {
        self.free_coords
            .iter()
            .zip(v)
            .map(|(&(lo, hi), &c)| c.clamp(lo, hi))
            .collect()
    }
}

/// Subdifferential of x -> N(x)^p for p >= 1.
///
/// Away from kinks this is the gradient
/// p sgn(u_j) |u_j|^(q-1) ||u||_q^(p-q) d_j with u = D x. At kinks the
/// reported set follows the conventions documented on [`SubgradientSet`].
pub fn norm_power_subgradient(
    spec: &NormSpec,
    power: f64,
    x: &[f64],
) -> Result<SubgradientSet, GeometryError> {
    check_dim(spec, x)?;
    let d = x.len();
    let n = norm_eval(spec, x)?;

    if n == 0.0 {
        // At the origin: N^p has gradient zero for p > 1; for p = 1 the
        // set is the dual unit ball, reported as its coordinate hull
        // [-d_j, d_j] (exact only for q = 1, where the ball is a box).
        if power > 1.0 {
            return Ok(SubgradientSet::pointwise(vec![0.0; d]));
        }
        let free_coords: Vec<(f64, f64)> = spec.diag.iter().map(|&dj| (-dj, dj)).collect();
        return Ok(SubgradientSet {
            representative: vec![0.0; d],
            free_coords,
            exact: spec.q.is_one(),
        });
    }

    let outer = power * n.powf(power - 1.0);
    match spec.q {
        QExponent::Finite(q) if q == 1.0 => {
            // d/dx_j ||Dx||_1^p = p N^(p-1) d_j sgn(x_j), with the full
            // sign interval on zero coordinates. The box is exact.
            let mut rep = Vec::with_capacity(d);
            let mut free = Vec::with_capacity(d);
            for (&dj, &xj) in spec.diag.iter().zip(x) {
                if xj == 0.0 {
                    rep.push(0.0);
                    free.push((-outer * dj, outer * dj));
                } else {
                    let g = outer * dj * xj.signum();
                    rep.push(g);
                    free.push((g, g));
                }
            }
            Ok(SubgradientSet { representative: rep, free_coords: free, exact: true })
        }
        QExponent::Finite(q) => {
            // Differentiable for q > 1 away from the origin:
            // outer * d_j sgn(u_j) |u_j|^(q-1) N^(1-q), grouped as
            // (|u|/N)^(q-1) to avoid overflow on large inputs.
            let g: Vector = spec
                .diag
                .iter()
                .zip(x)
                .map(|(&dj, &xj)| {
                    let u = dj * xj;
                    if u == 0.0 {
                        0.0
                    } else {
                        outer * dj * u.signum() * (u.abs() / n).powf(q - 1.0)
                    }
                })
                .collect();
            Ok(SubgradientSet::pointwise(g))
        }
        QExponent::Infinity => {
            let peak = n;
            let tied: Vec<usize> = spec
                .diag
                .iter()
                .zip(x)
                .enumerate()
                .filter(|(_, (&dj, &xj))| (dj * xj).abs() == peak)
                .map(|(j, _)| j)
                .collect();
            if tied.len() == 1 {
                let j = tied[0];
                let mut g = vec![0.0; d];
                g[j] = outer * spec.diag[j] * x[j].signum();
                return Ok(SubgradientSet::pointwise(g));
            }
            // Tie: the set is outer * conv{ d_j sgn(x_j) e_j } over tied
            // coordinates, the image of a simplex. Representative puts
            // equal mass on each tied coordinate; intervals are the
            // per-coordinate hull, which over-covers joint selections.
            let mass = 1.0 / tied.len() as f64;
            let mut rep = vec![0.0; d];
            let mut free: Vec<(f64, f64)> = vec![(0.0, 0.0); d];
            for &j in &tied {
                let v = outer * spec.diag[j] * x[j].signum();
                rep[j] = v * mass;
                free[j] = (v.min(0.0), v.max(0.0));
            }
            Ok(SubgradientSet { representative: rep, free_coords: free, exact: false })
        }
    }
}

/// Given g, builds x with g in the subdifferential of lambda ||x||_q^p.
///
/// This inverts the subgradient map of a norm power, the key step when an
/// attacker must cancel a known gradient with its own coupling term. The
/// construction needs p > 1 and the unscaled norm. It is odd in g, and
/// g = 0 maps to x = 0.
///
/// Sign convention: the returned x satisfies the membership with +g (not
/// -g); tests exercise both orientations via counter_gradient(-g) = -x.
pub fn counter_gradient(
    spec: &NormSpec,
    power: f64,
    weight: f64,
    g: &[f64],
) -> Result<Vector, GeometryError> {
    check_dim(spec, g)?;
    if !spec.is_identity_diag() {
        return Err(GeometryError::ScaledNormUnsupported);
    }
    if power <= 1.0 {
        return Err(GeometryError::PowerNotAboveOne(power));
    }
    let p = power;
    if g.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; g.len()]);
    }

    match spec.q {
        QExponent::Finite(q) if q == 1.0 => {
            // Largest-magnitude coordinate j*: x = alpha e_j* with
            // alpha = sgn(g_j*) (|g_j*| / (lambda p))^(1/(p-1)). Every other
            // coordinate's requirement is then inside the sign interval.
            let (j_star, g_star) = g
                .iter()
                .copied()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.abs().total_cmp(&b.abs()))
                .expect("nonempty vector");
            let alpha = g_star.signum() * (g_star.abs() / (weight * p)).powf(1.0 / (p - 1.0));
            let mut x = vec![0.0; g.len()];
            x[j_star] = alpha;
            Ok(x)
        }
        QExponent::Finite(q) => {
            // z_j = sgn(g_j) (|g_j| / (lambda p))^(1/(q-1)), then scale by
            // alpha = ||z||_q^((q-p)/(p-1)) so the norm-power chain factor
            // matches: the gradient of lambda ||alpha z||_q^p at alpha z
            // is exactly g.
            let z: Vector = g
                .iter()
                .map(|&gj| {
                    if gj == 0.0 {
                        0.0
                    } else {
                        gj.signum() * (gj.abs() / (weight * p)).powf(1.0 / (q - 1.0))
                    }
                })
                .collect();
            let zn = norm_eval(&NormSpec::lq(q, z.len()), &z)?;
            let alpha = zn.powf((q - p) / (p - 1.0));
            Ok(z.into_iter().map(|v| alpha * v).collect())
        }
        QExponent::Infinity => {
            // x = alpha sgn(g) with alpha = (||g||_1 / (lambda p))^(1/(p-1)):
            // splitting mass |g_j| / ||g||_1 over the tied coordinates
            // reproduces g inside the max-norm subdifferential.
            let l1: f64 = g.iter().map(|v| v.abs()).sum();
            let alpha = (l1 / (weight * p)).powf(1.0 / (p - 1.0));
            Ok(g.iter().map(|&gj| alpha * gj.signum()).collect())
        }
    }
}
