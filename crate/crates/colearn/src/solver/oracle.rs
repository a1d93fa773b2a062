//! Grid-refinement minimizer for low-dimensional convex functions.
//!
//! Deterministic and derivative-free; used where an answer must not depend
//! on the main solver's internals, e.g. reference aggregation points inside
//! experiments. Cost grows as points^dim per round, so it is only exposed
//! for small dimensions.

use crate::core::Vector;

/// Minimizes `f` over the box `[lo, hi]` by repeated grid scans, shrinking
/// the box around the incumbent each round. For a convex `f` the incumbent
/// is within one grid spacing of the true minimizer, so the shrink window
/// of two spacings per side never loses it.
///
/// # Panics
/// Panics if the box is empty, the bounds disagree in length, the dimension
/// exceeds 3, or `points_per_axis < 5`.
pub fn grid_minimize(
    f: impl Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    points_per_axis: usize,
    rounds: usize,
) -> Vector {
    assert_eq!(lo.len(), hi.len(), "box bounds must agree in length");
    assert!(!lo.is_empty() && lo.len() <= 3, "grid search supports dimensions 1 to 3");
    assert!(points_per_axis >= 5, "need at least 5 points per axis");
    assert!(lo.iter().zip(hi).all(|(a, b)| a < b && a.is_finite() && b.is_finite()), "invalid box");

    let dim = lo.len();
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut best = lo.clone();
    let mut best_val = f64::INFINITY;
    for _ in 0..rounds.max(1) {
        let spacing: Vector =
            (0..dim).map(|j| (hi[j] - lo[j]) / (points_per_axis - 1) as f64).collect();
        let mut idx = vec![0usize; dim];
        loop {
            let x: Vector = (0..dim).map(|j| lo[j] + idx[j] as f64 * spacing[j]).collect();
            let v = f(&x);
            if v < best_val {
                best_val = v;
                best = x;
            }
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < points_per_axis {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == dim {
                    break;
                }
            }
            if carry == dim {
                break;
            }
        }
        for j in 0..dim {
            lo[j] = best[j] - 2.0 * spacing[j];
            hi[j] = best[j] + 2.0 * spacing[j];
        }
    }
    best
}
