//! Norm, subgradient and counter-gradient checks against hand values and
//! the subdifferential identities of homogeneous convex functions.

use colearn::geometry::{
    counter_gradient, dual_norm, equivalence_constants, norm_eval, norm_power_subgradient,
    GeometryError,
};
use colearn::{NormSpec, QExponent};
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn unif(r: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    let u = (r.next_u64() >> 11) as f64 / 9007199254740992.0;
    lo + (hi - lo) * u
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A point with every coordinate bounded away from zero, so every tested
/// norm power is differentiable there (max-norm peaks are also untied with
/// probability one under continuous sampling).
fn smooth_point(r: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let mag = unif(r, 0.1, 2.0);
            if r.next_u64() & 1 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

fn central_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn norm_grid() -> Vec<NormSpec> {
    vec![
        NormSpec::l1(3),
        NormSpec::lq(1.5, 3),
        NormSpec::l2(3),
        NormSpec::lq(3.0, 3),
        NormSpec::linf(3),
        NormSpec::scaled(QExponent::Finite(2.0), vec![0.5, 1.0, 2.5]),
        NormSpec::scaled(QExponent::Finite(1.0), vec![2.0, 0.25, 1.0]),
    ]
}

#[test]
fn norm_values_match_hand_computations() {
    let x = [3.0, -4.0];
    assert_eq!(norm_eval(&NormSpec::l1(2), &x).unwrap(), 7.0);
    assert_eq!(norm_eval(&NormSpec::l2(2), &x).unwrap(), 5.0);
    assert_eq!(norm_eval(&NormSpec::linf(2), &x).unwrap(), 4.0);

    // (1 + 1)^(2/3) and (1 + 8 + 8)^(1/3).
    let v = norm_eval(&NormSpec::lq(1.5, 2), &[1.0, -1.0]).unwrap();
    assert!((v - 2.0_f64.powf(2.0 / 3.0)).abs() <= 1e-14);
    let v = norm_eval(&NormSpec::lq(3.0, 3), &[1.0, 2.0, -2.0]).unwrap();
    assert!((v - 17.0_f64.powf(1.0 / 3.0)).abs() <= 1e-14);

    // Diagonal scaling applies before the exponent.
    let spec = NormSpec::scaled(QExponent::Finite(2.0), vec![2.0, 0.5]);
    let v = norm_eval(&spec, &[1.0, 4.0]).unwrap();
    assert!((v - 8.0_f64.sqrt()).abs() <= 1e-14);

    assert_eq!(norm_eval(&NormSpec::l2(3), &[0.0, 0.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn norm_is_homogeneous_and_overflow_safe() {
    let mut r = rng(11);
    for spec in norm_grid() {
        for _ in 0..20 {
            let x = smooth_point(&mut r, 3);
            let t = unif(&mut r, 0.1, 4.0);
            let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
            let lhs = norm_eval(&spec, &scaled).unwrap();
            let rhs = t * norm_eval(&spec, &x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
    // Entries near the overflow edge must not round-trip through x^q.
    let v = norm_eval(&NormSpec::lq(3.0, 2), &[1e300, -1e300]).unwrap();
    assert!(v.is_finite());
    assert!((v / 1e300 - 2.0_f64.powf(1.0 / 3.0)).abs() <= 1e-12);
}

#[test]
fn dual_norm_matches_holder_conjugates() {
    let g = [3.0, -4.0];
    assert_eq!(dual_norm(&NormSpec::l1(2), &g).unwrap(), 4.0);
    assert_eq!(dual_norm(&NormSpec::l2(2), &g).unwrap(), 5.0);
    assert_eq!(dual_norm(&NormSpec::linf(2), &g).unwrap(), 7.0);

    // Conjugate of 1.5 is 3.
    let v = dual_norm(&NormSpec::lq(1.5, 2), &[1.0, 1.0]).unwrap();
    assert!((v - 2.0_f64.powf(1.0 / 3.0)).abs() <= 1e-14);

    // Scaling inverts: ||D^-1 g||_2 for diag (2, 0.5) at (2, 1) is sqrt(5).
    let spec = NormSpec::scaled(QExponent::Finite(2.0), vec![2.0, 0.5]);
    let v = dual_norm(&spec, &[2.0, 1.0]).unwrap();
    assert!((v - 5.0_f64.sqrt()).abs() <= 1e-14);
}

#[test]
fn holder_inequality_holds() {
    let mut r = rng(13);
    for spec in norm_grid() {
        for _ in 0..50 {
            let x = smooth_point(&mut r, 3);
            let g = smooth_point(&mut r, 3);
            let bound = dual_norm(&spec, &g).unwrap() * norm_eval(&spec, &x).unwrap();
            assert!(dot(&g, &x).abs() <= bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn equivalence_constants_match_hand_values_and_bound_the_norm() {
    assert_eq!(equivalence_constants(&NormSpec::l2(3), 3), (1.0, 1.0));
    assert_eq!(equivalence_constants(&NormSpec::l1(4), 4), (1.0, 2.0));
    assert_eq!(equivalence_constants(&NormSpec::linf(4), 4), (0.5, 1.0));
    let spec = NormSpec::scaled(QExponent::Finite(2.0), vec![0.5, 3.0]);
    assert_eq!(equivalence_constants(&spec, 2), (0.5, 3.0));

    let mut r = rng(17);
    for spec in norm_grid() {
        let (a, b) = equivalence_constants(&spec, 3);
        for _ in 0..40 {
            let x = smooth_point(&mut r, 3);
            let n = norm_eval(&spec, &x).unwrap();
            let e = l2(&x);
            assert!(a * e <= n * (1.0 + 1e-12), "lower bound failed for {spec:?}");
            assert!(n <= b * e * (1.0 + 1e-12), "upper bound failed for {spec:?}");
        }
    }
}

#[test]
fn subgradients_match_finite_differences_at_smooth_points() {
    let mut r = rng(19);
    for spec in norm_grid() {
        for &p in &[1.0, 2.0, 3.0] {
            for _ in 0..25 {
                let x = smooth_point(&mut r, 3);
                let set = norm_power_subgradient(&spec, p, &x).unwrap();
                assert!(set.is_singleton(), "smooth point reported a kink for {spec:?}");
                let f = |y: &[f64]| norm_eval(&spec, y).unwrap().powf(p);
                let fd = central_fd(f, &x, 1e-6);
                let diff: Vec<f64> =
                    set.representative.iter().zip(&fd).map(|(a, b)| a - b).collect();
                let rel = l2(&diff) / l2(&fd).max(1e-9);
                assert!(rel <= 1e-5, "rel err {rel} for {spec:?} p={p} at {x:?}");
            }
        }
    }
}

/// Every subgradient g of N^p at x obeys two exact identities: <g, x> equals
/// p N(x)^p (degree-p homogeneity along the ray through x) and the dual norm
/// of g equals p N(x)^(p-1) when x is nonzero. Checking both pins g up to
/// the kink ambiguity without any reference to the implementation.
#[test]
fn subgradients_satisfy_homogeneity_and_dual_norm_identities() {
    let mut r = rng(23);
    for spec in norm_grid() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            for _ in 0..25 {
                let x = smooth_point(&mut r, 3);
                let n = norm_eval(&spec, &x).unwrap();
                let set = norm_power_subgradient(&spec, p, &x).unwrap();
                let g = &set.representative;
                let pairing = dot(g, &x);
                assert!((pairing - p * n.powf(p)).abs() <= 1e-9 * (1.0 + n.powf(p)));
                let dual = dual_norm(&spec, g).unwrap();
                assert!((dual - p * n.powf(p - 1.0)).abs() <= 1e-9 * (1.0 + dual));
            }
        }
    }
}

#[test]
fn subgradients_support_the_convexity_inequality() {
    let mut r = rng(29);
    for spec in norm_grid() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            for _ in 0..15 {
                // Mix smooth points and kink points (zeroed coordinates).
                let mut x = smooth_point(&mut r, 3);
                if r.next_u64() & 3 == 0 {
                    x[(r.next_u64() % 3) as usize] = 0.0;
                }
                let set = norm_power_subgradient(&spec, p, &x).unwrap();
                let g = &set.representative;
                let fx = norm_eval(&spec, &x).unwrap().powf(p);
                for _ in 0..10 {
                    let y = smooth_point(&mut r, 3);
                    let fy = norm_eval(&spec, &y).unwrap().powf(p);
                    let linear: f64 =
                        fx + g.iter().zip(y.iter().zip(&x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum::<f64>();
                    assert!(
                        fy >= linear - 1e-9 * (1.0 + fy.abs()),
                        "convexity violated for {spec:?} p={p}"
                    );
                }
            }
        }
    }
}

#[test]
fn l1_kinks_report_exact_sign_boxes() {
    // d/dx ||x||_1^2 at (0, 2): coordinate 0 spans the full sign interval
    // scaled by 2 N = 4, coordinate 1 is pinned at 4.
    let set = norm_power_subgradient(&NormSpec::l1(2), 2.0, &[0.0, 2.0]).unwrap();
    assert!(set.exact);
    assert_eq!(set.representative, vec![0.0, 4.0]);
    assert_eq!(set.free_coords, vec![(-4.0, 4.0), (4.0, 4.0)]);

    // Scaled variant: diag (3, 1), same point. N = 2, outer = 2 N = 4,
    // coordinate 0 interval is +-(outer * 3).
    let spec = NormSpec::scaled(QExponent::Finite(1.0), vec![3.0, 1.0]);
    let set = norm_power_subgradient(&spec, 2.0, &[0.0, 2.0]).unwrap();
    assert_eq!(set.free_coords[0], (-12.0, 12.0));
}

#[test]
fn origin_subgradient_is_zero_for_powers_above_one_and_a_ball_hull_at_one() {
    let zero = [0.0, 0.0];
    for spec in [NormSpec::l1(2), NormSpec::l2(2), NormSpec::linf(2)] {
        let set = norm_power_subgradient(&spec, 2.0, &zero).unwrap();
        assert_eq!(set.representative, vec![0.0, 0.0]);
        assert!(set.is_singleton() && set.exact);
    }
    let spec = NormSpec::scaled(QExponent::Finite(2.0), vec![0.5, 2.0]);
    let set = norm_power_subgradient(&spec, 1.0, &zero).unwrap();
    assert_eq!(set.free_coords, vec![(-0.5, 0.5), (-2.0, 2.0)]);
    assert!(!set.exact);
    let set = norm_power_subgradient(&NormSpec::l1(2), 1.0, &zero).unwrap();
    assert!(set.exact, "the l1 dual ball is itself a box");
}

#[test]
fn max_norm_tie_splits_mass_and_flags_inexact() {
    let set = norm_power_subgradient(&NormSpec::linf(2), 1.0, &[1.0, -1.0]).unwrap();
    assert!(!set.exact);
    assert_eq!(set.representative, vec![0.5, -0.5]);
    assert_eq!(set.free_coords, vec![(0.0, 1.0), (-1.0, 0.0)]);
    // The representative is still a genuine subgradient: dual norm one and
    // tight pairing.
    assert!((dual_norm(&NormSpec::linf(2), &set.representative).unwrap() - 1.0).abs() <= 1e-12);
    assert!((dot(&set.representative, &[1.0, -1.0]) - 1.0).abs() <= 1e-12);
}

#[test]
fn counter_gradient_inverts_the_subgradient_map() {
    let mut r = rng(31);
    let qs = [
        QExponent::Finite(1.0),
        QExponent::Finite(1.5),
        QExponent::Finite(2.0),
        QExponent::Finite(3.0),
        QExponent::Infinity,
    ];
    for &q in &qs {
        for &p in &[1.5, 2.0, 3.0] {
            for dim in 1..=3usize {
                let spec = NormSpec::scaled(q, vec![1.0; dim]);
                for &weight in &[0.5, 1.0, 2.3] {
                    let g = smooth_point(&mut r, dim);
                    let x = counter_gradient(&spec, p, weight, &g).unwrap();
                    let n = norm_eval(&spec, &x).unwrap();
                    assert!(n > 0.0, "nonzero g must map to nonzero x");

                    // Membership identities for g in weight * d(N^p)(x).
                    let pairing = dot(&g, &x);
                    let target = weight * p * n.powf(p);
                    assert!(
                        (pairing - target).abs() <= 1e-8 * (1.0 + target.abs()),
                        "pairing off for q={q:?} p={p}"
                    );
                    let dual = dual_norm(&spec, &g).unwrap();
                    let expect = weight * p * n.powf(p - 1.0);
                    assert!(
                        (dual - expect).abs() <= 1e-8 * (1.0 + expect),
                        "dual norm off for q={q:?} p={p}"
                    );

                    // Convexity inequality around x in random directions.
                    let fx = weight * n.powf(p);
                    for _ in 0..8 {
                        let y = smooth_point(&mut r, dim);
                        let fy = weight * norm_eval(&spec, &y).unwrap().powf(p);
                        let linear: f64 = fx
                            + g.iter()
                                .zip(y.iter().zip(&x))
                                .map(|(gi, (yi, xi))| gi * (yi - xi))
                                .sum::<f64>();
                        assert!(fy >= linear - 1e-8 * (1.0 + fy.abs()));
                    }

                    // Differentiable cases close the loop exactly.
                    if q != QExponent::Finite(1.0) && q != QExponent::Infinity {
                        let set = norm_power_subgradient(&spec, p, &x).unwrap();
                        let back: Vec<f64> =
                            set.representative.iter().map(|v| weight * v).collect();
                        let diff: Vec<f64> = back.iter().zip(&g).map(|(a, b)| a - b).collect();
                        assert!(l2(&diff) <= 1e-8 * (1.0 + l2(&g)));
                    }
                }
            }
        }
    }
}

#[test]
fn counter_gradient_is_odd_and_fixes_zero() {
    let mut r = rng(37);
    let spec = NormSpec::lq(3.0, 2);
    for _ in 0..10 {
        let g = smooth_point(&mut r, 2);
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let x = counter_gradient(&spec, 2.0, 1.0, &g).unwrap();
        let y = counter_gradient(&spec, 2.0, 1.0, &neg).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
    let zero = counter_gradient(&spec, 2.0, 1.0, &[0.0, 0.0]).unwrap();
    assert_eq!(zero, vec![0.0, 0.0]);
}

#[test]
fn dimension_and_domain_errors_are_reported() {
    let spec = NormSpec::l2(2);
    assert_eq!(
        norm_eval(&spec, &[1.0]).unwrap_err(),
        GeometryError::DimensionMismatch { expected: 2, got: 1 }
    );
    assert_eq!(
        counter_gradient(&spec, 1.0, 1.0, &[1.0, 0.0]).unwrap_err(),
        GeometryError::PowerNotAboveOne(1.0)
    );
    let scaled = NormSpec::scaled(QExponent::Finite(2.0), vec![2.0, 1.0]);
    assert_eq!(
        counter_gradient(&scaled, 2.0, 1.0, &[1.0, 0.0]).unwrap_err(),
        GeometryError::ScaledNormUnsupported
    );
}
