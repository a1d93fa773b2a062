//! Reproducibility and shape checks for the dataset generators.

use colearn::datagen::{
    gen_byzantine, gen_linear, gen_logistic, gen_strategic, ByzantineMode, DataGenError, DataKind,
    QueryDistribution,
};
use colearn::Dataset;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn identical_arguments_reproduce_datasets_bit_for_bit() {
    let dist = QueryDistribution::gaussian_iid(2, 1.5, 42);
    let a = gen_linear(&[1.0, -0.5], 50, &dist, 0.3, 7).unwrap();
    let b = gen_linear(&[1.0, -0.5], 50, &dist, 0.3, 7).unwrap();
    assert_eq!(a, b);

    let dist = QueryDistribution::bounded_uniform(1.0, 42);
    let a = gen_logistic(&[1.0, -0.5], 50, &dist, 7).unwrap();
    let b = gen_logistic(&[1.0, -0.5], 50, &dist, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn query_stream_is_keyed_by_the_distribution_seed_alone() {
    // Same distribution, different label seeds: identical queries, and the
    // noise must differ somewhere.
    let dist = QueryDistribution::gaussian_iid(2, 1.0, 11);
    let a = gen_linear(&[0.5, 0.5], 40, &dist, 0.5, 100).unwrap();
    let b = gen_linear(&[0.5, 0.5], 40, &dist, 0.5, 200).unwrap();
    for (pa, pb) in a.items.iter().zip(&b.items) {
        assert_eq!(pa.query, pb.query);
    }
    assert!(a.items.iter().zip(&b.items).any(|(pa, pb)| pa.answer != pb.answer));

    // Different distribution seeds: queries diverge.
    let other = QueryDistribution::gaussian_iid(2, 1.0, 12);
    let c = gen_linear(&[0.5, 0.5], 40, &other, 0.5, 100).unwrap();
    assert!(a.items.iter().zip(&c.items).any(|(pa, pc)| pa.query != pc.query));
}

#[test]
fn zero_noise_linear_labels_are_exact() {
    let theta = [2.0, -1.0, 0.25];
    let dist = QueryDistribution::bounded_uniform(2.0, 3);
    let data = gen_linear(&theta, 100, &dist, 0.0, 9).unwrap();
    for item in &data.items {
        assert_eq!(item.answer, dot(&item.query, &theta));
    }
}

#[test]
fn logistic_labels_are_signs_and_roughly_balanced_at_zero_margin() {
    let dist = QueryDistribution::bounded_uniform(1.0, 21);
    let data = gen_logistic(&[0.0, 0.0], 2000, &dist, 5).unwrap();
    let mut plus = 0usize;
    for item in &data.items {
        assert!(item.answer == 1.0 || item.answer == -1.0);
        if item.answer == 1.0 {
            plus += 1;
        }
    }
    let frac = plus as f64 / data.len() as f64;
    assert!((frac - 0.5).abs() <= 0.05, "sign fraction {frac} too far from a fair coin");
}

#[test]
fn logistic_rejects_unbounded_queries() {
    let dist = QueryDistribution::gaussian_iid(2, 1.0, 1);
    assert_eq!(
        gen_logistic(&[0.0, 0.0], 10, &dist, 1).unwrap_err(),
        DataGenError::UnboundedQueries
    );
}

#[test]
fn canonical_axes_touch_one_coordinate_per_query() {
    let dist = QueryDistribution::canonical_axes(vec![2.0, -3.0], 8);
    let data = gen_linear(&[1.0, 1.0], 200, &dist, 0.0, 4).unwrap();
    let mut seen = [false; 2];
    for item in &data.items {
        let nonzero: Vec<usize> =
            (0..2).filter(|&j| item.query[j] != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        let j = nonzero[0];
        assert_eq!(item.query[j], [2.0, -3.0][j]);
        seen[j] = true;
    }
    assert!(seen[0] && seen[1], "both axes should appear in 200 draws");
}

#[test]
fn bounded_uniform_queries_stay_in_the_box() {
    let dist = QueryDistribution::bounded_uniform(0.75, 5);
    let data = gen_linear(&[0.0, 0.0], 500, &dist, 0.0, 6).unwrap();
    for item in &data.items {
        assert!(item.query.iter().all(|v| v.abs() <= 0.75));
    }
}

#[test]
fn gaussian_queries_have_the_configured_second_moment() {
    let dist = QueryDistribution::gaussian_iid(2, 4.0, 17);
    let data = gen_linear(&[0.0, 0.0], 6000, &dist, 0.0, 2).unwrap();
    for j in 0..2 {
        let mean: f64 =
            data.items.iter().map(|it| it.query[j]).sum::<f64>() / data.len() as f64;
        let var: f64 =
            data.items.iter().map(|it| it.query[j] * it.query[j]).sum::<f64>() / data.len() as f64;
        assert!(mean.abs() <= 0.1, "mean {mean} too far from zero");
        assert!((var - 4.0).abs() <= 0.4, "second moment {var} too far from 4");
    }
}

#[test]
fn strategic_generation_dispatches_exactly() {
    let dist = QueryDistribution::bounded_uniform(1.0, 30);
    let lin = gen_strategic(&[0.7], 25, DataKind::Linear, &dist, 0.2, 3).unwrap();
    assert_eq!(lin, gen_linear(&[0.7], 25, &dist, 0.2, 3).unwrap());
    let log = gen_strategic(&[0.7], 25, DataKind::Logistic, &dist, 0.2, 3).unwrap();
    assert_eq!(log, gen_logistic(&[0.7], 25, &dist, 3).unwrap());
}

#[test]
fn huge_label_floods_respect_the_victim_loss_family() {
    let lin = gen_byzantine(&ByzantineMode::HugeLabels { magnitude: 1e9 }, 50, 2, DataKind::Linear, 4)
        .unwrap();
    for item in &lin.items {
        assert_eq!(item.answer.abs(), 1e9);
        assert!(item.query.iter().all(|v| v.abs() <= 1.0));
    }
    let log =
        gen_byzantine(&ByzantineMode::HugeLabels { magnitude: 1e9 }, 50, 2, DataKind::Logistic, 4)
            .unwrap();
    for item in &log.items {
        assert!(item.answer == 1.0 || item.answer == -1.0);
        assert!(item.query.iter().any(|v| v.abs() > 1.0), "magnitude should move to queries");
    }
}

#[test]
fn random_noise_keeps_logistic_answers_valid() {
    let data = gen_byzantine(&ByzantineMode::RandomNoise, 80, 3, DataKind::Logistic, 12).unwrap();
    assert!(data.items.iter().all(|it| it.answer == 1.0 || it.answer == -1.0));
}

#[test]
fn fixed_target_mode_is_an_honest_process_at_the_pretend_parameter() {
    let mode = ByzantineMode::FixedTarget { pretend_theta: vec![2.0, -1.0] };
    let data = gen_byzantine(&mode, 60, 2, DataKind::Linear, 77).unwrap();
    let dist = QueryDistribution::bounded_uniform(1.0, 77);
    let expect = gen_strategic(&[2.0, -1.0], 60, DataKind::Linear, &dist, 0.0, 77).unwrap();
    assert_eq!(data, expect);
}

#[test]
fn generator_inputs_are_validated() {
    let dist = QueryDistribution::gaussian_iid(2, 1.0, 1);
    assert!(matches!(
        gen_linear(&[1.0], 5, &dist, 0.1, 1).unwrap_err(),
        DataGenError::DimensionMismatch { .. }
    ));
    assert!(matches!(
        gen_linear(&[1.0, 1.0], 5, &dist, -0.1, 1).unwrap_err(),
        DataGenError::InvalidInput(_)
    ));
    assert!(matches!(
        gen_linear(&[], 5, &dist, 0.1, 1).unwrap_err(),
        DataGenError::InvalidInput(_)
    ));
    assert!(matches!(
        gen_byzantine(&ByzantineMode::HugeLabels { magnitude: 0.0 }, 5, 2, DataKind::Linear, 1)
            .unwrap_err(),
        DataGenError::InvalidInput(_)
    ));
    assert!(matches!(
        gen_byzantine(&ByzantineMode::RandomNoise, 5, 0, DataKind::Linear, 1).unwrap_err(),
        DataGenError::InvalidInput(_)
    ));
    assert!(matches!(
        gen_byzantine(
            &ByzantineMode::FixedTarget { pretend_theta: vec![1.0] },
            5,
            2,
            DataKind::Linear,
            1
        )
        .unwrap_err(),
        DataGenError::DimensionMismatch { .. }
    ));
}

#[test]
fn ownership_defaults_to_zero_and_is_caller_assigned() {
    let dist = QueryDistribution::bounded_uniform(1.0, 2);
    let mut data = gen_linear(&[1.0], 5, &dist, 0.0, 2).unwrap();
    assert_eq!(data.owner, 0);
    data.owner = 3;
    assert_eq!(data.owner, 3);
    assert_eq!(Dataset::empty(9).owner, 9);
}
