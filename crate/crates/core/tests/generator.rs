use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sce_core::gen::{
    apply_rule, full_grid, generate, load_test, render, sample_test, write_test, Feature, FeatureSet, FeatureValue,
    RenderConfig, Rule, Shape, TestSpec,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn exactly_one_choice_continues_the_rule() {
    let grid = full_grid();
    for seed in 0..1000u64 {
        let spec = grid[seed as usize % grid.len()].clone().with_seed(seed);
        let test = generate(&spec).unwrap();
        let expected = test.expected_next();
        let matching: Vec<usize> = test
            .choice_features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.get(spec.predictive) == Some(expected))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(
            matching,
            vec![test.correct_idx],
            "{} seed {seed}",
            spec.condition_label()
        );
        let wrong: Vec<_> = test
            .choice_features
            .iter()
            .map(|f| f.get(spec.predictive).unwrap())
            .collect();
        for i in 0..wrong.len() {
            for j in i + 1..wrong.len() {
                assert_ne!(wrong[i], wrong[j], "duplicate choice values, seed {seed}");
            }
        }
    }
}

#[test]
fn features_outside_the_rule_and_distractors_stay_fixed() {
    for (i, spec) in full_grid().into_iter().enumerate() {
        let test = generate(&spec.clone().with_seed(i as u64)).unwrap();
        let all: Vec<_> = test.sequence_features.iter().chain(&test.choice_features).collect();
        for f in Feature::ALL {
            if f == spec.predictive || spec.distractors.contains(f) {
                continue;
            }
            assert!(
                all.iter().all(|v| v.same(all[0], f)),
                "{f} varies in {}",
                spec.condition_label()
            );
        }
    }
}

#[test]
fn correct_index_is_uniform() {
    let spec = TestSpec::new(Feature::Shade, FeatureSet::empty());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = [0usize; 4];
    for _ in 0..2000 {
        counts[sample_test(&spec, &mut rng).unwrap().correct_idx] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 1e-3, "{counts:?} p={p}");
}

#[test]
fn distractor_values_are_uniform() {
    let spec = TestSpec::new(Feature::Size, "shade,shape".parse().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut shades = [0usize; 6];
    let mut shapes = [0usize; 5];
    for _ in 0..400 {
        let t = sample_test(&spec, &mut rng).unwrap();
        for f in t.sequence_features.iter().chain(&t.choice_features) {
            shades[f.shade_idx as usize] += 1;
            shapes[Shape::ALL.iter().position(|s| *s == f.shape).unwrap()] += 1;
        }
    }
    assert!(chi_square_p(&shades) > 1e-3, "{shades:?}");
    assert!(chi_square_p(&shapes) > 1e-3, "{shapes:?}");
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = TestSpec::new(Feature::Number, "positions".parse().unwrap()).with_seed(5);
    let test = generate(&spec).unwrap();
    let written = write_test(dir.path(), "t0", &test).unwrap();
    assert_eq!(written.len(), 10);
    let back = load_test(&dir.path().join("t0.json")).unwrap();
    assert_eq!(back, test);
}

fn ordered_value() -> impl Strategy<Value = FeatureValue> {
    prop_oneof![
        (1u8..=9).prop_map(FeatureValue::Number),
        (0u8..6).prop_map(FeatureValue::Shade),
        (0u8..6).prop_map(FeatureValue::Size),
    ]
}

proptest! {
    #[test]
    fn monotonic_steps_invert(v in ordered_value(), up in any::<bool>()) {
        let d = if up { 1 } else { -1 };
        let fwd = Rule::monotonic(v.feature(), d).unwrap();
        let back = Rule::monotonic(v.feature(), -d).unwrap();
        if let Ok(next) = apply_rule(&fwd, v) {
            prop_assert_ne!(next, v);
            prop_assert_eq!(apply_rule(&back, next).unwrap(), v);
        }
    }

    #[test]
    fn alternation_has_period_two(a in 0usize..5, b in 0usize..5, start_a in any::<bool>()) {
        prop_assume!(a != b);
        let (sa, sb) = (Shape::ALL[a], Shape::ALL[b]);
        let rule = Rule::alternating(sa, sb).unwrap();
        let v = FeatureValue::Shape(if start_a { sa } else { sb });
        let once = apply_rule(&rule, v).unwrap();
        prop_assert_ne!(once, v);
        prop_assert_eq!(apply_rule(&rule, once).unwrap(), v);
    }

    #[test]
    fn generation_and_rendering_are_pure(seed in any::<u64>(), cond in 0usize..64) {
        let spec = full_grid()[cond].clone().with_seed(seed);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.sequence_images, &b.sequence_images);
        let cfg = RenderConfig::default();
        prop_assert_eq!(render(&a.choice_features[0], &cfg), a.choice_images[0].clone());
    }
}
