use proptest::prelude::*;
use sce_core::anomaly::{anomaly_score, gaussian_smooth, preprocess_frame, score_video, AnomalyConfig, RawFrame};
use sce_core::gen::Image;
use sce_core::solver::{argmin, mean_and_sem, wilson_interval, WILSON_Z};

fn errors() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(0.0f64..10.0, 4), 0.0f64..10.0)
}

proptest! {
    #[test]
    fn argmin_ignores_shifts_and_positive_scales(
        scores in prop::collection::vec(-100.0f64..100.0, 1..8),
        shift in -1e3f64..1e3,
        scale in 0.01f64..100.0,
    ) {
        let moved: Vec<f64> = scores.iter().map(|s| s * scale + shift).collect();
        let i = argmin(&scores);
        let j = argmin(&moved);
        prop_assert!(moved[j] <= moved[i]);
        prop_assert!(scores.iter().all(|&s| s >= scores[i]));
    }

    #[test]
    fn anomaly_score_is_a_z_score((eps_p, eps_c) in errors(), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let spread = eps_p.iter().cloned().fold(f64::MIN, f64::max) - eps_p.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-3);
        let s = anomaly_score(&eps_p, eps_c);
        let shifted: Vec<f64> = eps_p.iter().map(|e| e + shift).collect();
        let scaled: Vec<f64> = eps_p.iter().map(|e| e * scale).collect();
        prop_assert!((anomaly_score(&shifted, eps_c + shift) - s).abs() < 1e-6 * s.abs().max(1.0));
        prop_assert!((anomaly_score(&scaled, eps_c * scale) - s).abs() < 1e-6 * s.abs().max(1.0));
    }

    #[test]
    fn smoothing_keeps_length_and_range(
        scores in prop::collection::vec(-50.0f64..50.0, 1..120),
        sigma in 0.0f64..15.0,
    ) {
        let out = gaussian_smooth(&scores, sigma);
        prop_assert_eq!(out.len(), scores.len());
        let lo = scores.iter().cloned().fold(f64::MAX, f64::min);
        let hi = scores.iter().cloned().fold(f64::MIN, f64::max);
        for v in &out {
            prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
    }

    #[test]
    fn smoothing_constants_is_exact(c in -1e3f64..1e3, len in 1usize..80, sigma in 0.5f64..12.0) {
        let out = gaussian_smooth(&vec![c; len], sigma);
        prop_assert!(out.iter().all(|v| (v - c).abs() <= 1e-12 * c.abs().max(1.0)));
    }

    #[test]
    fn wilson_interval_contains_the_estimate(n in 1usize..600, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n, WILSON_Z);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn uniform_frames_stay_uniform(v in any::<u8>(), extra in 0usize..40) {
        let raw = RawFrame { width: 64 + extra, height: 94 + extra, channels: 1, data: vec![v; (64 + extra) * (94 + extra)] };
        let img = preprocess_frame(&raw, 30, 64, 64).unwrap();
        prop_assert!(img.pixels.iter().all(|&p| p == v));
    }
}

#[test]
fn sem_of_identical_values_is_zero() {
    assert_eq!(mean_and_sem(&[0.4, 0.4, 0.4]), (0.4, 0.0));
}

#[test]
fn identical_video_scores_exactly_zero() {
    let frames = vec![Image::filled(64, 64, 117); 9];
    let cfg = AnomalyConfig {
        runs: 2,
        ..AnomalyConfig::default()
    };
    let report = score_video(&frames, Vec::new(), &cfg).unwrap();
    assert_eq!(report.frames.len(), 4);
    for f in &report.frames {
        assert_eq!(f.mean, 0.0);
        assert_eq!(f.smoothed, 0.0);
    }
}

#[test]
fn video_scores_are_schedule_independent() {
    let video = sce_core::anomaly::synthetic_video(16, 3);
    let cfg = AnomalyConfig {
        runs: 2,
        ..AnomalyConfig::default()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| score_video(&video.frames, Vec::new(), &cfg)).unwrap();
    let b = three.install(|| score_video(&video.frames, Vec::new(), &cfg)).unwrap();
    assert_eq!(a, b);
}
