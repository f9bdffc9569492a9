//! Accuracy summaries and binomial intervals.

use serde::{Deserialize, Serialize};

use crate::gen::{Feature, FeatureSet, TestSpec};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n`; always inside [0, 1].
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes as f64 == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Mean and standard error of the mean (sample std / sqrt(n)); the SEM of
/// a single value, or of identical values, is exactly 0.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let base = values[0];
    let mean = base + values.iter().map(|v| v - base).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStats {
    pub condition_id: u64,
    pub predictive: Feature,
    pub distractors: FeatureSet,
    pub num_tests: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tests_per_sec: Option<f64>,
}

impl AccuracyStats {
    pub fn new(spec: &TestSpec, correct: usize, num_tests: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(correct, num_tests, WILSON_Z);
        Self {
            condition_id: spec.condition_id(),
            predictive: spec.predictive,
            distractors: spec.distractors,
            num_tests,
            correct,
            accuracy: if num_tests == 0 {
                0.0
            } else {
                correct as f64 / num_tests as f64
            },
            ci_low,
            ci_high,
            tests_per_sec: None,
        }
    }

    pub fn difficulty(&self) -> usize {
        self.distractors.len()
    }
}
