//! Acceptance thresholds shared by `--check` and the acceptance suite.

use std::fmt;

use sce_core::gen::Feature;
use sce_core::solver::{AccuracyStats, TransferCell};
use statrs::distribution::{Binomial, DiscreteCDF};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            detail: detail.into(),
            passed,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub const CHANCE: f64 = 0.25;
pub const CHANCE_P: f64 = 1e-3;

/// Minimum mean accuracy without distractors, per predictive feature.
pub const EASY_MIN: [(Feature, f64); 4] = [
    (Feature::Size, 0.80),
    (Feature::Shade, 0.80),
    (Feature::Number, 0.45),
    (Feature::Shape, 0.50),
];

pub const DIFFICULTY_GAP: f64 = 0.15;

/// `(minuend, subtrahend, minimum difference)` of total accuracies.
pub const ABLATION_GAPS: [(&str, &str, f64); 4] = [
    ("mcpc", "rn", 0.03),
    ("mcpc", "mcpc-nonres", 0.10),
    ("mcpc", "mcpc-nocontrast", 0.02),
    ("rn", "rn-deep", 0.05),
];

pub const LATENT_VARIANTS: [&str; 3] = ["mcpc-d1", "mcpc-d10", "mcpc-d100"];
pub const LATENT_SPREAD: f64 = 0.05;

pub const ANOMALY_WINDOW: usize = 5;
pub const ANOMALY_HITS: f64 = 0.8;

pub const MIN_MCPC_RATE: f64 = 2.0;

/// One-sided binomial p-value of at least `correct` successes at chance.
pub fn p_above_chance(correct: usize, n: usize) -> f64 {
    if correct == 0 {
        return 1.0;
    }
    let b = Binomial::new(CHANCE, n as u64).expect("valid binomial");
    1.0 - b.cdf(correct as u64 - 1)
}

fn find(run: &[AccuracyStats], feature: Feature, difficulty: usize) -> Vec<&AccuracyStats> {
    run.iter()
        .filter(|s| s.predictive == feature && s.difficulty() == difficulty)
        .collect()
}

/// Pooled accuracy of the matching conditions in one run.
fn pooled(run: &[AccuracyStats], feature: Feature, difficulty: usize) -> Option<(usize, usize)> {
    let rows = find(run, feature, difficulty);
    (!rows.is_empty()).then(|| rows.iter().fold((0, 0), |(c, n), s| (c + s.correct, n + s.num_tests)))
}

/// Easy-condition thresholds over one or more seeded runs: the mean over
/// runs meets the minimum and every run beats chance.
pub fn easy_checks(runs: &[Vec<AccuracyStats>]) -> Vec<Check> {
    let mut out = Vec::new();
    for (feature, min) in EASY_MIN {
        let per_run: Vec<(usize, usize)> = runs.iter().filter_map(|r| pooled(r, feature, 0)).collect();
        if per_run.is_empty() {
            continue;
        }
        let accs: Vec<f64> = per_run.iter().map(|&(c, n)| c as f64 / n as f64).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let worst_p = per_run.iter().map(|&(c, n)| p_above_chance(c, n)).fold(0.0, f64::max);
        let accs_text: Vec<String> = accs.iter().map(|a| format!("{a:.3}")).collect();
        out.push(Check::new(
            format!("naive {feature} without distractors"),
            mean >= min && worst_p < CHANCE_P,
            format!(
                "mean {mean:.3} (runs {}) vs >= {min:.2}; largest p vs chance {worst_p:.2e} vs < {CHANCE_P:.0e}",
                accs_text.join(", ")
            ),
        ));
    }
    out
}

/// Accuracy drop from no distractors to all four, for size and shade.
pub fn difficulty_checks(run: &[AccuracyStats]) -> Vec<Check> {
    let mut out = Vec::new();
    for feature in [Feature::Size, Feature::Shade] {
        let (Some((c0, n0)), Some((c4, n4))) = (pooled(run, feature, 0), pooled(run, feature, 4)) else {
            continue;
        };
        let (a0, a4) = (c0 as f64 / n0 as f64, c4 as f64 / n4 as f64);
        out.push(Check::new(
            format!("difficulty effect on {feature}"),
            a0 - a4 >= DIFFICULTY_GAP,
            format!("{a0:.3} -> {a4:.3}, drop {:.3} vs >= {DIFFICULTY_GAP:.2}", a0 - a4),
        ));
    }
    out
}

/// Ordering and latent-dimension checks over `(variant, total)` pairs.
pub fn ablation_checks(totals: &[(String, f64)]) -> Vec<Check> {
    let get = |v: &str| totals.iter().find(|(n, _)| n == v).map(|(_, t)| *t);
    let mut out = Vec::new();
    for (a, b, gap) in ABLATION_GAPS {
        if let (Some(ta), Some(tb)) = (get(a), get(b)) {
            out.push(Check::new(
                format!("{a} total - {b} total"),
                ta - tb >= gap,
                format!("{ta:.3} - {tb:.3} = {:.3} vs >= {gap:.2}", ta - tb),
            ));
        }
    }
    let dims: Vec<(&str, f64)> = LATENT_VARIANTS.iter().filter_map(|v| get(v).map(|t| (*v, t))).collect();
    if dims.len() == LATENT_VARIANTS.len() {
        let hi = dims.iter().map(|d| d.1).fold(f64::MIN, f64::max);
        let lo = dims.iter().map(|d| d.1).fold(f64::MAX, f64::min);
        let text: Vec<String> = dims.iter().map(|(v, t)| format!("{v} {t:.3}")).collect();
        out.push(Check::new(
            "latent dimension robustness",
            hi - lo <= LATENT_SPREAD,
            format!("{}; spread {:.3} vs <= {LATENT_SPREAD:.2}", text.join(", "), hi - lo),
        ));
    }
    out
}

fn cell<'a>(cells: &'a [TransferCell], train: &str, test: &str) -> Option<&'a TransferCell> {
    cells.iter().find(|c| c.train_name() == train && c.test.name() == test)
}

pub fn transfer_checks(cells: &[TransferCell]) -> Vec<Check> {
    let mut out = Vec::new();
    let floors = [
        ("size-easy", "size-easy", 0.90),
        ("size-easy", "size-hard", 0.80),
        ("color-easy", "color-easy", 0.90),
    ];
    for (train, test, min) in floors {
        if let Some(c) = cell(cells, train, test) {
            out.push(Check::new(
                format!("transfer {train} -> {test}"),
                c.mean_acc >= min,
                format!("{:.3} +- {:.3} vs >= {min:.2}", c.mean_acc, c.sem),
            ));
        }
    }
    if let Some(c) = cell(cells, "shape-hard", "size-easy") {
        out.push(Check::new(
            "transfer shape-hard -> size-easy",
            c.mean_acc <= 0.40,
            format!("{:.3} +- {:.3} vs <= 0.40", c.mean_acc, c.sem),
        ));
    }
    if let (Some(c), Some(naive)) = (
        cell(cells, "shape-easy", "size-easy"),
        cell(cells, "naive", "size-easy"),
    ) {
        let drop = naive.mean_acc - c.mean_acc;
        out.push(Check::new(
            "transfer shape-easy -> size-easy below naive",
            drop >= 0.30,
            format!(
                "naive {:.3}, pretrained {:.3}, drop {drop:.3} vs >= 0.30",
                naive.mean_acc, c.mean_acc
            ),
        ));
    }
    out
}

/// Peak of the smoothed score within the window around the break, for
/// enough videos.
pub fn anomaly_checks(peaks: &[(usize, Option<usize>)]) -> Vec<Check> {
    let hits = peaks
        .iter()
        .filter(|(brk, peak)| peak.is_some_and(|p| p.abs_diff(*brk) <= ANOMALY_WINDOW))
        .count();
    let need = (ANOMALY_HITS * peaks.len() as f64).ceil() as usize;
    let pairs: Vec<String> = peaks
        .iter()
        .map(|(b, p)| format!("{b}/{}", p.map_or("-".into(), |p| p.to_string())))
        .collect();
    vec![Check::new(
        "synthetic break located",
        hits >= need,
        format!(
            "{hits}/{} peaks within +-{ANOMALY_WINDOW} frames vs >= {need} (break/peak: {})",
            peaks.len(),
            pairs.join(" ")
        ),
    )]
}

/// Single-thread rates in tests per second.
pub fn bench_checks(mcpc: Option<f64>, lstm: Option<f64>) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(m) = mcpc {
        out.push(Check::new(
            "mcpc single-thread throughput",
            m >= MIN_MCPC_RATE,
            format!("{m:.2} tests/s vs >= {MIN_MCPC_RATE:.1}"),
        ));
        if let Some(l) = lstm {
            out.push(Check::new(
                "mcpc faster than lstm-cpc",
                m > l,
                format!("{m:.2} vs {l:.2} tests/s"),
            ));
        }
    }
    out
}
