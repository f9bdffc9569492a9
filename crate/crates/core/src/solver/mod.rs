//! Naive test solving, condition evaluation, pretraining and the transfer
//! matrix.

mod stats;

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape};
use crate::gen::{generate, Feature, FeatureSet, GenError, SceTest, TestSpec};
use crate::models::{to_input, Forward, ModelBundle, ModelConfig, ModelError, Negatives, Variant};
use crate::seed::{mix, mix_all};

pub use stats::{mean_and_sem, wilson_interval, AccuracyStats, WILSON_Z};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("invalid solver setting: {0}")]
    Invalid(String),
}

/// How a choice image is scored after the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// The objective on the six-image sequence ending in the choice.
    #[default]
    Full,
    /// Only the last pair: the fifth image against the choice.
    LastPair,
}

impl FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ScoreMode::Full),
            "last-pair" => Ok(ScoreMode::LastPair),
            other => Err(format!("unknown score mode `{other}` (full|last-pair)")),
        }
    }
}

impl ScoreMode {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Full => "full",
            ScoreMode::LastPair => "last-pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub variant: Variant,
    pub model: ModelConfig,
    pub steps_per_episode: usize,
    pub score: ScoreMode,
}

impl SolveConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            model: variant.config(),
            steps_per_episode: 1,
            score: ScoreMode::Full,
        }
    }

    pub fn with_negatives(mut self, negatives: Negatives) -> Self {
        self.model.negatives = negatives;
        self
    }

    pub fn with_score(mut self, score: ScoreMode) -> Self {
        self.score = score;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.model.optimizer.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.model.validate().map_err(SolveError::Invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub chosen_idx: usize,
    pub correct: bool,
    pub scores: Vec<f64>,
    pub loss_before: f64,
    pub loss_after: f64,
    /// Excluded from equality-sensitive outputs; never written to CSVs
    /// unless timing is requested.
    #[serde(skip)]
    pub wall_secs: f64,
}

/// Index of the smallest score; the lowest index wins ties. NaN scores
/// never win against a number.
pub fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        let b = scores[best];
        if s < b || (b.is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

/// Scores every choice from already-encoded latents.
pub fn score_choices<F: Real>(
    fwd: &Forward<'_, F>,
    tape: &mut Tape<F>,
    sequence: &[crate::autodiff::Var],
    choices: &[crate::autodiff::Var],
    mode: ScoreMode,
) -> Result<Vec<f64>, ModelError> {
    let mut scores = Vec::with_capacity(choices.len());
    let mut seq = sequence.to_vec();
    for &c in choices {
        seq.push(c);
        let s = match mode {
            ScoreMode::Full => fwd.sequence_loss(tape, &seq)?,
            ScoreMode::LastPair => fwd.last_pair_score(tape, &seq)?,
        };
        scores.push(tape.scalar(s).as_f64());
        seq.pop();
    }
    Ok(scores)
}

/// Steps `bundle` on the sequence, then picks the most consistent choice.
pub fn solve_test<F: Real>(
    bundle: &mut ModelBundle<F>,
    test: &SceTest,
    cfg: &SolveConfig,
) -> Result<EpisodeResult, SolveError> {
    let start = Instant::now();
    let seq: Vec<Vec<F>> = test.sequence_images.iter().map(to_input).collect();
    let choices: Vec<Vec<F>> = test.choice_images.iter().map(to_input).collect();
    let mut loss_before = None;
    for _ in 0..cfg.steps_per_episode {
        let l = bundle.train_step(&seq)?;
        loss_before.get_or_insert(l.as_f64());
    }
    let mut tape = Tape::new();
    let fwd = bundle.bind(&mut tape);
    let seq_z = fwd.encode_all(&mut tape, &seq)?;
    let choice_z = fwd.encode_all(&mut tape, &choices)?;
    let after = fwd.sequence_loss(&mut tape, &seq_z)?;
    let loss_after = tape.scalar(after).as_f64();
    let scores = score_choices(&fwd, &mut tape, &seq_z, &choice_z, cfg.score)?;
    let chosen_idx = argmin(&scores);
    Ok(EpisodeResult {
        chosen_idx,
        correct: chosen_idx == test.correct_idx,
        scores,
        loss_before: loss_before.unwrap_or(loss_after),
        loss_after,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Seed of test `index` within a condition.
pub fn test_seed(global_seed: u64, condition_id: u64, index: u64) -> u64 {
    mix_all(global_seed, &[condition_id, index])
}

/// The test and the naive-bundle seed belonging to `test_seed`.
pub fn test_for_seed(spec: &TestSpec, test_seed: u64) -> Result<(SceTest, u64), GenError> {
    let test = generate(&spec.clone().with_seed(mix(test_seed, 1)))?;
    Ok((test, mix(test_seed, 2)))
}

/// Outcome of evaluating one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRun {
    pub spec: TestSpec,
    pub episodes: Vec<EpisodeResult>,
    pub stats: AccuracyStats,
}

/// Where each evaluated test's model comes from.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a> {
    /// A freshly initialized bundle per test.
    Naive,
    /// A clone of this bundle per test, discarded afterwards.
    Pretrained(&'a ModelBundle<f32>),
}

/// Evaluates `num_tests` tests of `spec` on the current rayon pool. The
/// result does not depend on the pool size or the schedule.
pub fn run_condition(
    spec: &TestSpec,
    num_tests: usize,
    cfg: &SolveConfig,
    global_seed: u64,
    start: Start<'_>,
) -> Result<ConditionRun, SolveError> {
    if num_tests == 0 {
        return Err(SolveError::Invalid("num_tests must be at least 1".into()));
    }
    cfg.validate()?;
    let started = Instant::now();
    let cond = spec.condition_id();
    let episodes = (0..num_tests as u64)
        .into_par_iter()
        .map(|i| {
            let (test, init_seed) = test_for_seed(spec, test_seed(global_seed, cond, i))?;
            let mut bundle = match start {
                // An untouched pretrained bundle is still naive; evaluating
                // it naively keeps zero-episode rows equal to the naive row.
                Start::Pretrained(b) if !b.optimizer().is_fresh() => b.clone(),
                _ => ModelBundle::new(cfg.model, init_seed)?,
            };
            solve_test(&mut bundle, &test, cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let elapsed = started.elapsed().as_secs_f64();
    let correct = episodes.iter().filter(|e| e.correct).count();
    let mut stats = AccuracyStats::new(spec, correct, num_tests);
    if elapsed > 0.0 {
        stats.tests_per_sec = Some(num_tests as f64 / elapsed);
    }
    Ok(ConditionRun {
        spec: spec.clone(),
        episodes,
        stats,
    })
}

const PRETRAIN_TAG: u64 = 0x7072_6574_7261_696e;

/// One optimization step per generated episode of `train_spec`, in order;
/// choices are never looked at.
pub fn pretrain(
    bundle: &mut ModelBundle<f32>,
    train_spec: &TestSpec,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>, SolveError> {
    let cond = train_spec.condition_id();
    let mut losses = Vec::with_capacity(episodes);
    for e in 0..episodes as u64 {
        let s = mix_all(seed, &[PRETRAIN_TAG, cond, e]);
        let test = generate(&train_spec.clone().with_seed(s))?;
        let seq: Vec<Vec<f32>> = test.sequence_images.iter().map(to_input).collect();
        losses.push(bundle.train_step(&seq)?.as_f64());
    }
    Ok(losses)
}

/// A predictive feature with no distractors (easy) or all four (hard).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferCondition {
    pub feature: Feature,
    pub hard: bool,
}

impl TransferCondition {
    /// The eight conditions in column order: size, color, number, shape,
    /// each easy then hard.
    pub fn all() -> Vec<TransferCondition> {
        Feature::PREDICTIVE
            .into_iter()
            .flat_map(|feature| [false, true].map(|hard| TransferCondition { feature, hard }))
            .collect()
    }

    pub fn spec(&self) -> TestSpec {
        let distractors = if self.hard {
            Feature::ALL.into_iter().filter(|f| *f != self.feature).collect()
        } else {
            FeatureSet::empty()
        };
        TestSpec::new(self.feature, distractors)
    }

    pub fn name(&self) -> String {
        let f = match self.feature {
            Feature::Shade => "color",
            other => other.name(),
        };
        format!("{f}-{}", if self.hard { "hard" } else { "easy" })
    }
}

impl FromStr for TransferCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (f, level) = s
            .rsplit_once('-')
            .ok_or_else(|| format!("expected <feature>-<easy|hard>, got `{s}`"))?;
        let feature: Feature = f.parse()?;
        let hard = match level {
            "easy" => false,
            "hard" => true,
            _ => return Err(format!("expected easy or hard in `{s}`")),
        };
        if !feature.can_be_predictive() {
            return Err(format!("{feature} cannot be predictive"));
        }
        Ok(TransferCondition { feature, hard })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    /// `None` for the naive baseline row.
    pub train: Option<TransferCondition>,
    pub test: TransferCondition,
    pub rep_accuracies: Vec<f64>,
    pub mean_acc: f64,
    pub sem: f64,
}

impl TransferCell {
    pub fn train_name(&self) -> String {
        self.train.map_or_else(|| "naive".to_string(), |c| c.name())
    }
}

#[derive(Debug, Clone)]
pub struct TransferPlan {
    pub train: Vec<TransferCondition>,
    pub test: Vec<TransferCondition>,
    pub episodes: usize,
    pub tests_per_cell: usize,
    pub reps: usize,
    /// Passed through to every generated train and test spec.
    pub bidirectional: bool,
}

impl TransferPlan {
    pub fn spec(&self, cond: &TransferCondition) -> TestSpec {
        TestSpec {
            bidirectional: self.bidirectional,
            ..cond.spec()
        }
    }
}

/// Seed of repetition `rep`; the naive row of that repetition is exactly
/// `run_condition` under this seed.
pub fn rep_seed(global_seed: u64, rep: u64) -> u64 {
    mix(global_seed, rep)
}

/// Pretrains on each train condition and evaluates every test condition,
/// plus a naive baseline row. Rows follow `plan.train` with the naive row
/// first.
pub fn transfer_matrix(
    plan: &TransferPlan,
    cfg: &SolveConfig,
    global_seed: u64,
) -> Result<Vec<TransferCell>, SolveError> {
    if plan.reps == 0 {
        return Err(SolveError::Invalid("reps must be at least 1".into()));
    }
    let rows: Vec<Option<TransferCondition>> = std::iter::once(None)
        .chain(plan.train.iter().copied().map(Some))
        .collect();
    // accuracy[row][col][rep]
    let mut acc = vec![vec![Vec::with_capacity(plan.reps); plan.test.len()]; rows.len()];
    for rep in 0..plan.reps as u64 {
        let seed = rep_seed(global_seed, rep);
        let bundles = rows
            .par_iter()
            .enumerate()
            .map(|(r, row)| {
                let mut b = ModelBundle::<f32>::new(cfg.model, mix_all(seed, &[PRETRAIN_TAG, r as u64]))?;
                if let Some(train) = row {
                    pretrain(&mut b, &plan.spec(train), plan.episodes, seed)?;
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>, SolveError>>()?;
        for (r, row) in rows.iter().enumerate() {
            for (c, test) in plan.test.iter().enumerate() {
                let start = match row {
                    None => Start::Naive,
                    Some(_) => Start::Pretrained(&bundles[r]),
                };
                let run = run_condition(&plan.spec(test), plan.tests_per_cell, cfg, seed, start)?;
                acc[r][c].push(run.stats.accuracy);
            }
        }
    }
    let mut cells = Vec::with_capacity(rows.len() * plan.test.len());
    for (r, row) in rows.iter().enumerate() {
        for (c, test) in plan.test.iter().enumerate() {
            let (mean_acc, sem) = mean_and_sem(&acc[r][c]);
            cells.push(TransferCell {
                train: *row,
                test: *test,
                rep_accuracies: acc[r][c].clone(),
                mean_acc,
                sem,
            });
        }
    }
    Ok(cells)
}

/// Unweighted mean of per-condition accuracies.
pub fn total_accuracy(stats: &[AccuracyStats]) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    stats.iter().map(|s| s.accuracy).sum::<f64>() / stats.len() as f64
}
