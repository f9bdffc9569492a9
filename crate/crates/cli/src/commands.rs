//! Subcommand implementations.

use std::fmt;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use sce_core::anomaly::{preprocess_frame, score_video, synthetic_video, AnomalyConfig, AnomalyReport};
use sce_core::gen::{full_grid, write_test, Feature, TestSpec};
use sce_core::models::gradsuite::gradient_suite;
use sce_core::models::{ModelBundle, Variant};
use sce_core::seed::mix;
use sce_core::solver::{
    run_condition, solve_test, test_for_seed, test_seed, total_accuracy, transfer_matrix, wilson_interval,
    AccuracyStats, SolveConfig, Start, TransferCell, TransferCondition, TransferPlan, WILSON_Z,
};
use serde::Serialize;

use crate::check::{self, Check, CHANCE};
use crate::cli::{
    AblateArgs, AnomalyArgs, BenchArgs, Command, GenArgs, GradcheckArgs, GridArgs, PretrainArgs, SolveArgs, SolverArgs,
};
use crate::frames::{list_frames, load_frame};
use crate::output::{csv_bytes, fmt, Outputs};
use crate::svg::{bar_chart, line_chart, Bar, BarChart, LineChart};

/// Invalid arguments discovered after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Acceptance checks evaluated by a command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Ablate(a) => ablate(a),
        Command::PretrainMatrix(a) => pretrain_matrix(a),
        Command::Anomaly(a) => anomaly(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Bench(a) => bench(a),
    }
}

pub const RESULTS_HEADER: [&str; 10] = [
    "variant",
    "predictive",
    "distractors",
    "difficulty",
    "num_tests",
    "accuracy",
    "ci_low",
    "ci_high",
    "tests_per_sec",
    "seed",
];

pub const TRANSFER_HEADER: [&str; 7] = ["train_cond", "test_cond", "mean_acc", "sem", "reps", "episodes", "seed"];

/// The selected conditions of the grid, in grid order.
pub fn select_grid(grid: &GridArgs) -> Result<Vec<TestSpec>> {
    let all = grid.predictive.iter().any(|p| p.trim() == "all");
    let features: Vec<Feature> = if all {
        Feature::PREDICTIVE.to_vec()
    } else {
        grid.predictive
            .iter()
            .map(|p| {
                let f: Feature = p.parse().map_err(usage)?;
                if !f.can_be_predictive() {
                    return Err(usage(format!("{f} cannot be predictive")));
                }
                Ok(f)
            })
            .collect::<Result<_>>()?
    };
    if let Some(d) = grid.difficulty.iter().find(|&&d| d > 4) {
        return Err(usage(format!("difficulty {d} is outside 0-4")));
    }
    let specs: Vec<TestSpec> = full_grid()
        .into_iter()
        .filter(|s| features.contains(&s.predictive))
        .filter(|s| grid.difficulty.is_empty() || grid.difficulty.contains(&s.difficulty()))
        .map(|s| TestSpec {
            bidirectional: grid.bidirectional,
            ..s
        })
        .collect();
    if specs.is_empty() {
        return Err(usage("no condition matches the selection"));
    }
    Ok(specs)
}

pub fn solve_config(model: Variant, s: &SolverArgs) -> Result<SolveConfig> {
    let mut cfg = SolveConfig::new(model).with_negatives(s.negatives).with_score(s.score);
    if let Some(lr) = s.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(usage(format!("--lr must be positive, got {lr}")));
        }
        cfg = cfg.with_learning_rate(lr);
    }
    if s.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    cfg.steps_per_episode = s.steps;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn tests_or(tests: Option<usize>, paper: bool) -> Result<usize> {
    let n = tests.unwrap_or(if paper { 500 } else { 100 });
    if n == 0 {
        return Err(usage("--tests must be at least 1"));
    }
    Ok(n)
}

/// Runs every spec naively and returns the per-condition statistics.
pub fn evaluate_grid(specs: &[TestSpec], tests: usize, cfg: &SolveConfig, seed: u64) -> Result<Vec<AccuracyStats>> {
    specs
        .iter()
        .map(|s| Ok(run_condition(s, tests, cfg, seed, Start::Naive)?.stats))
        .collect()
}

pub fn result_rows(variant: Variant, stats: &[AccuracyStats], seed: u64, timing: bool) -> Vec<Vec<String>> {
    stats
        .iter()
        .map(|s| {
            vec![
                variant.id(),
                s.predictive.name().to_string(),
                s.distractors.label(),
                s.difficulty().to_string(),
                s.num_tests.to_string(),
                fmt(s.accuracy),
                fmt(s.ci_low),
                fmt(s.ci_high),
                match (timing, s.tests_per_sec) {
                    (true, Some(r)) => format!("{r:.3}"),
                    _ => String::new(),
                },
                seed.to_string(),
            ]
        })
        .collect()
}

/// Pooled accuracy per predictive feature and distractor count.
struct Group {
    predictive: Feature,
    difficulty: usize,
    conditions: usize,
    tests: usize,
    correct: usize,
}

fn by_difficulty(stats: &[AccuracyStats]) -> Vec<Group> {
    let mut out: Vec<Group> = Vec::new();
    for s in stats {
        match out
            .iter_mut()
            .find(|g| g.predictive == s.predictive && g.difficulty == s.difficulty())
        {
            Some(g) => {
                g.conditions += 1;
                g.tests += s.num_tests;
                g.correct += s.correct;
            }
            None => out.push(Group {
                predictive: s.predictive,
                difficulty: s.difficulty(),
                conditions: 1,
                tests: s.num_tests,
                correct: s.correct,
            }),
        }
    }
    out
}

const GROUP_HEADER: [&str; 9] = [
    "variant",
    "predictive",
    "difficulty",
    "conditions",
    "num_tests",
    "correct",
    "accuracy",
    "ci_low",
    "ci_high",
];

fn group_bar(g: &Group) -> Bar {
    let (low, high) = wilson_interval(g.correct, g.tests, WILSON_Z);
    Bar {
        value: g.correct as f64 / g.tests as f64,
        low,
        high,
    }
}

/// Grouped-by-difficulty CSV rows and the matching bar chart.
fn difficulty_figure(title: &str, results: &[(Variant, Vec<AccuracyStats>)]) -> (Vec<Vec<String>>, String) {
    let mut rows = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut series = Vec::new();
    for (variant, stats) in results {
        let groups = by_difficulty(stats);
        if labels.is_empty() {
            labels = groups
                .iter()
                .map(|g| format!("{} / {} distractors", g.predictive, g.difficulty))
                .collect();
        }
        for g in &groups {
            let bar = group_bar(g);
            rows.push(vec![
                variant.id(),
                g.predictive.name().to_string(),
                g.difficulty.to_string(),
                g.conditions.to_string(),
                g.tests.to_string(),
                g.correct.to_string(),
                fmt(bar.value),
                fmt(bar.low),
                fmt(bar.high),
            ]);
        }
        series.push((variant.id(), groups.iter().map(group_bar).collect()));
    }
    let svg = bar_chart(&BarChart {
        title: title.to_string(),
        y_label: "accuracy".into(),
        groups: labels,
        series,
        chance: Some(CHANCE),
    });
    (rows, svg)
}

fn print_total(variant: Variant, stats: &[AccuracyStats], secs: f64) {
    let tests: usize = stats.iter().map(|s| s.num_tests).sum();
    println!(
        "{variant}: total accuracy {:.4} over {} conditions ({tests} tests, {:.1} tests/s)",
        total_accuracy(stats),
        stats.len(),
        tests as f64 / secs.max(1e-9)
    );
}

fn gen(a: &GenArgs) -> Result<Outcome> {
    let specs = select_grid(&a.grid)?;
    if a.tests == 0 {
        return Err(usage("--tests must be at least 1"));
    }
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let corpus = out.dir().join("corpus");
    let mut index = Vec::new();
    for spec in &specs {
        for i in 0..a.tests as u64 {
            let (test, _) = test_for_seed(spec, test_seed(seed, spec.condition_id(), i))?;
            let id = format!("{}-{}-{i:04}", spec.predictive, spec.distractors.label());
            for p in write_test(&corpus, &id, &test).with_context(|| format!("writing test {id}"))? {
                out.record(p);
            }
            index.push(vec![
                id,
                spec.predictive.name().to_string(),
                spec.distractors.label(),
                test.correct_idx.to_string(),
            ]);
        }
    }
    out.write(
        "index.csv",
        &csv_bytes(&["test_id", "predictive", "distractors", "correct_idx"], &index)?,
    )?;
    println!("wrote {} tests to {}", index.len(), corpus.display());
    out.finish("gen", a, seed)?;
    Ok(Outcome::default())
}

fn solve(a: &SolveArgs) -> Result<Outcome> {
    let specs = select_grid(&a.grid)?;
    let cfg = solve_config(a.model, &a.solver)?;
    let tests = tests_or(a.tests, a.paper_scale)?;
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let started = Instant::now();
    let stats = evaluate_grid(&specs, tests, &cfg, seed)?;
    print_total(a.model, &stats, started.elapsed().as_secs_f64());
    out.write(
        "results.csv",
        &csv_bytes(&RESULTS_HEADER, &result_rows(a.model, &stats, seed, a.timing))?,
    )?;
    let results = [(a.model, stats)];
    if a.svg {
        let (rows, svg) = difficulty_figure(&format!("{} accuracy by condition difficulty", a.model), &results);
        out.write("results_by_difficulty.csv", &csv_bytes(&GROUP_HEADER, &rows)?)?;
        out.write("results.svg", svg.as_bytes())?;
    }
    let stats = &results[0].1;
    let mut checks = check::easy_checks(std::slice::from_ref(stats));
    checks.extend(check::difficulty_checks(stats));
    out.finish("solve", a, seed)?;
    Ok(Outcome { checks })
}

fn ablate(a: &AblateArgs) -> Result<Outcome> {
    let specs = select_grid(&a.grid)?;
    let tests = tests_or(a.tests, a.paper_scale)?;
    if a.models.is_empty() {
        return Err(usage("--models needs at least one variant"));
    }
    let cfgs: Vec<SolveConfig> = a
        .models
        .iter()
        .map(|&m| solve_config(m, &a.solver))
        .collect::<Result<_>>()?;
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for (variant, cfg) in a.models.iter().zip(&cfgs) {
        let started = Instant::now();
        let stats = evaluate_grid(&specs, tests, cfg, seed)?;
        print_total(*variant, &stats, started.elapsed().as_secs_f64());
        rows.extend(result_rows(*variant, &stats, seed, a.timing));
        totals.push((variant.id(), total_accuracy(&stats), stats.len()));
        results.push((*variant, stats));
    }
    out.write("ablation.csv", &csv_bytes(&RESULTS_HEADER, &rows)?)?;
    let total_rows: Vec<Vec<String>> = totals
        .iter()
        .map(|(v, t, n)| vec![v.clone(), fmt(*t), n.to_string(), tests.to_string(), seed.to_string()])
        .collect();
    out.write(
        "ablation_totals.csv",
        &csv_bytes(
            &["variant", "total_accuracy", "conditions", "tests_per_condition", "seed"],
            &total_rows,
        )?,
    )?;
    if a.svg {
        let (rows, svg) = difficulty_figure("accuracy by condition difficulty", &results);
        out.write("ablation_by_difficulty.csv", &csv_bytes(&GROUP_HEADER, &rows)?)?;
        out.write("ablation.svg", svg.as_bytes())?;
    }
    let pairs: Vec<(String, f64)> = totals.into_iter().map(|(v, t, _)| (v, t)).collect();
    let checks = check::ablation_checks(&pairs);
    out.finish("ablate", a, seed)?;
    Ok(Outcome { checks })
}

pub fn transfer_rows(cells: &[TransferCell], plan: &TransferPlan, seed: u64) -> Vec<Vec<String>> {
    cells
        .iter()
        .map(|c| {
            vec![
                c.train_name(),
                c.test.name(),
                fmt(c.mean_acc),
                fmt(c.sem),
                plan.reps.to_string(),
                if c.train.is_some() { plan.episodes } else { 0 }.to_string(),
                seed.to_string(),
            ]
        })
        .collect()
}

pub fn transfer_plan(a: &PretrainArgs) -> Result<TransferPlan> {
    let tests = tests_or(a.tests, a.paper_scale)?;
    let reps = a.reps.unwrap_or(if a.paper_scale { 10 } else { 3 });
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let or_all = |v: &Vec<TransferCondition>| {
        if v.is_empty() {
            TransferCondition::all()
        } else {
            v.clone()
        }
    };
    Ok(TransferPlan {
        train: or_all(&a.train),
        test: or_all(&a.test),
        episodes: a.episodes,
        tests_per_cell: tests,
        reps,
        bidirectional: a.bidirectional,
    })
}

fn pretrain_matrix(a: &PretrainArgs) -> Result<Outcome> {
    let plan = transfer_plan(a)?;
    let cfg = solve_config(a.model, &a.solver)?;
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let started = Instant::now();
    let cells = transfer_matrix(&plan, &cfg, seed)?;
    println!(
        "{} cells ({} train rows plus naive, {} test conditions) in {:.1} s",
        cells.len(),
        plan.train.len(),
        plan.test.len(),
        started.elapsed().as_secs_f64()
    );
    out.write(
        "transfer.csv",
        &csv_bytes(&TRANSFER_HEADER, &transfer_rows(&cells, &plan, seed))?,
    )?;
    let reps: Vec<Vec<String>> = cells
        .iter()
        .flat_map(|c| {
            c.rep_accuracies
                .iter()
                .enumerate()
                .map(|(r, acc)| vec![c.train_name(), c.test.name(), r.to_string(), fmt(*acc)])
        })
        .collect();
    out.write(
        "transfer_reps.csv",
        &csv_bytes(&["train_cond", "test_cond", "rep", "accuracy"], &reps)?,
    )?;
    for c in &cells {
        if c.test == plan.test[0] {
            print!("{:>12}", c.train_name());
        }
        print!(" {:.2}", c.mean_acc);
        if c.test == *plan.test.last().expect("test conditions") {
            println!();
        }
    }
    if a.svg {
        let mut rows: Vec<String> = Vec::new();
        for c in &cells {
            if !rows.contains(&c.train_name()) {
                rows.push(c.train_name());
            }
        }
        let series = rows
            .iter()
            .map(|r| {
                let bars = cells
                    .iter()
                    .filter(|c| &c.train_name() == r)
                    .map(|c| Bar {
                        value: c.mean_acc,
                        low: c.mean_acc - c.sem,
                        high: c.mean_acc + c.sem,
                    })
                    .collect();
                (r.clone(), bars)
            })
            .collect();
        let svg = bar_chart(&BarChart {
            title: format!("{} transfer after {} pretraining episodes", a.model, plan.episodes),
            y_label: "accuracy".into(),
            groups: plan.test.iter().map(|t| t.name()).collect(),
            series,
            chance: Some(CHANCE),
        });
        out.write("transfer.svg", svg.as_bytes())?;
    }
    let checks = check::transfer_checks(&cells);
    out.finish("pretrain-matrix", a, seed)?;
    Ok(Outcome { checks })
}

pub fn anomaly_config(a: &AnomalyArgs, seed: u64) -> Result<AnomalyConfig> {
    let cfg = AnomalyConfig {
        window: a.window,
        runs: a.runs,
        sigma: a.sigma,
        crop_top: a.crop_top,
        variant: a.model,
        seed,
        ..AnomalyConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

pub fn anomaly_csv(report: &AnomalyReport) -> Result<Vec<u8>> {
    let runs = report.config.runs;
    let mut header = vec!["frame_idx".to_string()];
    header.extend((0..runs).map(|r| format!("run_{r}")));
    header.extend(["mean_score".to_string(), "smoothed_score".to_string()]);
    let rows: Vec<Vec<String>> = report
        .frames
        .iter()
        .map(|f| {
            let mut row = vec![f.index.to_string()];
            row.extend(f.runs.iter().map(|&s| fmt(s)));
            row.extend([fmt(f.mean), fmt(f.smoothed)]);
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(&header, &rows)
}

fn anomaly_svg(title: &str, report: &AnomalyReport, marker: Option<usize>) -> String {
    line_chart(&LineChart {
        title: title.to_string(),
        x_label: "frame".into(),
        y_label: "smoothed anomaly score".into(),
        series: vec![(
            "smoothed score".into(),
            report.frames.iter().map(|f| (f.index as f64, f.smoothed)).collect(),
        )],
        marker: marker.map(|m| m as f64),
    })
}

fn anomaly(a: &AnomalyArgs) -> Result<Outcome> {
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let mut checks = Vec::new();
    if a.synthetic {
        if a.videos == 0 {
            return Err(usage("--videos must be at least 1"));
        }
        if a.length < a.window + 2 || a.length < 10 {
            return Err(usage(format!("--length {} is too short", a.length)));
        }
        anomaly_config(a, seed)?;
        let mut peaks = Vec::new();
        let mut summary = Vec::new();
        for v in 0..a.videos {
            let vseed = mix(seed, v as u64);
            let video = synthetic_video(a.length, vseed);
            let cfg = anomaly_config(a, vseed)?;
            let report = score_video(&video.frames, Vec::new(), &cfg)?;
            let peak = report.peak();
            let hit = peak.is_some_and(|p| p.abs_diff(video.break_frame) <= check::ANOMALY_WINDOW);
            println!(
                "video {v}: break at frame {}, peak at {}",
                video.break_frame,
                peak.map_or("-".to_string(), |p| p.to_string())
            );
            out.write(&format!("synthetic_{v:02}.csv"), &anomaly_csv(&report)?)?;
            if a.svg {
                let svg = anomaly_svg(&format!("synthetic video {v}"), &report, Some(video.break_frame));
                out.write(&format!("synthetic_{v:02}.svg"), svg.as_bytes())?;
            }
            summary.push(vec![
                v.to_string(),
                vseed.to_string(),
                video.break_frame.to_string(),
                peak.map_or(String::new(), |p| p.to_string()),
                hit.to_string(),
            ]);
            peaks.push((video.break_frame, peak));
        }
        out.write(
            "synthetic_summary.csv",
            &csv_bytes(&["video", "seed", "break_frame", "peak_frame", "hit"], &summary)?,
        )?;
        checks = check::anomaly_checks(&peaks);
    } else {
        let dir = a.frames.as_ref().expect("clap requires --frames without --synthetic");
        let cfg = anomaly_config(a, seed)?;
        let files = list_frames(dir, a.pattern.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
        if files.len() < cfg.window + 1 {
            return Err(usage(format!(
                "{} holds {} frames; at least {} are needed",
                dir.display(),
                files.len(),
                cfg.window + 1
            )));
        }
        let frames = files
            .par_iter()
            .map(|f| -> Result<_> {
                let raw = load_frame(f)?;
                preprocess_frame(&raw, cfg.crop_top, cfg.width, cfg.height)
                    .with_context(|| format!("preprocessing {}", f.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let names = files
            .iter()
            .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        let report = score_video(&frames, names, &cfg)?;
        out.write("anomaly.csv", &anomaly_csv(&report)?)?;
        if a.svg {
            out.write("anomaly.svg", anomaly_svg("anomaly score", &report, a.onset).as_bytes())?;
        }
        if let Some(p) = report.peak() {
            println!(
                "{} frames scored; largest smoothed score at frame {p}",
                report.frames.len()
            );
        }
        if let Some(onset) = a.onset {
            let mean = |pre: bool| {
                let v: Vec<f64> = report
                    .frames
                    .iter()
                    .filter(|f| (f.index < onset) == pre)
                    .map(|f| f.smoothed)
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            match (mean(true), mean(false)) {
                (Some(pre), Some(post)) => println!(
                    "mean smoothed score before frame {onset}: {pre:.4}, from it on: {post:.4} ({})",
                    if post > pre {
                        "higher after onset"
                    } else {
                        "not higher after onset"
                    }
                ),
                _ => println!("onset {onset} leaves no scored frames on one side"),
            }
        }
    }
    out.finish("anomaly", a, seed)?;
    Ok(Outcome { checks })
}

fn gradcheck(a: &GradcheckArgs) -> Result<Outcome> {
    if a.budget == 0 {
        return Err(usage("--budget must be at least 1"));
    }
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let started = Instant::now();
    let cases = gradient_suite(a.budget, seed)?;
    let rows: Vec<Vec<String>> = cases
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                format!("{:.3e}", c.report.max_rel_error),
                c.report.checked.to_string(),
                c.report.total.to_string(),
                c.report.kinks.to_string(),
                c.passed().to_string(),
            ]
        })
        .collect();
    for r in &rows {
        println!("{:24} {:>10} {:>6}/{:<7} kinks {}", r[0], r[1], r[2], r[3], r[4]);
    }
    println!("{} cases in {:.1} s", cases.len(), started.elapsed().as_secs_f64());
    out.write(
        "gradcheck.csv",
        &csv_bytes(&["case", "max_rel_error", "checked", "total", "kinks", "passed"], &rows)?,
    )?;
    let checks = cases
        .iter()
        .map(|c| {
            Check::new(
                format!("gradient {}", c.name),
                c.passed(),
                format!("max relative error {:.2e} vs < 1e-3", c.report.max_rel_error),
            )
        })
        .collect();
    out.finish("gradcheck", a, seed)?;
    Ok(Outcome { checks })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub variant: Variant,
    pub threads: usize,
    pub tests: usize,
    pub seconds: f64,
    pub tests_per_sec: f64,
    pub accuracy: f64,
}

pub fn host_note() -> String {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{} {} {cores} logical cores",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Solves `tests` pre-generated tests (cycling through the grid) on a pool
/// of `threads` workers; generation is not timed.
pub fn bench_one(variant: Variant, tests: usize, threads: usize, seed: u64) -> Result<BenchRow> {
    let cfg = SolveConfig::new(variant);
    let grid = full_grid();
    let work = (0..tests)
        .map(|i| {
            let spec = &grid[i % grid.len()];
            test_for_seed(spec, test_seed(seed, spec.condition_id(), i as u64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let started = Instant::now();
    let correct = pool.install(|| {
        work.par_iter()
            .map(|(test, init)| -> Result<bool> {
                let mut bundle = ModelBundle::<f32>::new(cfg.model, *init)?;
                Ok(solve_test(&mut bundle, test, &cfg)?.correct)
            })
            .collect::<Result<Vec<bool>>>()
    })?;
    let seconds = started.elapsed().as_secs_f64();
    Ok(BenchRow {
        variant,
        threads,
        tests,
        seconds,
        tests_per_sec: tests as f64 / seconds.max(1e-9),
        accuracy: correct.iter().filter(|&&c| c).count() as f64 / tests as f64,
    })
}

fn bench(a: &BenchArgs) -> Result<Outcome> {
    if a.tests == 0 || a.thread_counts.contains(&0) || a.models.is_empty() {
        return Err(usage(
            "--tests, --thread-counts and --models must be non-empty and positive",
        ));
    }
    let seed = a.common.seed;
    let mut out = Outputs::new(&a.common.out)?;
    let host = host_note();
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &variant in &a.models {
        for &threads in &a.thread_counts {
            let r = bench_one(variant, a.tests, threads, seed)?;
            println!(
                "{:16} threads {threads:>2}: {:8.2} tests/s (accuracy {:.3}, {host})",
                variant.id(),
                r.tests_per_sec,
                r.accuracy
            );
            rows.push(vec![
                variant.id(),
                threads.to_string(),
                a.tests.to_string(),
                format!("{:.3}", r.seconds),
                format!("{:.3}", r.tests_per_sec),
                fmt(r.accuracy),
                host.clone(),
            ]);
            results.push(r);
        }
    }
    out.write(
        "bench.csv",
        &csv_bytes(
            &[
                "variant",
                "threads",
                "tests",
                "seconds",
                "tests_per_sec",
                "accuracy",
                "host",
            ],
            &rows,
        )?,
    )?;
    let single = |v: Variant| {
        results
            .iter()
            .find(|r| r.variant == v && r.threads == 1)
            .map(|r| r.tests_per_sec)
    };
    let mut checks = check::bench_checks(single(Variant::Mcpc), single(Variant::LstmCpc));
    for &v in &a.models {
        let accs: Vec<f64> = results.iter().filter(|r| r.variant == v).map(|r| r.accuracy).collect();
        if accs.len() > 1 {
            checks.push(Check::new(
                format!("{v} accuracy independent of thread count"),
                accs.iter().all(|&x| x == accs[0]),
                format!("{accs:?}"),
            ));
        }
    }
    out.finish("bench", a, seed)?;
    Ok(Outcome { checks })
}
