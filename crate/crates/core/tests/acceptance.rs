//! Acceptance run. Every criterion prints one `PASS` or `FAIL` line to
//! stderr (uncaptured), and the test fails if any criterion fails.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecat::datagen::SampleRecord;
use ecat::harness::{
    auc, benchmark_config, emit, prepare_contexts, run_suite_with_contexts, std_error, MetricsFormat, MetricsRow,
    RowType, SuiteKind,
};
use ecat::models::{Batch, Parameterized};
use ecat::trainer::{gradient_flow, run_experiment, train_step, ExperimentConfig, SampleMode, SeedContext, TrainState};

use common::*;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn check(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Outcome::new(false, format!("panicked: {msg}"))
    });
    let verdict = if out.pass { "PASS" } else { "FAIL" };
    say(&format!("{verdict} [{id}] {name}: {} ({:.1}s)", out.detail, started.elapsed().as_secs_f64()));
    out.pass
}

/// Final-checkpoint AUCs of one suite cell, ordered by seed.
fn cell_aucs(rows: &[MetricsRow], experiment: &str, checkpoint: Option<&str>) -> Vec<f64> {
    let mut v: Vec<(u64, f64)> = rows
        .iter()
        .filter(|r| r.row_type == RowType::Run && r.experiment == experiment)
        .filter(|r| checkpoint.is_none_or(|c| r.checkpoint == c))
        .map(|r| (r.seed.unwrap(), r.auc))
        .collect();
    v.sort_by_key(|(s, _)| *s);
    v.into_iter().map(|(_, a)| a).collect()
}

/// `a - b` paired over seeds: (mean, paired se, unpaired se).
fn gap(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, se) = mean_se(&d);
    let unpaired = (std_error(a).powi(2) + std_error(b).powi(2)).sqrt();
    (m, se, unpaired)
}

fn gap_text(label: &str, g: (f64, f64, f64)) -> String {
    format!("{label} {:+.4} (paired se {:.4}, unpaired se {:.4})", g.0, g.1, g.2)
}

fn gradcheck_criterion() -> Outcome {
    let started = Instant::now();
    let mut worst_op = ("", 0.0f64);
    for seed in 0..10 {
        for (name, err) in op_gradchecks(seed) {
            if err > worst_op.1 {
                worst_op = (name, err);
            }
        }
    }
    let mut worst_loss: f64 = 0.0;
    let mut mirrors = true;
    for (mode, gate_off, intensity_off) in
        [(SampleMode::GstAndDa, false, false), (SampleMode::MergeAll, true, false), (SampleMode::GstAndDa, false, true)]
    {
        let mut cfg = tiny_config();
        cfg.train.sample_mode = mode;
        cfg.train.disable_gate = gate_off;
        cfg.train.disable_intensity = intensity_off;
        let (err, same) = composed_gradcheck(&cfg, 11);
        worst_loss = worst_loss.max(err);
        mirrors &= same;
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        worst_op.1 < FD_TOL && worst_loss < FD_TOL && mirrors && secs < 30.0,
        format!(
            "worst op {} {:.2e}, composed loss {:.2e}, step loss reproduced {mirrors}, {secs:.1}s of 30s",
            worst_op.0, worst_op.1, worst_loss
        ),
    )
}

fn stop_gradient_criterion() -> Outcome {
    let cfg = tiny_config();
    let ctx = SeedContext::prepare(&cfg, 21).unwrap();
    let s_hash = ctx.source.initial.param_hash();
    let mut state = TrainState::new(&cfg, &ctx.source.initial, 21).unwrap();
    let pool: Vec<&SampleRecord> =
        ctx.windows[1..=2].iter().flat_map(|d| d.target_records.iter().chain(&d.source_records)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut leaks, mut unbound, mut touched) = (0, 0, 0);
    for _ in 0..100 {
        let chosen: Vec<&SampleRecord> = pool.choose_multiple(&mut rng, cfg.train.batch_size).copied().collect();
        let batch = Batch::from_records(&ctx.world, &chosen).unwrap();
        let flow = gradient_flow(&state, &batch, &cfg.train).unwrap();
        if flow.l_di.target != 0.0 || flow.l_da.target != 0.0 {
            leaks += 1;
        }
        unbound += flow.unbound_leaves;
        train_step(&mut state, &batch, &cfg.train).unwrap();
        if state.source.param_hash() != s_hash {
            touched += 1;
        }
    }
    Outcome::new(
        leaks == 0 && unbound == 0 && touched == 0,
        format!("100 steps: nonzero T gradient from l_di/l_da in {leaks}, source leaves in graph {unbound}, source changed {touched}"),
    )
}

fn gst_criterion() -> Outcome {
    let started = Instant::now();
    let checked = gst_matches_oracle_on_random_graphs();
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(secs < 10.0, format!("{checked} graph/config pairs equal to path enumeration, {secs:.2}s of 10s"))
}

fn auc_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (scores, labels) = random_auc_instance(&mut rng, 500);
        worst = worst.max((auc(&scores, &labels).unwrap() - pairwise_auc(&scores, &labels)).abs());
    }
    Outcome::new(worst < 1e-12, format!("100 tied instances, worst |diff| {worst:.1e}"))
}

fn transfer_criterion(cfg: &ExperimentConfig, contexts: &[SeedContext], prep: Duration) -> Outcome {
    let started = Instant::now();
    let rows = run_suite_with_contexts(SuiteKind::SampleTransfer, cfg, contexts).unwrap();
    let secs = (started.elapsed() + prep).as_secs_f64();
    let a = |n| cell_aucs(&rows, n, None);
    let (da, gst, only, merge) = (a("gst_and_da"), a("gst_only"), a("only_target"), a("merge_all"));
    let gaps = [
        ("gst_and_da-gst_only", gap(&da, &gst)),
        ("gst_only-only_target", gap(&gst, &only)),
        ("gst_and_da-merge_all", gap(&da, &merge)),
    ];
    let pass = gaps.iter().all(|(_, g)| g.0 > g.1) && secs < 600.0;
    let text: Vec<String> = gaps.iter().map(|(l, g)| gap_text(l, *g)).collect();
    Outcome::new(pass, format!("{}; suite {secs:.0}s of 600s", text.join("; ")))
}

fn ablation_criterion(cfg: &ExperimentConfig, contexts: &[SeedContext]) -> Outcome {
    let rows = run_suite_with_contexts(SuiteKind::AdaptiveAblation, cfg, contexts).unwrap();
    let full = cell_aucs(&rows, "full", None);
    let gaps = [
        ("full-disable_gate", gap(&full, &cell_aucs(&rows, "disable_gate", None))),
        ("full-disable_intensity", gap(&full, &cell_aucs(&rows, "disable_intensity", None))),
    ];
    let text: Vec<String> = gaps.iter().map(|(l, g)| gap_text(l, *g)).collect();
    Outcome::new(gaps.iter().all(|(_, g)| g.0 > g.1), text.join("; "))
}

fn continual_criterion(cfg: &ExperimentConfig, contexts: &[SeedContext]) -> Outcome {
    let last = ecat::trainer::checkpoint_label(2);
    let rows = run_suite_with_contexts(SuiteKind::TransferSetting, cfg, contexts).unwrap();
    let drift = gap(&cell_aucs(&rows, "continual", Some(&last)), &cell_aucs(&rows, "one_time", Some(&last)));

    let mut still = cfg.clone();
    still.world.drift_angle = 0.0;
    let null_contexts = prepare_contexts(&still, &SEEDS).unwrap();
    let rows = run_suite_with_contexts(SuiteKind::TransferSetting, &still, &null_contexts).unwrap();
    let null = gap(&cell_aucs(&rows, "continual", Some(&last)), &cell_aucs(&rows, "one_time", Some(&last)));
    Outcome::new(
        drift.0 > drift.1 && null.0.abs() <= 2.0 * null.1,
        format!(
            "at {last}: {}; {}",
            gap_text("drift continual-one_time", drift),
            gap_text("no-drift continual-one_time", null)
        ),
    )
}

fn stripped_criterion() -> Outcome {
    let mut cfg = benchmark_config();
    cfg.train.loss.alpha = 0.0;
    cfg.train.loss.beta = 0.0;
    cfg.train.disable_gate = true;
    cfg.train.fixed_gate_weight = 0.0;
    cfg.train.sample_mode = SampleMode::OnlyTarget;
    cfg.train.source_epochs = 1;
    let ctx = SeedContext::prepare(&cfg, 7).unwrap();
    let mut state = TrainState::new(&cfg, &ctx.source.initial, 7).unwrap();
    let mut plain = PlainTrainer::new(state.target.clone(), &cfg.train);
    let records: Vec<&SampleRecord> = ctx.windows[1..].iter().flat_map(|d| &d.target_records).collect();
    let mut first_diff = None;
    let mut steps = 0;
    for chunk in records.chunks(cfg.train.batch_size).cycle().take(200) {
        let batch = Batch::from_records(&ctx.world, chunk).unwrap();
        train_step(&mut state, &batch, &cfg.train).unwrap();
        plain.step(&batch);
        steps += 1;
        if first_diff.is_none() && state.target.param_hash() != plain.model.param_hash() {
            first_diff = Some(steps);
        }
    }
    let pass = steps == 200 && first_diff.is_none();
    let detail = match first_diff {
        None => format!("{steps} steps, T parameter bits equal after every step"),
        Some(s) => format!("{steps} steps, first divergence after step {s}"),
    };
    Outcome::new(pass, detail)
}

fn determinism_criterion() -> Outcome {
    let cfg = benchmark_config();
    let dir = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut bytes = 0;
    for run in ["first", "second"] {
        let rows = run_experiment(&cfg).unwrap();
        emit(&rows, &dir.path().join(format!("{run}.csv")), MetricsFormat::Csv).unwrap();
        emit(&rows, &dir.path().join(format!("{run}.json")), MetricsFormat::Json).unwrap();
    }
    for ext in ["csv", "json"] {
        let a = std::fs::read(dir.path().join(format!("first.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("second.{ext}"))).unwrap();
        same &= a == b;
        bytes += a.len();
    }
    Outcome::new(same, format!("two runs of seed {}: csv and json identical {same} ({bytes} bytes)", cfg.train.seed))
}

#[test]
fn acceptance() {
    say("");
    let mut results = Vec::new();
    results.push(check(1, "gradient checks", gradcheck_criterion));
    results.push(check(2, "stop-gradient contracts", stop_gradient_criterion));
    results.push(check(3, "graph expansion oracle", gst_criterion));
    results.push(check(4, "AUC oracle", auc_criterion));

    let cfg = benchmark_config();
    let prep_started = Instant::now();
    let contexts = prepare_contexts(&cfg, &SEEDS).unwrap();
    let prep = prep_started.elapsed();
    results.push(check(5, "sample transfer ordering", || transfer_criterion(&cfg, &contexts, prep)));
    results.push(check(6, "adaptive ablation ordering", || ablation_criterion(&cfg, &contexts)));
    results.push(check(7, "continual beats one-time under drift", || continual_criterion(&cfg, &contexts)));
    drop(contexts);

    results.push(check(8, "stripped equivalence", stripped_criterion));
    results.push(check(9, "byte-identical metrics", determinism_criterion));

    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    say(&format!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
