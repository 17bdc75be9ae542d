//! Comparison suites.
//!
//! * `sample_transfer`: the four sample modes, full model, final checkpoint.
//! * `adaptive_ablation`: full model, gate disabled, intensity disabled,
//!   final checkpoint.
//! * `transfer_setting`: one-time and continual transfer at every
//!   checkpoint.
//!
//! Per-seed rows come first, ordered by (experiment, seed, window), then one
//! aggregate row per cell in the same experiment order.

use std::str::FromStr;

use crate::error::{EcatError, Result};
use crate::harness::metrics::{aggregate, MetricsRow};
use crate::trainer::{run_with_context, ExperimentConfig, SampleMode, SeedContext, TransferMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteKind {
    SampleTransfer,
    AdaptiveAblation,
    TransferSetting,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 3] =
        [SuiteKind::SampleTransfer, SuiteKind::AdaptiveAblation, SuiteKind::TransferSetting];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteKind::SampleTransfer => "sample_transfer",
            SuiteKind::AdaptiveAblation => "adaptive_ablation",
            SuiteKind::TransferSetting => "transfer_setting",
        }
    }

    fn final_checkpoint_only(self) -> bool {
        self != SuiteKind::TransferSetting
    }
}

impl FromStr for SuiteKind {
    type Err = EcatError;
    fn from_str(s: &str) -> Result<Self> {
        SuiteKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            EcatError::Config(format!("unknown suite {s:?} (sample_transfer | adaptive_ablation | transfer_setting)"))
        })
    }
}

/// One cell of a suite.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
}

/// The cells of `kind` derived from `base`.
pub fn suite_specs(kind: SuiteKind, base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<ExperimentSpec>> {
    if seeds.is_empty() {
        return Err(EcatError::Config("suite needs at least one seed".into()));
    }
    let cell = |name: String, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut config = base.clone();
        f(&mut config);
        config.name = name.clone();
        ExperimentSpec { name, config, seeds: seeds.to_vec() }
    };
    let specs = match kind {
        SuiteKind::SampleTransfer => {
            SampleMode::ALL.into_iter().map(|m| cell(m.as_str().to_string(), &|c| c.train.sample_mode = m)).collect()
        }
        SuiteKind::AdaptiveAblation => vec![
            cell("full".into(), &|c| {
                c.train.disable_gate = false;
                c.train.disable_intensity = false;
            }),
            cell("disable_gate".into(), &|c| {
                c.train.disable_gate = true;
                c.train.disable_intensity = false;
            }),
            cell("disable_intensity".into(), &|c| {
                c.train.disable_gate = false;
                c.train.disable_intensity = true;
            }),
        ],
        SuiteKind::TransferSetting => TransferMode::ALL
            .into_iter()
            .map(|m| cell(m.as_str().to_string(), &|c| c.train.transfer_mode = m))
            .collect(),
    };
    Ok(specs)
}

/// `f` over `items` on up to `available_parallelism` threads, results in
/// input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("suite worker panicked")).collect()
    })
}

/// Run `kind` on already prepared seed contexts; all cells of one seed
/// share that seed's data and source models. Seeds run in parallel.
pub fn run_suite_with_contexts(
    kind: SuiteKind,
    base: &ExperimentConfig,
    contexts: &[SeedContext],
) -> Result<Vec<MetricsRow>> {
    let seeds: Vec<u64> = contexts.iter().map(|c| c.seed).collect();
    let specs = suite_specs(kind, base, &seeds)?;
    let per_seed = par_map(contexts, |ctx| {
        specs
            .iter()
            .map(|spec| {
                let mut cfg = spec.config.clone();
                cfg.train.seed = ctx.seed;
                let mut rows = run_with_context(&cfg, ctx)?;
                if kind.final_checkpoint_only() {
                    rows = rows.split_off(rows.len().saturating_sub(1));
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    for cell in 0..specs.len() {
        for seed_rows in &per_seed {
            runs.extend(seed_rows[cell].iter().cloned());
        }
    }
    let agg = aggregate(&runs);
    runs.extend(agg);
    Ok(runs)
}

/// Prepare one context per seed, in parallel.
pub fn prepare_contexts(base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<SeedContext>> {
    par_map(seeds, |&s| SeedContext::prepare(base, s)).into_iter().collect()
}

pub fn run_suite(kind: SuiteKind, base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<MetricsRow>> {
    if seeds.is_empty() {
        return Err(EcatError::Config("suite needs at least one seed".into()));
    }
    run_suite_with_contexts(kind, base, &prepare_contexts(base, seeds)?)
}
