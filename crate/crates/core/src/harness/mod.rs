//! Evaluation, configuration, comparison suites, and metrics output.

pub mod config;
pub mod metrics;
pub mod report;
pub mod suite;

use crate::error::{EcatError, Result};

pub use config::{apply_override, benchmark_config, config_reference, load_config, parse_config, BENCHMARK_TOML};
pub use metrics::{aggregate, emit, read_metrics, std_error, MetricsFormat, MetricsRow, RowType};
pub use report::render_table;
pub use suite::{prepare_contexts, run_suite, run_suite_with_contexts, suite_specs, ExperimentSpec, SuiteKind};

/// Area under the ROC curve from average ranks:
/// `(sum of positive ranks - n_pos (n_pos + 1) / 2) / (n_pos n_neg)`,
/// which gives tied pairs half credit.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(EcatError::Dimension(format!("auc: {} scores, {} labels", scores.len(), labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(EcatError::Data(format!("auc: label {l} is not 0 or 1")));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EcatError::NonFinite(format!("auc: score {s}")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EcatError::Degenerate(format!(
            "auc needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += avg * pos as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}
