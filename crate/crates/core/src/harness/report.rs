//! Plain-text rendering of a metrics table.

use crate::harness::metrics::{MetricsRow, RowType};

fn flag(b: bool) -> &'static str {
    if b {
        "off"
    } else {
        "on"
    }
}

/// Aligned table with one line per row; aggregate rows show `mean ± se`.
pub fn render_table(rows: &[MetricsRow]) -> String {
    let header = [
        "experiment",
        "seed",
        "checkpoint",
        "sample_mode",
        "transfer",
        "gate",
        "intensity",
        "auc",
        "l_y",
        "l_di",
        "l_da",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let (seed, auc) = match r.row_type {
            RowType::Run => (r.seed.map(|s| s.to_string()).unwrap_or_default(), format!("{:.4}", r.auc)),
            RowType::Aggregate => {
                (format!("mean of {}", r.n_seeds), format!("{:.4} ± {:.4}", r.auc, r.auc_stderr.unwrap_or(0.0)))
            }
        };
        cells.push(vec![
            r.experiment.clone(),
            seed,
            r.checkpoint.clone(),
            r.sample_mode.clone(),
            r.transfer_mode.clone(),
            flag(r.disable_gate).into(),
            flag(r.disable_intensity).into(),
            auc,
            format!("{:.4}", r.l_y),
            format!("{:.4}", r.l_di),
            format!("{:.4}", r.l_da),
        ]);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> =
            row.iter().zip(&widths).map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count()))).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
            out.push('\n');
        }
    }
    out
}
