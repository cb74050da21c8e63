//! The variant comparison table.

use std::io::Write;

use qsurrogate::nn::{MetricsReport, VariantTag};
use serde::Serialize;

use crate::error::CliResult;
use crate::pipeline::Scores;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub variant: VariantTag,
    pub params: usize,
    pub scores: Option<Scores>,
    pub train_seconds: f64,
    pub infer_ms: f64,
    /// Failure message when the variant could not be trained.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

const METRIC_COLUMNS: [&str; 5] = ["MSE", "RMSE", "R2", "NRMSE(range)", "NRMSE(std)"];

fn metric_cells(m: &MetricsReport) -> [String; 5] {
    [
        format!("{:.4e}", m.mse),
        format!("{:.4e}", m.rmse),
        format!("{:.4}", m.r2),
        format!("{:.4e}", m.nrmse_range),
        format!("{:.4e}", m.nrmse_std),
    ]
}

fn exact(v: f64) -> String {
    format!("{v:e}")
}

impl ComparisonTable {
    pub fn row(&self, tag: VariantTag) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.variant == tag)
    }

    /// Aligned plain text. Metric columns are in standardised units; the raw
    /// RMSE is in millimetres.
    pub fn render(&self) -> String {
        let mut header = vec!["Model".to_string()];
        header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
        header.extend(["RMSE [mm]", "Train [s]", "Infer [ms]"].map(String::from));
        let mut lines = vec![header];
        let mut notes = Vec::new();
        for r in &self.rows {
            let mut cells = vec![r.variant.name().to_string()];
            match &r.scores {
                Some(s) => {
                    cells.extend(metric_cells(&s.standardized));
                    cells.push(format!("{:.4}", s.raw.rmse * 1e3));
                }
                None => cells.extend(std::iter::repeat_n("-".to_string(), 6)),
            }
            cells.push(format!("{:.1}", r.train_seconds));
            cells.push(format!("{:.3}", r.infer_ms));
            if let Some(n) = &r.note {
                notes.push(format!("{}: {n}", r.variant));
            }
            lines.push(cells);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let row: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    if c == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(row.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        for n in notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }

    /// Machine-readable table without wall-clock columns, so reruns are byte-identical.
    pub fn write_csv(&self, w: impl Write) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "model",
            "params",
            "mse",
            "rmse",
            "r2",
            "nrmse_range",
            "nrmse_std",
            "raw_mse_m2",
            "raw_rmse_m",
            "raw_r2",
            "note",
        ])?;
        for r in &self.rows {
            let mut rec = vec![r.variant.name().to_string(), r.params.to_string()];
            match &r.scores {
                Some(s) => {
                    let m = &s.standardized;
                    rec.extend([m.mse, m.rmse, m.r2, m.nrmse_range, m.nrmse_std].map(exact));
                    rec.extend([s.raw.mse, s.raw.rmse, s.raw.r2].map(exact));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 8)),
            }
            rec.push(r.note.clone().unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_timings(&self, w: impl Write) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "train_seconds", "infer_ms_per_sample"])?;
        for r in &self.rows {
            out.write_record([
                r.variant.name().to_string(),
                exact(r.train_seconds),
                exact(r.infer_ms),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
