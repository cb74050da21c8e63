//! Row-by-row inference over a sensor stream.
//!
//! Each row goes through the same five steps: acquire (parse), embed
//! (standardise and encode), quantum features, classical mapping, emit.

use std::fs::{self, File};
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use qsurrogate::nn::Checkpoint;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default)]
pub struct InferOptions {
    /// Keep reading after end of input, waiting for appended rows.
    pub follow: bool,
    /// In follow mode, stop after this long without new input.
    pub idle_timeout: Option<Duration>,
    /// Write the quantum block's output state for every row here.
    pub dump_state: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferSummary {
    pub processed: usize,
    pub skipped: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

enum Row {
    Values(Vec<f64>),
    Blank,
    Header,
    Malformed(String),
}

fn parse_row(line: &str, width: usize, first: bool) -> Row {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Row::Blank;
    }
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let parsed: Vec<Option<f64>> = fields
        .iter()
        .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    if first && parsed.iter().all(Option::is_none) {
        return Row::Header;
    }
    if fields.len() != width {
        return Row::Malformed(format!("expected {width} fields, found {}", fields.len()));
    }
    match parsed.into_iter().collect::<Option<Vec<f64>>>() {
        Some(v) => Row::Values(v),
        None => Row::Malformed("non-numeric or non-finite field".into()),
    }
}

/// Runs the checkpoint over every row of `input`, writing `row,values…`
/// lines to `out` and warnings to `warn`.
pub fn infer_stream(
    ck: &Checkpoint,
    mut input: impl BufRead,
    mut out: impl Write,
    mut warn: impl Write,
    opts: &InferOptions,
) -> CliResult<InferSummary> {
    let width = ck.model.variant.input_dim;
    if let Some(dir) = &opts.dump_state {
        if !ck.model.variant.tag.is_quantum() {
            return Err(CliError::Config(format!(
                "{} has no quantum block to dump",
                ck.model.variant.tag
            )));
        }
        fs::create_dir_all(dir)?;
    }
    let mut latencies = Vec::new();
    let mut skipped = 0;
    let mut line_no = 0usize;
    let mut seen_data = false;
    let mut buf = String::new();
    let mut idle_since = Instant::now();
    loop {
        let n = input.read_line(&mut buf)?;
        let complete = buf.ends_with('\n');
        if n == 0 || !complete {
            if !opts.follow {
                if buf.is_empty() {
                    break;
                }
            } else {
                if opts.idle_timeout.is_some_and(|t| idle_since.elapsed() >= t) {
                    break;
                }
                thread::sleep(Duration::from_millis(20));
                continue;
            }
        }
        idle_since = Instant::now();
        line_no += 1;
        let started = Instant::now();
        // 1. acquire
        let row = parse_row(&buf, width, !seen_data);
        buf.clear();
        let values = match row {
            Row::Values(v) => v,
            Row::Blank => continue,
            Row::Header => {
                seen_data = true;
                continue;
            }
            Row::Malformed(why) => {
                seen_data = true;
                skipped += 1;
                writeln!(warn, "warning: line {line_no} skipped: {why}")?;
                continue;
            }
        };
        seen_data = true;
        let index = latencies.len();
        // 2. embed
        let x = ck.input_scaler.transform(&values);
        let encoded = ck.model.encode(&x)?;
        // 3–4. quantum features and classical mapping
        let y = ck
            .target_scaler
            .inverse(&ck.model.forward_encoded(&encoded)?);
        // 5. emit
        let cells: Vec<String> = y.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{index},{}", cells.join(","))?;
        if opts.follow {
            out.flush()?;
        }
        latencies.push(started.elapsed().as_secs_f64() * 1e3);
        if let Some(dir) = &opts.dump_state {
            if let Some(state) = ck.model.quantum_state(&x)? {
                state.dump(File::create(dir.join(format!("state_{index}.csv")))?)?;
            }
        }
    }
    out.flush()?;
    let processed = latencies.len();
    latencies.sort_by(f64::total_cmp);
    Ok(InferSummary {
        processed,
        skipped,
        median_ms: percentile(&latencies, 0.5),
        p95_ms: percentile(&latencies, 0.95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_by_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 10.0);
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn row_classification() {
        assert!(matches!(parse_row("a,b,c", 3, true), Row::Header));
        assert!(matches!(parse_row("1,2", 3, false), Row::Malformed(_)));
        assert!(matches!(parse_row("1,x,3", 3, false), Row::Malformed(_)));
        assert!(matches!(parse_row("1,NaN,3", 3, false), Row::Malformed(_)));
        assert!(matches!(parse_row("# c", 3, false), Row::Blank));
        assert!(
            matches!(parse_row(" 1, 2e-3 ,3\n", 3, false), Row::Values(v) if v == vec![1.0, 2e-3, 3.0])
        );
    }
}
