//! Shared steps: splitting a dataset, fitting a variant, scoring it.

use std::time::Instant;

use crate::error::CliResult;
use qsurrogate::femgen::Dataset;
use qsurrogate::nn::{
    build_variant, config_hash, metrics, train_with, ArchConfig, Checkpoint, EpochRecord,
    HybridModel, MetricsReport, TrainConfig, TrainOutcome, VariantTag,
};
use qsurrogate::seed::{self, Stream};
use qsurrogate::stats::Standardizer;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// A dataset split into training and held-out test rows, with scalers fitted on the training rows.
pub struct Prepared {
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<Vec<f64>>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<Vec<f64>>,
    pub test_rows: Vec<usize>,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
}

impl Prepared {
    pub fn new(ds: &Dataset, test_fraction: f64, seed: u64) -> CliResult<Self> {
        let xs = ds.inputs();
        let ys = ds.targets();
        let (train, test) =
            qsurrogate::nn::split_indices(xs.len(), test_fraction, seed, Stream::Split)?;
        let pick = |rows: &[Vec<f64>], idx: &[usize]| {
            idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()
        };
        let train_x = pick(&xs, &train);
        let train_y = pick(&ys, &train);
        let input_scaler = Standardizer::fit(&train_x)?;
        let target_scaler = Standardizer::fit(&train_y)?;
        Ok(Self {
            test_x: pick(&xs, &test),
            test_y: pick(&ys, &test),
            test_rows: test,
            train_x,
            train_y,
            input_scaler,
            target_scaler,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_scaler.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.target_scaler.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    /// Standardised displacement space.
    pub standardized: MetricsReport,
    /// Metres.
    pub raw: MetricsReport,
}

/// Scores a checkpoint on raw test rows.
pub fn score(
    ck: &Checkpoint,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> CliResult<(Scores, Vec<Vec<f64>>)> {
    let enc = ck.model.encode_all(&ck.input_scaler.transform_all(xs))?;
    let preds_std = ck.model.predict_encoded(&enc)?;
    let standardized = metrics(&preds_std, &ck.target_scaler.transform_all(ys))?;
    let preds: Vec<Vec<f64>> = preds_std
        .iter()
        .map(|p| ck.target_scaler.inverse(p))
        .collect();
    let raw = metrics(&preds, ys)?;
    Ok((Scores { standardized, raw }, preds))
}

pub struct Fitted {
    pub checkpoint: Checkpoint,
    pub outcome: TrainOutcome,
    pub scores: Scores,
    /// Raw-unit predictions for the test rows, in test order.
    pub predictions: Vec<Vec<f64>>,
    pub train_seconds: f64,
    /// Mean wall-clock time per test sample.
    pub infer_ms: f64,
}

/// Hash identifying everything that determines a trained model.
pub fn run_hash(
    tag: VariantTag,
    arch: &ArchConfig,
    train: &TrainConfig,
    dataset_hash: &str,
) -> CliResult<String> {
    Ok(config_hash(&(tag, arch, train, dataset_hash))?)
}

pub fn fit_variant(
    prep: &Prepared,
    tag: VariantTag,
    arch: &ArchConfig,
    train: &TrainConfig,
    dataset_hash: &str,
    observer: impl FnMut(&EpochRecord),
) -> CliResult<Fitted> {
    let variant = build_variant(tag, prep.input_dim(), prep.output_dim(), arch)?;
    let xs = prep.input_scaler.transform_all(&prep.train_x);
    let ys = prep.target_scaler.transform_all(&prep.train_y);
    let start = Instant::now();
    let model = HybridModel::build(variant, &xs, &mut seed::rng(train.seed, Stream::Init))?;
    let encoded = model.encode_all(&xs)?;
    let outcome = train_with(model, &encoded, &ys, train, observer)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let checkpoint = Checkpoint::new(
        outcome.model.clone(),
        prep.input_scaler.clone(),
        prep.target_scaler.clone(),
        run_hash(tag, arch, train, dataset_hash)?,
    )?;
    let start = Instant::now();
    let (scores, predictions) = score(&checkpoint, &prep.test_x, &prep.test_y)?;
    let infer_ms = 1e3 * start.elapsed().as_secs_f64() / prep.test_x.len() as f64;
    Ok(Fitted {
        checkpoint,
        outcome,
        scores,
        predictions,
        train_seconds,
        infer_ms,
    })
}

/// SHA-256 over the header fields and the bit patterns of every value.
pub fn dataset_hash(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    let head = &ds.header;
    h.update(format!(
        "{}|{}|{}|{}|{}",
        head.model_hash, head.n_nodes, head.sensors, head.seed, head.units
    ));
    for p in &ds.pairs {
        for v in p.sensors.iter().chain(&p.displacements) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
