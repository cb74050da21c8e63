use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::optim::{adam_step, AdamConfig, AdamState, EarlyStopping, StopDecision};
use super::{mse_loss, HybridModel};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            l2: 1e-5,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            min_delta: 1e-7,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_epsilon", self.adam_epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) || !(self.min_delta >= 0.0) {
            return Err(Error::invalid("l2 and min_delta must be non-negative"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid(
                "batch_size, max_epochs and patience must be positive",
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(Error::invalid("validation_fraction must lie in (0, 0.5]"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses, L2 term included.
    pub train_loss: f64,
    /// Data loss on the validation split.
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: HybridModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Seeded shuffle into `(fit, validation)` index sets.
pub fn split_indices(
    n: usize,
    fraction: f64,
    seed: u64,
    stream: Stream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = ((n as f64) * fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::invalid(format!(
            "cannot hold out a fraction {fraction} of {n} samples"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, stream));
    let fit = idx.split_off(n_val);
    Ok((fit, idx))
}

fn gather(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

/// Trains on already encoded inputs (see [`HybridModel::encode_all`]).
pub fn train(
    model: HybridModel,
    encoded: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, encoded, targets, cfg, |_| {})
}

/// As [`train`], calling `observer` after every epoch.
pub fn train_with(
    mut model: HybridModel,
    encoded: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if encoded.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: encoded.len(),
            actual: targets.len(),
            context: "training targets",
        });
    }
    let (fit_idx, val_idx) = split_indices(
        encoded.len(),
        cfg.validation_fraction,
        cfg.seed,
        Stream::Split,
    )?;
    let val_x = gather(encoded, &val_idx);
    let val_y = gather(targets, &val_idx);

    let adam = cfg.adam();
    let mut state = AdamState::new(model.param_count());
    let mut params = model.params();
    let mut best_params = params.clone();
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut batch_rng = seed::rng(cfg.seed, Stream::Batching);
    let mut order = fit_idx;
    let mut history = Vec::new();
    let mut last_finite = f64::NAN;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut batch_rng);
        let mut weighted = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx = gather(encoded, batch);
            let by = gather(targets, batch);
            let (loss, grad) = model.loss_and_grad(&bx, &by, cfg.l2)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, last_finite });
            }
            weighted += loss * batch.len() as f64;
            adam_step(&mut params, &grad, &mut state, &adam);
            model
                .set_params(&params)
                .map_err(|_| Error::Divergence { epoch, last_finite })?;
        }
        let train_loss = weighted / order.len() as f64;
        let val_loss = mse_loss(&model.predict_encoded(&val_x)?, &val_y)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, last_finite });
        }
        last_finite = val_loss;
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        history.push(record);
        observer(&record);
        match stopper.update(epoch, val_loss) {
            StopDecision::Improved => best_params.clone_from(&params),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    model.set_params(&best_params)?;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        best_val_loss: stopper.best(),
        stopped_early,
    })
}
