use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{metrics, HybridModel, MetricsReport};
use crate::error::{Error, Result};
use crate::stats::Standardizer;

const FORMAT: &str = "qsurrogate-checkpoint";
const VERSION: u32 = 1;

/// Hex SHA-256 of a value's JSON form.
pub fn config_hash(value: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Everything needed to run a trained model on raw sensor readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: HybridModel,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn new(
        model: HybridModel,
        input_scaler: Standardizer,
        target_scaler: Standardizer,
        config_hash: String,
    ) -> Result<Self> {
        if input_scaler.dim() != model.variant.input_dim
            || target_scaler.dim() != model.variant.output_dim
        {
            return Err(Error::invalid("scaler widths do not match the model"));
        }
        Ok(Self {
            format: FORMAT.into(),
            version: VERSION,
            model,
            input_scaler,
            target_scaler,
            config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.model.variant.validate()?;
        ck.model.check()?;
        Ok(ck)
    }

    /// Raw sensor readings in, raw displacements out.
    pub fn predict(&self, sensors: &[f64]) -> Result<Vec<f64>> {
        let x = self.input_scaler.transform(sensors);
        let y = self.model.forward(&x)?;
        Ok(self.target_scaler.inverse(&y))
    }

    /// Standardised-space metrics on raw inputs and targets.
    pub fn evaluate(&self, sensors: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<MetricsReport> {
        let encoded = self
            .model
            .encode_all(&self.input_scaler.transform_all(sensors))?;
        let preds = self.model.predict_encoded(&encoded)?;
        metrics(&preds, &self.target_scaler.transform_all(targets))
    }
}
