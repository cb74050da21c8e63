//! Experiment configuration (TOML).
//!
//! Every section has defaults, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use qsurrogate::clustering::KMeansConfig;
use qsurrogate::embed::EmbeddingConfig;
use qsurrogate::femgen::{build_frame, FrameConfig, LoadConfig, SensorSpec};
use qsurrogate::nn::{build_variant, ArchConfig, TrainConfig, VariantTag};
use qsurrogate::qsim::{Axis, Topology};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub femgen: FemgenSection,
    pub embedding: EmbeddingConfig,
    pub quantum: QuantumSection,
    pub nn: NnSection,
    pub clustering: ClusteringSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FemgenSection {
    pub samples: usize,
    pub frame: FrameConfig,
    pub loads: LoadConfig,
    /// rad
    pub sensor_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumSection {
    /// Overrides the per-variant qubit count.
    pub qubits: Option<usize>,
    pub layers: usize,
    pub axes: Vec<Axis>,
    pub topology: Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnSection {
    pub variants: Vec<VariantTag>,
    pub hidden: Vec<usize>,
    /// Share of the dataset held out for the final test metrics.
    pub test_fraction: f64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringSection {
    pub k_min: usize,
    pub k_max: usize,
    /// Hidden width used by the clustered variants.
    pub final_k: usize,
    /// Hidden layer replaced by `final_k`; the last one when absent.
    pub cluster_layer: Option<usize>,
    /// Epoch budget of the MLP trained for every k in the sweep.
    pub sweep_epochs: usize,
    pub kmeans: KMeansConfig,
}

/// Paths relative to the output directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub dataset: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            femgen: FemgenSection::default(),
            embedding: EmbeddingConfig::default(),
            quantum: QuantumSection::default(),
            nn: NnSection::default(),
            clustering: ClusteringSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl Default for FemgenSection {
    fn default() -> Self {
        Self {
            samples: 10_000,
            frame: FrameConfig::default(),
            loads: LoadConfig::default(),
            sensor_noise: 0.0,
        }
    }
}

impl Default for QuantumSection {
    fn default() -> Self {
        Self {
            qubits: None,
            layers: 10,
            axes: vec![Axis::Y],
            topology: Topology::Ring,
        }
    }
}

impl Default for NnSection {
    fn default() -> Self {
        Self {
            variants: VariantTag::ALL.to_vec(),
            hidden: vec![64, 32],
            test_fraction: 0.2,
            train: TrainConfig::default(),
        }
    }
}

impl Default for ClusteringSection {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 10,
            final_k: 7,
            cluster_layer: None,
            sweep_epochs: 30,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            dataset: "dataset.csv".into(),
            checkpoints: "checkpoints".into(),
            reports: "reports".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The configuration with every default spelled out.
    pub fn effective_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            hidden: self.nn.hidden.clone(),
            cluster_k: self.clustering.final_k,
            cluster_layer: self.clustering.cluster_layer,
            qubits: self.quantum.qubits,
            layers: self.quantum.layers,
            axes: self.quantum.axes.clone(),
            topology: self.quantum.topology,
            embedding: self.embedding,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.nn.train.clone()
        }
    }

    pub fn sensor_spec(&self) -> SensorSpec {
        SensorSpec {
            noise_std: self.femgen.sensor_noise,
            ..SensorSpec::default_for_bays(self.femgen.frame.bays)
        }
    }

    /// Number of model outputs implied by the frame: three translations per node.
    pub fn output_dim(&self) -> CliResult<usize> {
        Ok(3 * build_frame(&self.femgen.frame)?.n_nodes())
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.femgen.samples == 0 {
            return bad("femgen.samples must be positive".into());
        }
        let l = &self.femgen.loads;
        if !(0.0 < l.material_min && l.material_min <= l.material_max) {
            return bad("femgen.loads material range is empty or non-positive".into());
        }
        if !(0.0 <= l.wind_operating_limit && l.wind_operating_limit <= l.wind_max) {
            return bad("femgen.loads wind limits are inconsistent".into());
        }
        if !(self.femgen.sensor_noise >= 0.0) {
            return bad("femgen.sensor_noise must be non-negative".into());
        }
        if !(self.nn.test_fraction > 0.0 && self.nn.test_fraction < 1.0) {
            return bad("nn.test_fraction must lie in (0, 1)".into());
        }
        if self.nn.variants.is_empty() {
            return bad("nn.variants is empty".into());
        }
        self.train_config().validate()?;
        let c = &self.clustering;
        if !(2 <= c.k_min && c.k_min <= c.k_max && c.k_max <= 12) {
            return bad("clustering k range must satisfy 2 <= k_min <= k_max <= 12".into());
        }
        if c.sweep_epochs == 0 {
            return bad("clustering.sweep_epochs must be positive".into());
        }
        let model = build_frame(&self.femgen.frame)?;
        let spec = self.sensor_spec();
        spec.validate(&model)?;
        let outputs = 3 * model.n_nodes();
        // Building every variant checks embedding width, qubit count and
        // first dense width against each other.
        for &tag in &self.nn.variants {
            build_variant(tag, spec.len(), outputs, &self.arch())
                .map_err(|e| CliError::Config(format!("{tag}: {e}")))?;
        }
        Ok(())
    }

    pub fn resolve(&self, out_dir: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            out_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn effective_dump_round_trips() {
        let mut c = ExperimentConfig::default();
        c.embedding.projection = Some(8);
        c.nn.variants = vec![VariantTag::PolySpdHcClustered];
        let text = c.effective_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("sed = 1").is_err());
        assert!(ExperimentConfig::from_toml("[quantum]\nlayrs = 3").is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = ExperimentConfig::from_toml(
            "seed = 7\n[femgen.frame]\nbays = 4\n[quantum]\nlayers = 3\naxes = [\"y\", \"Z\"]\n[nn]\nvariants = [\"BaselineMLP\"]",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.femgen.frame.bays, 4);
        assert_eq!(c.femgen.frame.span, FrameConfig::default().span);
        assert_eq!(c.quantum.axes, vec![Axis::Y, Axis::Z]);
        assert_eq!(c.nn.variants, vec![VariantTag::BaselineMlp]);
        c.validate().unwrap();
    }

    #[test]
    fn inconsistent_dimensions_fail_validation() {
        let mut c = ExperimentConfig::default();
        c.embedding.projection = Some(8);
        c.quantum.qubits = Some(5);
        c.nn.variants = vec![VariantTag::PolySpdHcClustered];
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.quantum.qubits = None;
        c.clustering.k_max = 20;
        assert!(c.validate().is_err());
    }
}
