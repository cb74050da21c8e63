//! Dense and hybrid quantum-classical networks, training and metrics.
//!
//! A model is a chain of [`Block`]s. Quantum blocks read out `⟨Z⟩` on every
//! qubit and are differentiated with the parameter-shift rule; everything
//! else uses ordinary reverse-mode accumulation. All parameters live in one
//! flat vector (see [`HybridModel::params`]) so the optimiser is agnostic to
//! the block types.

mod checkpoint;
mod layers;
mod metrics;
mod model;
mod optim;
mod train;

pub use checkpoint::{config_hash, Checkpoint};
pub use layers::{Activation, Block, DenseLayer, QuantumBlock, QuantumEncoding};
pub use metrics::{metrics, mse_loss, MetricsReport};
pub use model::{
    build_variant, ArchConfig, BlockSpec, HybridModel, InputMap, ModelVariant, VariantTag,
};
pub use optim::{adam_step, AdamConfig, AdamState, EarlyStopping, StopDecision};
pub use train::{split_indices, train, train_with, EpochRecord, TrainConfig, TrainOutcome};
