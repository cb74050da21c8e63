use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{Activation, Block, DenseLayer, QuantumBlock, QuantumEncoding};
use crate::embed::{Embedder, EmbeddingConfig};
use crate::error::{ensure_finite, Error, Result};
use crate::qsim::{Axis, CircuitConfig, StateVector, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantTag {
    #[serde(rename = "BaselineMLP")]
    BaselineMlp,
    #[serde(rename = "QuantumClassical")]
    QuantumClassical,
    #[serde(rename = "ClassicalQuantum")]
    ClassicalQuantum,
    #[serde(rename = "ClusteredMLP")]
    ClusteredMlp,
    #[serde(rename = "PolySPD_Clustered")]
    PolySpdClustered,
    #[serde(rename = "PolySPD_HC_Clustered")]
    PolySpdHcClustered,
}

impl VariantTag {
    pub const ALL: [VariantTag; 6] = [
        VariantTag::BaselineMlp,
        VariantTag::QuantumClassical,
        VariantTag::ClassicalQuantum,
        VariantTag::ClusteredMlp,
        VariantTag::PolySpdClustered,
        VariantTag::PolySpdHcClustered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantTag::BaselineMlp => "BaselineMLP",
            VariantTag::QuantumClassical => "QuantumClassical",
            VariantTag::ClassicalQuantum => "ClassicalQuantum",
            VariantTag::ClusteredMlp => "ClusteredMLP",
            VariantTag::PolySpdClustered => "PolySPD_Clustered",
            VariantTag::PolySpdHcClustered => "PolySPD_HC_Clustered",
        }
    }

    pub fn is_quantum(self) -> bool {
        !matches!(self, VariantTag::BaselineMlp | VariantTag::ClusteredMlp)
    }

    pub fn is_clustered(self) -> bool {
        matches!(
            self,
            VariantTag::ClusteredMlp
                | VariantTag::PolySpdClustered
                | VariantTag::PolySpdHcClustered
        )
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantTag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = VariantTag::ALL.iter().map(|t| t.name()).collect();
                Error::invalid(format!(
                    "unknown variant `{s}` (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Knobs shared by all variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    /// Hidden widths of the classical stack.
    pub hidden: Vec<usize>,
    /// Width forced onto one hidden layer by the clustered variants.
    pub cluster_k: usize,
    /// Which hidden layer takes `cluster_k`; `None` means the last one.
    pub cluster_layer: Option<usize>,
    /// Qubit override. Defaults: the input width (QuantumClassical), 8
    /// (ClassicalQuantum), `min(7, d')` (PolySPD_Clustered) and
    /// `⌈log₂ d'²⌉` (PolySPD_HC_Clustered).
    pub qubits: Option<usize>,
    pub layers: usize,
    pub axes: Vec<Axis>,
    pub topology: Topology,
    pub embedding: EmbeddingConfig,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            cluster_k: 7,
            cluster_layer: None,
            qubits: None,
            layers: 10,
            axes: vec![Axis::Y],
            topology: Topology::Ring,
            embedding: EmbeddingConfig::default(),
        }
    }
}

impl ArchConfig {
    fn circuit(&self, n_qubits: usize) -> CircuitConfig {
        CircuitConfig {
            n_qubits,
            layers: self.layers,
            axes: self.axes.clone(),
            topology: self.topology,
        }
    }

    fn hidden_for(&self, tag: VariantTag) -> Result<Vec<usize>> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid(
                "hidden widths must be non-empty and positive",
            ));
        }
        let mut hidden = self.hidden.clone();
        if tag.is_clustered() {
            if self.cluster_k == 0 {
                return Err(Error::invalid("cluster_k must be positive"));
            }
            let at = self.cluster_layer.unwrap_or(hidden.len() - 1);
            let slot = hidden.get_mut(at).ok_or_else(|| {
                Error::invalid(format!("cluster_layer {at} is outside the hidden stack"))
            })?;
            *slot = self.cluster_k;
        }
        Ok(hidden)
    }
}

/// Parameter-free map from a standardised sensor vector to the first block's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMap {
    Identity,
    /// Leading `n` diagonal entries of ρ, times π.
    DensityDiagonal {
        n: usize,
    },
    /// Unit-norm `vec(ρ)`.
    HilbertSchmidt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    Quantum {
        encoding: QuantumEncoding,
        circuit: CircuitConfig,
    },
}

impl BlockSpec {
    pub fn param_count(&self) -> usize {
        match self {
            BlockSpec::Dense {
                inputs, outputs, ..
            } => inputs * outputs + outputs,
            BlockSpec::Quantum { circuit, .. } => circuit.param_count(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            BlockSpec::Dense { outputs, .. } => *outputs,
            BlockSpec::Quantum { circuit, .. } => circuit.n_qubits,
        }
    }
}

/// Architecture of one model, independent of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariant {
    pub tag: VariantTag,
    pub input_dim: usize,
    pub output_dim: usize,
    pub input_map: InputMap,
    pub embedding: Option<EmbeddingConfig>,
    pub blocks: Vec<BlockSpec>,
}

impl ModelVariant {
    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(BlockSpec::param_count).sum()
    }

    /// Width of the vector entering the first block.
    pub fn encoded_dim(&self) -> usize {
        match self.blocks.first() {
            Some(BlockSpec::Dense { inputs, .. }) => *inputs,
            Some(BlockSpec::Quantum { circuit, .. }) => match self.input_map {
                InputMap::HilbertSchmidt => self
                    .embedding
                    .map(|e| e.density_dim(self.input_dim).pow(2))
                    .unwrap_or(0),
                _ => circuit.n_qubits,
            },
            None => 0,
        }
    }

    pub fn quantum_circuit(&self) -> Option<&CircuitConfig> {
        self.blocks.iter().find_map(|b| match b {
            BlockSpec::Quantum { circuit, .. } => Some(circuit),
            _ => None,
        })
    }

    /// Checks that consecutive widths agree.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid(
                "model input and output widths must be positive",
            ));
        }
        if let Some(e) = &self.embedding {
            e.validate(self.input_dim)?;
        }
        let mut width = self.encoded_dim();
        let expected = match self.input_map {
            InputMap::Identity => Some(self.input_dim),
            InputMap::DensityDiagonal { n } => Some(n),
            InputMap::HilbertSchmidt => None,
        };
        if let Some(w) = expected {
            if w != width {
                return Err(Error::invalid(format!(
                    "first block takes {width} inputs but the input map yields {w}"
                )));
            }
        }
        if let (InputMap::DensityDiagonal { n }, Some(e)) = (self.input_map, &self.embedding) {
            if n > e.density_dim(self.input_dim) {
                return Err(Error::invalid(
                    "diagonal read-out wider than the density matrix",
                ));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            match b {
                BlockSpec::Dense {
                    inputs, outputs, ..
                } => {
                    if *inputs != width || *outputs == 0 {
                        return Err(Error::invalid(format!(
                            "block {i}: dense layer expects {inputs} inputs but receives {width}"
                        )));
                    }
                }
                BlockSpec::Quantum { encoding, circuit } => {
                    circuit.validate()?;
                    let fits = match encoding {
                        QuantumEncoding::Angle => width == circuit.n_qubits,
                        QuantumEncoding::Amplitude => i == 0 && width <= 1 << circuit.n_qubits,
                    };
                    if !fits {
                        return Err(Error::invalid(format!(
                            "block {i}: {width} inputs cannot be {encoding:?}-encoded on {} qubits",
                            circuit.n_qubits
                        )));
                    }
                }
            }
            width = b.output_dim();
        }
        if width != self.output_dim {
            return Err(Error::invalid(format!(
                "final block produces {width} values, model output is {}",
                self.output_dim
            )));
        }
        Ok(())
    }
}

fn dense_stack(first: usize, hidden: &[usize], out: usize) -> Vec<BlockSpec> {
    let mut blocks = Vec::with_capacity(hidden.len() + 1);
    let mut width = first;
    for &h in hidden {
        blocks.push(BlockSpec::Dense {
            inputs: width,
            outputs: h,
            activation: Activation::Relu,
        });
        width = h;
    }
    blocks.push(BlockSpec::Dense {
        inputs: width,
        outputs: out,
        activation: Activation::Identity,
    });
    blocks
}

/// Lays out the architecture of `tag` for `input_dim` sensors and `output_dim` targets.
pub fn build_variant(
    tag: VariantTag,
    input_dim: usize,
    output_dim: usize,
    arch: &ArchConfig,
) -> Result<ModelVariant> {
    let hidden = arch.hidden_for(tag)?;
    let (input_map, embedding, blocks) = match tag {
        VariantTag::BaselineMlp | VariantTag::ClusteredMlp => (
            InputMap::Identity,
            None,
            dense_stack(input_dim, &hidden, output_dim),
        ),
        VariantTag::QuantumClassical => {
            let n = arch.qubits.unwrap_or(input_dim);
            let mut blocks = vec![BlockSpec::Quantum {
                encoding: QuantumEncoding::Angle,
                circuit: arch.circuit(n),
            }];
            blocks.extend(dense_stack(n, &hidden, output_dim));
            (InputMap::Identity, None, blocks)
        }
        VariantTag::ClassicalQuantum => {
            let n = arch.qubits.unwrap_or(8);
            let mut blocks = dense_stack(input_dim, &hidden[..1], n);
            blocks.push(BlockSpec::Quantum {
                encoding: QuantumEncoding::Angle,
                circuit: arch.circuit(n),
            });
            blocks.push(BlockSpec::Dense {
                inputs: n,
                outputs: output_dim,
                activation: Activation::Identity,
            });
            (InputMap::Identity, None, blocks)
        }
        VariantTag::PolySpdClustered => {
            let d = arch.embedding.density_dim(input_dim);
            let n = arch.qubits.unwrap_or(d.min(7));
            if n > d {
                return Err(Error::invalid(format!(
                    "cannot take {n} diagonal entries from a {d}×{d} density matrix"
                )));
            }
            let mut blocks = vec![BlockSpec::Quantum {
                encoding: QuantumEncoding::Angle,
                circuit: arch.circuit(n),
            }];
            blocks.extend(dense_stack(n, &hidden, output_dim));
            (
                InputMap::DensityDiagonal { n },
                Some(arch.embedding),
                blocks,
            )
        }
        VariantTag::PolySpdHcClustered => {
            let n = arch
                .qubits
                .unwrap_or(arch.embedding.amplitude_qubits(input_dim));
            let mut blocks = vec![BlockSpec::Quantum {
                encoding: QuantumEncoding::Amplitude,
                circuit: arch.circuit(n),
            }];
            blocks.extend(dense_stack(n, &hidden, output_dim));
            (InputMap::HilbertSchmidt, Some(arch.embedding), blocks)
        }
    };
    let variant = ModelVariant {
        tag,
        input_dim,
        output_dim,
        input_map,
        embedding,
        blocks,
    };
    variant.validate()?;
    Ok(variant)
}

/// A variant with concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub variant: ModelVariant,
    pub embedder: Option<Embedder>,
    pub blocks: Vec<Block>,
}

struct Trace {
    /// Input of every block, then the model output.
    inputs: Vec<Vec<f64>>,
    /// Dense pre-activations (empty for quantum blocks).
    pre: Vec<Vec<f64>>,
}

impl HybridModel {
    /// Fits the embedder (if any) on `training_inputs` and draws initial parameters.
    pub fn build(
        variant: ModelVariant,
        training_inputs: &[Vec<f64>],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let embedder = match variant.embedding {
            Some(cfg) => Some(Embedder::fit(cfg, training_inputs)?),
            None => None,
        };
        Self::init(variant, embedder, rng)
    }

    pub fn init(
        variant: ModelVariant,
        embedder: Option<Embedder>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        variant.validate()?;
        if variant.embedding.is_some() != embedder.is_some() {
            return Err(Error::invalid(
                "embedder presence does not match the variant",
            ));
        }
        let blocks = variant
            .blocks
            .iter()
            .map(|spec| match spec {
                BlockSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => Ok(Block::Dense(DenseLayer::he_uniform(
                    *inputs,
                    *outputs,
                    *activation,
                    rng,
                ))),
                BlockSpec::Quantum { encoding, circuit } => Ok(Block::Quantum(
                    QuantumBlock::random(*encoding, circuit.clone(), rng)?,
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant,
            embedder,
            blocks,
        })
    }

    /// Verifies that the parameter blocks agree with the architecture.
    pub fn check(&self) -> Result<()> {
        self.variant.validate()?;
        let agree = self.blocks.len() == self.variant.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&self.variant.blocks)
                .all(|(b, spec)| match (b, spec) {
                    (
                        Block::Dense(d),
                        BlockSpec::Dense {
                            inputs,
                            outputs,
                            activation,
                        },
                    ) => {
                        d.inputs == *inputs
                            && d.outputs == *outputs
                            && d.activation == *activation
                            && d.weights.len() == inputs * outputs
                            && d.bias.len() == *outputs
                    }
                    (Block::Quantum(q), BlockSpec::Quantum { encoding, circuit }) => {
                        q.encoding == *encoding
                            && q.circuit.config == *circuit
                            && q.circuit.angles.len() == circuit.param_count()
                    }
                    _ => false,
                });
        if !agree {
            return Err(Error::Format(
                "parameters do not match the model architecture".into(),
            ));
        }
        if self.variant.embedding.is_some() != self.embedder.is_some() {
            return Err(Error::Format(
                "embedder presence does not match the variant".into(),
            ));
        }
        ensure_finite(&self.params(), "parameters")
    }

    pub fn tag(&self) -> VariantTag {
        self.variant.tag
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(Block::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for b in &self.blocks {
            match b {
                Block::Dense(d) => {
                    out.extend_from_slice(&d.weights);
                    out.extend_from_slice(&d.bias);
                }
                Block::Quantum(q) => out.extend_from_slice(&q.circuit.angles),
            }
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: p.len(),
                context: "parameter vector",
            });
        }
        ensure_finite(p, "parameters")?;
        let mut rest = p;
        for b in &mut self.blocks {
            match b {
                Block::Dense(d) => {
                    let (w, tail) = rest.split_at(d.weights.len());
                    let (bias, tail) = tail.split_at(d.bias.len());
                    d.weights.copy_from_slice(w);
                    d.bias.copy_from_slice(bias);
                    rest = tail;
                }
                Block::Quantum(q) => {
                    let (a, tail) = rest.split_at(q.circuit.angles.len());
                    q.circuit.angles.copy_from_slice(a);
                    rest = tail;
                }
            }
        }
        Ok(())
    }

    /// 1 for dense weights, 0 for biases and circuit angles.
    pub fn l2_mask(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for b in &self.blocks {
            match b {
                Block::Dense(d) => {
                    out.extend(std::iter::repeat_n(1.0, d.weights.len()));
                    out.extend(std::iter::repeat_n(0.0, d.bias.len()));
                }
                Block::Quantum(q) => out.extend(std::iter::repeat_n(0.0, q.circuit.angles.len())),
            }
        }
        out
    }

    /// `λ Σ w²` over dense weights.
    pub fn l2_penalty(&self, lambda: f64) -> f64 {
        let sq: f64 = self
            .blocks
            .iter()
            .filter_map(|b| match b {
                Block::Dense(d) => Some(d.weights.iter().map(|w| w * w).sum::<f64>()),
                Block::Quantum(_) => None,
            })
            .sum();
        lambda * sq
    }

    /// Applies the parameter-free input map to one standardised sensor vector.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.variant.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.variant.input_dim,
                actual: x.len(),
                context: "model input",
            });
        }
        ensure_finite(x, "model input")?;
        match (self.variant.input_map, &self.embedder) {
            (InputMap::Identity, _) => Ok(x.to_vec()),
            (InputMap::DensityDiagonal { n }, Some(e)) => Ok(e
                .density(x)?
                .diagonal()
                .into_iter()
                .take(n)
                .map(|v| v * std::f64::consts::PI)
                .collect()),
            (InputMap::HilbertSchmidt, Some(e)) => Ok(e.state(x)?.amplitudes),
            _ => Err(Error::invalid("variant needs an embedder")),
        }
    }

    pub fn encode_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|x| self.encode(x)).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_encoded(&self.encode(x)?)
    }

    pub fn forward_encoded(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(e)?.inputs.pop().unwrap_or_default())
    }

    pub fn predict_encoded(&self, es: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        es.par_iter().map(|e| self.forward_encoded(e)).collect()
    }

    fn trace(&self, e: &[f64]) -> Result<Trace> {
        if e.len() != self.variant.encoded_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.variant.encoded_dim(),
                actual: e.len(),
                context: "encoded input",
            });
        }
        let mut inputs = Vec::with_capacity(self.blocks.len() + 1);
        let mut pre = Vec::with_capacity(self.blocks.len());
        let mut x = e.to_vec();
        for b in &self.blocks {
            let (next, p) = match b {
                Block::Dense(d) => {
                    let p = d.affine(&x);
                    (d.activate(&p), p)
                }
                Block::Quantum(q) => (q.forward(&x)?, Vec::new()),
            };
            inputs.push(std::mem::replace(&mut x, next));
            pre.push(p);
        }
        inputs.push(x);
        Ok(Trace { inputs, pre })
    }

    /// Statevector leaving the quantum block for one standardised input, if the model has one.
    pub fn quantum_state(&self, x: &[f64]) -> Result<Option<StateVector>> {
        let mut v = self.encode(x)?;
        for b in &self.blocks {
            match b {
                Block::Dense(d) => v = d.activate(&d.affine(&v)),
                Block::Quantum(q) => return Ok(Some(q.output_state(&v)?)),
            }
        }
        Ok(None)
    }

    /// Gradient of `Σ_j dout_j · pred_j` for one encoded sample, in [`params`] layout.
    ///
    /// [`params`]: HybridModel::params
    pub fn sample_grad(&self, e: &[f64], dout: &[f64]) -> Result<Vec<f64>> {
        let trace = self.trace(e)?;
        self.backward(&trace, dout)
    }

    fn backward(&self, trace: &Trace, dout: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.param_count()];
        let mut end = grad.len();
        let mut upstream = dout.to_vec();
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let start = end - b.param_count();
            let g = &mut grad[start..end];
            let input = &trace.inputs[i];
            upstream = match b {
                Block::Dense(d) => d.backward(input, &trace.pre[i], &upstream, g),
                Block::Quantum(q) => q.backward(input, &upstream, g, i > 0)?.unwrap_or_default(),
            };
            end = start;
        }
        Ok(grad)
    }

    /// Loss `(1/N) Σ ‖pred − y‖² + λ Σ w²` and its gradient over a batch of encoded inputs.
    ///
    /// Per-sample gradients are evaluated in parallel and summed in sample order.
    pub fn loss_and_grad(
        &self,
        es: &[Vec<f64>],
        ys: &[Vec<f64>],
        lambda: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if es.is_empty() || es.len() != ys.len() {
            return Err(Error::invalid(
                "batch inputs and targets must be non-empty and paired",
            ));
        }
        let scale = 1.0 / es.len() as f64;
        let per_sample: Vec<(f64, Vec<f64>)> = es
            .par_iter()
            .zip(ys.par_iter())
            .map(|(e, y)| {
                let trace = self.trace(e)?;
                let pred = trace.inputs.last().expect("trace has an output");
                check_target(pred, y)?;
                let diff: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
                let loss = diff.iter().map(|d| d * d).sum::<f64>();
                let dout: Vec<f64> = diff.iter().map(|d| 2.0 * d * scale).collect();
                Ok((loss, self.backward(&trace, &dout)?))
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        for (l, g) in &per_sample {
            loss += l;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        loss *= scale;
        if lambda != 0.0 {
            loss += self.l2_penalty(lambda);
            for ((acc, w), m) in grad.iter_mut().zip(self.params()).zip(self.l2_mask()) {
                *acc += 2.0 * lambda * w * m;
            }
        }
        Ok((loss, grad))
    }

    /// Total loss without gradients.
    pub fn loss(&self, es: &[Vec<f64>], ys: &[Vec<f64>], lambda: f64) -> Result<f64> {
        let preds = self.predict_encoded(es)?;
        Ok(super::mse_loss(&preds, ys)? + self.l2_penalty(lambda))
    }
}

fn check_target(pred: &[f64], y: &[f64]) -> Result<()> {
    if pred.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            actual: y.len(),
            context: "target",
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::TermMode;
    use crate::seed::{self, Stream};

    fn rng() -> rand_chacha::ChaCha8Rng {
        seed::rng(5, Stream::Init)
    }

    #[test]
    fn baseline_parameter_count() {
        let v = build_variant(VariantTag::BaselineMlp, 7, 1017, &ArchConfig::default()).unwrap();
        assert_eq!(
            v.param_count(),
            7 * 64 + 64 + 64 * 32 + 32 + 32 * 1017 + 1017
        );
        assert_eq!(v.param_count(), 36_153);
        let m = HybridModel::init(v, None, &mut rng()).unwrap();
        assert_eq!(m.forward(&[0.1; 7]).unwrap().len(), 1017);
    }

    #[test]
    fn clustered_last_hidden_width() {
        let v = build_variant(VariantTag::ClusteredMlp, 7, 132, &ArchConfig::default()).unwrap();
        assert!(matches!(v.blocks[1], BlockSpec::Dense { outputs: 7, .. }));
        let first = ArchConfig {
            cluster_layer: Some(0),
            ..ArchConfig::default()
        };
        let v = build_variant(VariantTag::ClusteredMlp, 7, 132, &first).unwrap();
        assert!(matches!(v.blocks[0], BlockSpec::Dense { outputs: 7, .. }));
        assert!(matches!(
            v.blocks[1],
            BlockSpec::Dense {
                inputs: 7,
                outputs: 32,
                ..
            }
        ));
    }

    #[test]
    fn hc_qubits_from_quadratic_terms() {
        let mut arch = ArchConfig::default();
        arch.embedding.poly.terms = TermMode::ExactDegreeOnly;
        let v = build_variant(VariantTag::PolySpdHcClustered, 7, 1017, &arch).unwrap();
        assert_eq!(arch.embedding.density_dim(7), 28);
        assert_eq!(v.quantum_circuit().unwrap().n_qubits, 10);
        assert_eq!(v.encoded_dim(), 784);
    }

    #[test]
    fn reduced_hc_uses_six_qubits() {
        let mut arch = ArchConfig::default();
        arch.embedding.projection = Some(8);
        let v = build_variant(VariantTag::PolySpdHcClustered, 7, 132, &arch).unwrap();
        assert_eq!(v.quantum_circuit().unwrap().n_qubits, 6);
    }

    #[test]
    fn variant_shapes() {
        let arch = ArchConfig::default();
        let qc = build_variant(VariantTag::QuantumClassical, 7, 132, &arch).unwrap();
        assert_eq!(qc.quantum_circuit().unwrap().n_qubits, 7);
        assert_eq!(qc.blocks.len(), 4);
        let cq = build_variant(VariantTag::ClassicalQuantum, 7, 132, &arch).unwrap();
        assert_eq!(cq.quantum_circuit().unwrap().n_qubits, 8);
        assert!(matches!(
            cq.blocks[1],
            BlockSpec::Dense {
                outputs: 8,
                activation: Activation::Identity,
                ..
            }
        ));
        assert!(matches!(
            cq.blocks[3],
            BlockSpec::Dense {
                inputs: 8,
                outputs: 132,
                ..
            }
        ));
        let spd = build_variant(VariantTag::PolySpdClustered, 7, 132, &arch).unwrap();
        assert_eq!(spd.input_map, InputMap::DensityDiagonal { n: 7 });
    }

    #[test]
    fn inconsistent_widths_are_rejected() {
        let arch = ArchConfig {
            qubits: Some(3),
            ..ArchConfig::default()
        };
        let mut arch_hc = arch.clone();
        arch_hc.embedding.projection = Some(8);
        assert!(build_variant(VariantTag::PolySpdHcClustered, 7, 132, &arch_hc).is_err());
        assert!(build_variant(VariantTag::QuantumClassical, 7, 132, &arch).is_err());
        let bad = ArchConfig {
            hidden: vec![],
            ..ArchConfig::default()
        };
        assert!(build_variant(VariantTag::BaselineMlp, 7, 132, &bad).is_err());
    }

    #[test]
    fn tag_names_round_trip() {
        for t in VariantTag::ALL {
            assert_eq!(t.name().parse::<VariantTag>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
        assert!("MLP".parse::<VariantTag>().is_err());
    }

    fn linear_model(weights: Vec<f64>, bias: Vec<f64>, inputs: usize) -> HybridModel {
        let outputs = bias.len();
        let variant = ModelVariant {
            tag: VariantTag::BaselineMlp,
            input_dim: inputs,
            output_dim: outputs,
            input_map: InputMap::Identity,
            embedding: None,
            blocks: vec![BlockSpec::Dense {
                inputs,
                outputs,
                activation: Activation::Identity,
            }],
        };
        let mut m = HybridModel::init(variant, None, &mut rng()).unwrap();
        let p: Vec<f64> = weights.into_iter().chain(bias).collect();
        m.set_params(&p).unwrap();
        m
    }

    #[test]
    fn zero_weights_give_bias() {
        let m = linear_model(vec![0.0; 6], vec![0.5, -1.0], 3);
        assert_eq!(m.forward(&[3.0, 4.0, 5.0]).unwrap(), vec![0.5, -1.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let m = linear_model(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2);
        assert_eq!(m.forward(&[0.3, -7.0]).unwrap(), vec![0.3, -7.0]);
    }

    #[test]
    fn linear_layer_gradient_closed_form() {
        let m = linear_model(vec![0.2, -0.4, 1.0, 0.5], vec![0.1, 0.0], 2);
        let x = vec![1.5, -2.0];
        let y = vec![0.0, 1.0];
        let pred = m.forward(&x).unwrap();
        let (_, g) = m
            .loss_and_grad(std::slice::from_ref(&x), std::slice::from_ref(&y), 0.0)
            .unwrap();
        for o in 0..2 {
            let r = 2.0 * (pred[o] - y[o]);
            for i in 0..2 {
                assert!((g[o * 2 + i] - r * x[i]).abs() < 1e-14);
            }
            assert!((g[4 + o] - r).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_after_quantum_sees_bounded_inputs() {
        let arch = ArchConfig {
            layers: 2,
            ..ArchConfig::default()
        };
        let v = build_variant(VariantTag::QuantumClassical, 7, 10, &arch).unwrap();
        let m = HybridModel::init(v, None, &mut rng()).unwrap();
        let t = m.trace(&[3.0, -2.0, 0.5, 9.0, 1.0, 0.0, -4.0]).unwrap();
        assert!(t.inputs[1].iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn check_detects_mismatched_blocks() {
        let v = build_variant(VariantTag::BaselineMlp, 7, 4, &ArchConfig::default()).unwrap();
        let mut m = HybridModel::init(v, None, &mut rng()).unwrap();
        m.check().unwrap();
        m.blocks.pop();
        assert!(m.check().is_err());
    }
}
