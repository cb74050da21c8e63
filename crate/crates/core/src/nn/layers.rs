use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{
    angle_input_grad, param_shift_grad, run_circuit, CircuitConfig, CircuitParams, ObservableSet,
    StateVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// He-style uniform weights `U(−√(6/fan_in), √(6/fan_in))`, zero bias.
    pub fn he_uniform(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs, activation);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Pre-activation `W x + b`.
    pub(crate) fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }

    pub(crate) fn activate(&self, pre: &[f64]) -> Vec<f64> {
        pre.iter().map(|&v| self.activation.apply(v)).collect()
    }

    /// Writes parameter gradients into `grad` (weights then bias) and returns
    /// the gradient with respect to the layer input.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        pre: &[f64],
        dout: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let dpre: Vec<f64> = dout
            .iter()
            .zip(pre)
            .map(|(d, &p)| d * self.activation.derivative(p))
            .collect();
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut dinput = vec![0.0; self.inputs];
        for (o, &dp) in dpre.iter().enumerate() {
            gb[o] += dp;
            if dp == 0.0 {
                continue;
            }
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += dp * input[i];
                dinput[i] += dp * row[i];
            }
        }
        dinput
    }
}

/// How a quantum block loads its input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumEncoding {
    /// `Ry(xᵢ)` on qubit `i` of `|0…0⟩`.
    Angle,
    /// The input (padded, normalised) becomes the statevector.
    Amplitude,
}

/// Parameterised circuit followed by Pauli-Z readout on every qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumBlock {
    pub encoding: QuantumEncoding,
    pub circuit: CircuitParams,
}

impl QuantumBlock {
    pub fn random(
        encoding: QuantumEncoding,
        config: CircuitConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            encoding,
            circuit: CircuitParams::random(config, rng)?,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.config.n_qubits
    }

    pub fn observables(&self) -> ObservableSet {
        ObservableSet::all(self.n_qubits())
    }

    pub fn prepare(&self, input: &[f64]) -> Result<StateVector> {
        match self.encoding {
            QuantumEncoding::Angle => {
                let mut s = StateVector::zero(self.n_qubits())?;
                s.angle_embed(input)?;
                Ok(s)
            }
            QuantumEncoding::Amplitude => StateVector::from_amplitudes(input, self.n_qubits()),
        }
    }

    pub fn output_state(&self, input: &[f64]) -> Result<StateVector> {
        run_circuit(&self.prepare(input)?, &self.circuit)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.output_state(input)?.measure(&self.observables()).0)
    }

    /// Parameter-shift gradients; the input gradient is only computed when
    /// requested (angle encoding only).
    pub(crate) fn backward(
        &self,
        input: &[f64],
        dout: &[f64],
        grad: &mut [f64],
        need_input_grad: bool,
    ) -> Result<Option<Vec<f64>>> {
        let obs = self.observables();
        let state = self.prepare(input)?;
        let g = param_shift_grad(&state, &self.circuit, &obs, dout)?;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
        if !need_input_grad {
            return Ok(None);
        }
        match self.encoding {
            QuantumEncoding::Angle => Ok(Some(angle_input_grad(input, &self.circuit, &obs, dout)?)),
            QuantumEncoding::Amplitude => Err(Error::invalid(
                "amplitude-encoded blocks must be the first trainable block",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Dense(DenseLayer),
    Quantum(QuantumBlock),
}

impl Block {
    pub fn param_count(&self) -> usize {
        match self {
            Block::Dense(d) => d.param_count(),
            Block::Quantum(q) => q.circuit.angles.len(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Block::Dense(d) => d.outputs,
            Block::Quantum(q) => q.n_qubits(),
        }
    }
}
