use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StateVector;
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(alias = "x")]
    X,
    #[serde(alias = "y")]
    Y,
    #[serde(alias = "z")]
    Z,
}

/// CNOT pattern applied after the rotations of each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// `0→1, 1→2, …, n−2→n−1, n−1→0`; empty for one qubit.
    #[default]
    Ring,
    /// `0→1, …, n−2→n−1`.
    Linear,
}

impl Topology {
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        if n < 2 {
            return Vec::new();
        }
        let mut pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        if self == Topology::Ring {
            pairs.push((n - 1, 0));
        }
        pairs
    }
}

/// Shape of a layered ansatz.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub n_qubits: usize,
    pub layers: usize,
    /// Rotation axes applied to every qubit in every layer, in order.
    #[serde(default = "default_axes")]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub topology: Topology,
}

fn default_axes() -> Vec<Axis> {
    vec![Axis::Y]
}

impl CircuitConfig {
    pub fn new(n_qubits: usize, layers: usize) -> Self {
        Self {
            n_qubits,
            layers,
            axes: default_axes(),
            topology: Topology::Ring,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > super::MAX_QUBITS {
            return Err(Error::invalid(format!(
                "circuit qubit count must be in 1..={} (got {})",
                super::MAX_QUBITS,
                self.n_qubits
            )));
        }
        if self.layers == 0 {
            return Err(Error::invalid("circuit needs at least one layer"));
        }
        if self.axes.is_empty() {
            return Err(Error::invalid(
                "circuit layers need at least one rotation axis",
            ));
        }
        Ok(())
    }

    pub fn params_per_layer(&self) -> usize {
        self.n_qubits * self.axes.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers * self.params_per_layer()
    }

    /// Two-qubit gate count of the whole ansatz.
    pub fn entangler_count(&self) -> usize {
        self.layers * self.topology.pairs(self.n_qubits).len()
    }
}

/// Trainable angles, laid out `[layer][qubit][axis]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub config: CircuitConfig,
    pub angles: Vec<f64>,
}

impl CircuitParams {
    pub fn new(config: CircuitConfig, angles: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if angles.len() != config.param_count() {
            return Err(Error::DimensionMismatch {
                expected: config.param_count(),
                actual: angles.len(),
                context: "circuit angles",
            });
        }
        ensure_finite(&angles, "circuit angles")?;
        Ok(Self { config, angles })
    }

    pub fn zeros(config: CircuitConfig) -> Result<Self> {
        let n = config.param_count();
        Self::new(config, vec![0.0; n])
    }

    /// Angles drawn uniformly from `[−π, π]`.
    pub fn random(config: CircuitConfig, rng: &mut impl Rng) -> Result<Self> {
        let pi = std::f64::consts::PI;
        let angles = (0..config.param_count())
            .map(|_| rng.random_range(-pi..=pi))
            .collect();
        Self::new(config, angles)
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        let w = self.config.params_per_layer();
        &self.angles[l * w..(l + 1) * w]
    }
}

/// One ansatz layer: per-qubit rotations, then the CNOT pattern.
pub fn entangling_layer(
    state: &mut StateVector,
    layer_angles: &[f64],
    axes: &[Axis],
    topology: Topology,
) -> Result<()> {
    let n = state.n_qubits();
    if layer_angles.len() != n * axes.len() {
        return Err(Error::DimensionMismatch {
            expected: n * axes.len(),
            actual: layer_angles.len(),
            context: "entangling layer angles",
        });
    }
    ensure_finite(layer_angles, "layer angles")?;
    apply_layer(state, layer_angles, axes, topology, None);
    Ok(())
}

/// `shift = Some((i, δ))` adds `δ` to angle `i` of this layer.
pub(super) fn apply_layer(
    state: &mut StateVector,
    layer_angles: &[f64],
    axes: &[Axis],
    topology: Topology,
    shift: Option<(usize, f64)>,
) {
    let r = axes.len();
    for q in 0..state.n_qubits() {
        for (a, &axis) in axes.iter().enumerate() {
            let idx = q * r + a;
            let mut theta = layer_angles[idx];
            if let Some((s, delta)) = shift {
                if s == idx {
                    theta += delta;
                }
            }
            state.rotate(q, axis, theta);
        }
    }
    for (c, t) in topology.pairs(state.n_qubits()) {
        state.cnot(c, t);
    }
}

/// `|Ψ_out⟩ = U_L ⋯ U_1 |input⟩`.
pub fn run_circuit(input: &StateVector, params: &CircuitParams) -> Result<StateVector> {
    if input.n_qubits() != params.config.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: params.config.n_qubits,
            actual: input.n_qubits(),
            context: "circuit input qubits",
        });
    }
    let mut state = input.clone();
    for l in 0..params.config.layers {
        apply_layer(
            &mut state,
            params.layer(l),
            &params.config.axes,
            params.config.topology,
            None,
        );
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::ObservableSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn ring_pairs() {
        assert!(Topology::Ring.pairs(1).is_empty());
        assert_eq!(Topology::Ring.pairs(2), vec![(0, 1), (1, 0)]);
        assert_eq!(Topology::Ring.pairs(3), vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(Topology::Linear.pairs(3), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn zero_angles_leave_only_cnots() {
        // (|00⟩+|10⟩)/√2 → CNOT(0,1) → (|00⟩+|11⟩)/√2 → CNOT(1,0) → (|00⟩+|10⟩)/√2
        let mut s = StateVector::from_amplitudes(&[1.0, 0.0, 1.0, 0.0], 2).unwrap();
        let before = s.clone();
        entangling_layer(&mut s, &[0.0, 0.0], &[Axis::Y], Topology::Ring).unwrap();
        let mut expect = before.clone();
        expect.apply_cnot(0, 1).unwrap();
        expect.apply_cnot(1, 0).unwrap();
        assert_eq!(s, expect);
    }

    #[test]
    fn single_qubit_layer_is_plain_ry() {
        let mut s = StateVector::zero(1).unwrap();
        entangling_layer(&mut s, &[0.8], &[Axis::Y], Topology::Ring).unwrap();
        let mut expect = StateVector::zero(1).unwrap();
        expect.apply_rotation(0, Axis::Y, 0.8).unwrap();
        assert_eq!(s, expect);
    }

    #[test]
    fn layer_shape_mismatch() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(entangling_layer(&mut s, &[0.1], &[Axis::Y], Topology::Ring).is_err());
    }

    #[test]
    fn random_layers_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cfg = CircuitConfig {
                n_qubits: 3,
                layers: 4,
                axes: vec![Axis::X, Axis::Y, Axis::Z],
                topology: Topology::Ring,
            };
            let params = CircuitParams::random(cfg, &mut rng).unwrap();
            let out = run_circuit(&StateVector::zero(3).unwrap(), &params).unwrap();
            assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_circuit_on_zero_state() {
        let params = CircuitParams::zeros(CircuitConfig::new(4, 1)).unwrap();
        let input = StateVector::zero(4).unwrap();
        assert_eq!(run_circuit(&input, &params).unwrap(), input);
    }

    #[test]
    fn two_qubit_hand_simulation() {
        // Ry(π) on qubit 0: |00⟩ → |10⟩; CNOT(0,1): |11⟩; CNOT(1,0): |01⟩.
        let params = CircuitParams::new(CircuitConfig::new(2, 1), vec![PI, 0.0]).unwrap();
        let out = run_circuit(&StateVector::zero(2).unwrap(), &params).unwrap();
        assert!((out.amplitudes()[1].re - 1.0).abs() < 1e-12);
        let z = out.measure(&ObservableSet::all(2)).0;
        assert!((z[0] - 1.0).abs() < 1e-12);
        assert!((z[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_gates_restore_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = StateVector::zero(3).unwrap();
        for q in 0..3 {
            s.apply_rotation(q, Axis::Y, rng.random_range(-PI..PI))
                .unwrap();
            s.apply_rotation(q, Axis::Z, rng.random_range(-PI..PI))
                .unwrap();
        }
        let start = s.clone();
        for (axis, theta) in [(Axis::X, 0.4), (Axis::Y, -1.3), (Axis::Z, 2.2)] {
            s.apply_rotation(1, axis, theta).unwrap();
            s.apply_rotation(1, axis, -theta).unwrap();
        }
        s.apply_cnot(2, 0).unwrap();
        s.apply_cnot(2, 0).unwrap();
        for (a, b) in s.amplitudes().iter().zip(start.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(CircuitConfig::new(0, 1).validate().is_err());
        assert!(CircuitConfig::new(2, 0).validate().is_err());
        assert!(CircuitParams::new(CircuitConfig::new(2, 1), vec![0.0]).is_err());
        assert_eq!(CircuitConfig::new(10, 10).entangler_count(), 100);
    }
}
