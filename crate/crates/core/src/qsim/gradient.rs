//! Parameter-shift differentiation.
//!
//! Every trainable gate is `exp(−iθσ/2)` with σ a Pauli operator, so
//! `∂⟨O⟩/∂θ = (⟨O⟩(θ+π/2) − ⟨O⟩(θ−π/2))/2` holds exactly.

use std::f64::consts::FRAC_PI_2;

use super::circuit::apply_layer;
use super::{CircuitParams, ObservableSet, StateVector};
use crate::error::{Error, Result};

fn check_downstream(obs: &ObservableSet, downstream: &[f64]) -> Result<()> {
    if downstream.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            actual: downstream.len(),
            context: "downstream gradient",
        });
    }
    Ok(())
}

fn contract(downstream: &[f64], plus: &[f64], minus: &[f64]) -> f64 {
    downstream
        .iter()
        .zip(plus.iter().zip(minus))
        .map(|(d, (p, m))| d * 0.5 * (p - m))
        .sum()
}

fn run_from(
    start: &StateVector,
    params: &CircuitParams,
    first_layer: usize,
    shift: Option<(usize, f64)>,
    obs: &ObservableSet,
) -> Vec<f64> {
    let mut state = start.clone();
    for l in first_layer..params.config.layers {
        apply_layer(
            &mut state,
            params.layer(l),
            &params.config.axes,
            params.config.topology,
            if l == first_layer { shift } else { None },
        );
    }
    state.measure(obs).0
}

/// Gradient of `Σ_q downstream_q ⟨Z_q⟩` with respect to every circuit angle.
///
/// The result has the layout of `params.angles`.
pub fn param_shift_grad(
    input: &StateVector,
    params: &CircuitParams,
    obs: &ObservableSet,
    downstream: &[f64],
) -> Result<Vec<f64>> {
    check_downstream(obs, downstream)?;
    if input.n_qubits() != params.config.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: params.config.n_qubits,
            actual: input.n_qubits(),
            context: "circuit input qubits",
        });
    }
    let mut grad = vec![0.0; params.angles.len()];
    if downstream.iter().all(|&d| d == 0.0) {
        return Ok(grad);
    }

    // State entering each layer; shifted runs restart from there.
    let layers = params.config.layers;
    let mut prefixes = Vec::with_capacity(layers);
    let mut state = input.clone();
    for l in 0..layers {
        prefixes.push(state.clone());
        apply_layer(
            &mut state,
            params.layer(l),
            &params.config.axes,
            params.config.topology,
            None,
        );
    }

    let width = params.config.params_per_layer();
    for (l, prefix) in prefixes.iter().enumerate() {
        for i in 0..width {
            let plus = run_from(prefix, params, l, Some((i, FRAC_PI_2)), obs);
            let minus = run_from(prefix, params, l, Some((i, -FRAC_PI_2)), obs);
            grad[l * width + i] = contract(downstream, &plus, &minus);
        }
    }
    Ok(grad)
}

/// Gradient of `Σ_q downstream_q ⟨Z_q⟩` with respect to the `Ry` embedding
/// angles of a circuit whose input is `Ry(angles)|0…0⟩`.
pub fn angle_input_grad(
    angles: &[f64],
    params: &CircuitParams,
    obs: &ObservableSet,
    downstream: &[f64],
) -> Result<Vec<f64>> {
    check_downstream(obs, downstream)?;
    let n = params.config.n_qubits;
    let mut grad = vec![0.0; angles.len()];
    if downstream.iter().all(|&d| d == 0.0) {
        return Ok(grad);
    }
    let mut shifted = angles.to_vec();
    for i in 0..angles.len() {
        let mut eval = |theta: f64| -> Result<Vec<f64>> {
            shifted[i] = theta;
            let mut s = StateVector::zero(n)?;
            s.angle_embed(&shifted)?;
            Ok(run_from(&s, params, 0, None, obs))
        };
        let plus = eval(angles[i] + FRAC_PI_2)?;
        let minus = eval(angles[i] - FRAC_PI_2)?;
        shifted[i] = angles[i];
        grad[i] = contract(downstream, &plus, &minus);
    }
    Ok(grad)
}
