//! Multiply–accumulate estimates for the classical and hybrid pipelines.

use qsurrogate::embed::{binomial, PolyConfig, TermMode};
use qsurrogate::nn::{build_variant, ArchConfig, BlockSpec, ModelVariant, VariantTag};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_in: usize,
    pub h1: usize,
    pub h2: usize,
    pub d_out: usize,
    /// Side of the density matrix.
    pub d_prime: usize,
    pub layers: usize,
    pub qubits: usize,
    pub h3: usize,
}

impl Default for Dims {
    /// The jetty-scale configuration: 7 sensors, 339 nodes, quadratic terms only.
    fn default() -> Self {
        Self {
            d_in: 7,
            h1: 64,
            h2: 32,
            d_out: 1017,
            d_prime: 28,
            layers: 10,
            qubits: 10,
            h3: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacBreakdown {
    pub embedding: usize,
    pub circuit: usize,
    pub dense: usize,
}

impl MacBreakdown {
    pub fn total(&self) -> usize {
        self.embedding + self.circuit + self.dense
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub dims: Dims,
    pub c_classical: usize,
    pub c_qmlp: usize,
    pub ratio: f64,
    /// Counted from a BaselineMLP built with `d_in → h1 → h2 → d_out`.
    pub baseline_model: MacBreakdown,
    /// Counted from a PolySPD_HC model with one hidden layer of `h3`, when
    /// `d'` corresponds to a polynomial expansion of `d_in` inputs.
    pub qmlp_model: Option<MacBreakdown>,
}

/// Multiply–accumulates of a built architecture: `d'³` for the
/// eigendecomposition, one per rotation gate, `in·out` per dense layer.
pub fn count_macs(v: &ModelVariant) -> MacBreakdown {
    let embedding = v
        .embedding
        .map(|e| e.density_dim(v.input_dim).pow(3))
        .unwrap_or(0);
    let mut circuit = 0;
    let mut dense = 0;
    for b in &v.blocks {
        match b {
            BlockSpec::Dense {
                inputs, outputs, ..
            } => dense += inputs * outputs,
            BlockSpec::Quantum { circuit: c, .. } => circuit += c.param_count(),
        }
    }
    MacBreakdown {
        embedding,
        circuit,
        dense,
    }
}

fn poly_for(d_in: usize, d_prime: usize) -> Option<PolyConfig> {
    [TermMode::ExactDegreeOnly, TermMode::AllUpToDegree]
        .into_iter()
        .flat_map(|terms| {
            (1..=3).map(move |degree| PolyConfig {
                degree,
                include_bias: false,
                terms,
            })
        })
        .find(|p| p.expanded_dim(d_in) == d_prime)
}

pub fn complexity(dims: Dims) -> CliResult<ComplexityReport> {
    let Dims {
        d_in,
        h1,
        h2,
        d_out,
        d_prime,
        layers,
        qubits,
        h3,
    } = dims;
    if [d_in, h1, h2, d_out, d_prime, layers, qubits, h3].contains(&0) {
        return Err(CliError::Config(
            "complexity dimensions must be positive".into(),
        ));
    }
    let c_classical = d_in * h1 + h1 * h2 + h2 * d_out;
    let c_qmlp = d_prime.pow(3) + layers * qubits + qubits * h3 + h3 * d_out;

    let arch = ArchConfig {
        hidden: vec![h1, h2],
        ..ArchConfig::default()
    };
    let baseline = build_variant(VariantTag::BaselineMlp, d_in, d_out, &arch)?;
    let qmlp_model = poly_for(d_in, d_prime).and_then(|poly| {
        let mut arch = ArchConfig {
            hidden: vec![h3],
            cluster_k: h3,
            qubits: Some(qubits),
            layers,
            ..ArchConfig::default()
        };
        arch.embedding.poly = poly;
        build_variant(VariantTag::PolySpdHcClustered, d_in, d_out, &arch)
            .ok()
            .map(|v| count_macs(&v))
    });
    Ok(ComplexityReport {
        dims,
        c_classical,
        c_qmlp,
        ratio: c_qmlp as f64 / c_classical as f64,
        baseline_model: count_macs(&baseline),
        qmlp_model,
    })
}

/// Rounds to `sig` significant figures.
pub fn round_sig(x: f64, sig: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(sig - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// `C(d_in + 1, 2)`: quadratic monomials of `d_in` inputs.
pub fn quadratic_terms(d_in: usize) -> usize {
    binomial(d_in + 1, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jetty_scale_dims() {
        let r = complexity(Dims::default()).unwrap();
        assert_eq!(r.c_classical, 448 + 2048 + 32_544);
        assert_eq!(r.c_qmlp, 21_952 + 100 + 640 + 65_088);
        assert_eq!(32 * 1017, 32_544);
        assert_eq!(round_sig(r.c_classical as f64, 2), 3.5e4);
        assert_eq!(round_sig(r.c_qmlp as f64, 2), 8.8e4);
        assert_eq!(round_sig(r.ratio, 2), 2.5);
    }

    #[test]
    fn built_models_agree_with_formulas() {
        let r = complexity(Dims::default()).unwrap();
        assert_eq!(r.baseline_model.total(), r.c_classical);
        assert_eq!(r.qmlp_model.unwrap().total(), r.c_qmlp);
        assert_eq!(quadratic_terms(7), 28);
    }

    #[test]
    fn zero_dims_rejected() {
        let d = Dims {
            h3: 0,
            ..Dims::default()
        };
        assert!(complexity(d).is_err());
    }
}
