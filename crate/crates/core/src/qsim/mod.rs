//! Dense statevector simulator for parameterised circuits.
//!
//! Basis ordering: qubit 0 is the most significant bit of the basis index, so
//! on three qubits `|100⟩` is index 4.

mod circuit;
mod gradient;

pub use circuit::{entangling_layer, run_circuit, Axis, CircuitConfig, CircuitParams, Topology};
pub use gradient::{angle_input_grad, param_shift_grad};

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Largest register the simulator accepts (16,384 amplitudes).
pub const MAX_QUBITS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "qubit count must be in 1..={MAX_QUBITS} (got {n})"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    /// Amplitude encoding: `v` zero-padded to `2ⁿ` entries and normalised.
    pub fn from_amplitudes(v: &[f64], n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if v.len() > dim {
            return Err(Error::invalid(format!(
                "{} amplitudes do not fit in {n} qubits",
                v.len()
            )));
        }
        ensure_finite(v, "amplitude vector")?;
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("cannot amplitude-encode a zero vector"));
        }
        // Already-normalised input is loaded verbatim so re-encoding is a fixed point.
        let normalised = (norm - 1.0).abs() <= 4.0 * f64::EPSILON;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        for (dst, &src) in amplitudes.iter_mut().zip(v) {
            dst.re = if normalised { src } else { src / norm };
        }
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::invalid(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    fn stride(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Apply a 2×2 unitary `[[m00, m01], [m10, m11]]` to qubit `q`.
    fn apply_single(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let stride = self.stride(q);
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    /// `exp(−i θ σ/2)` on qubit `q`.
    pub fn apply_rotation(&mut self, q: usize, axis: Axis, theta: f64) -> Result<()> {
        self.check_qubit(q)?;
        if !theta.is_finite() {
            return Err(Error::NonFinite("rotation angle"));
        }
        self.rotate(q, axis, theta);
        Ok(())
    }

    pub(crate) fn rotate(&mut self, q: usize, axis: Axis, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        let zero = Complex64::new(0.0, 0.0);
        match axis {
            Axis::Y => {
                // real rotation; avoid complex multiplies on the hot path
                let stride = self.stride(q);
                let dim = self.amplitudes.len();
                let mut base = 0;
                while base < dim {
                    for i in base..base + stride {
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[i + stride];
                        self.amplitudes[i] = a0 * c - a1 * s;
                        self.amplitudes[i + stride] = a0 * s + a1 * c;
                    }
                    base += 2 * stride;
                }
            }
            Axis::X => {
                let mis = Complex64::new(0.0, -s);
                let cc = Complex64::new(c, 0.0);
                self.apply_single(q, [[cc, mis], [mis, cc]]);
            }
            Axis::Z => {
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.apply_single(q, [[lo, zero], [zero, hi]]);
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::invalid("CNOT control and target must differ"));
        }
        self.cnot(control, target);
        Ok(())
    }

    pub(crate) fn cnot(&mut self, control: usize, target: usize) {
        let cmask = self.stride(control);
        let tmask = self.stride(target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// `Ry(θᵢ)` on every qubit `i`.
    pub fn angle_embed(&mut self, angles: &[f64]) -> Result<()> {
        if angles.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: angles.len(),
                context: "angle embedding",
            });
        }
        ensure_finite(angles, "embedding angles")?;
        for (q, &theta) in angles.iter().enumerate() {
            self.rotate(q, Axis::Y, theta);
        }
        Ok(())
    }

    /// Exact Pauli-Z expectations `⟨Z_q⟩ = Σ (−1)^{bit_q(i)} |aᵢ|²`.
    pub fn measure(&self, obs: &ObservableSet) -> QuantumFeatures {
        let mut out = vec![0.0; obs.targets.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (slot, &q) in out.iter_mut().zip(&obs.targets) {
                if i & self.stride(q) == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        QuantumFeatures(out)
    }

    /// Finite-shot estimate of the same expectations.
    pub fn sample(&self, obs: &ObservableSet, shots: usize, rng: &mut impl Rng) -> QuantumFeatures {
        let mut cumulative = Vec::with_capacity(self.amplitudes.len());
        let mut acc = 0.0;
        for a in &self.amplitudes {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let mut out = vec![0.0; obs.targets.len()];
        for _ in 0..shots {
            let u = rng.random::<f64>() * acc;
            let idx = cumulative
                .partition_point(|&c| c <= u)
                .min(cumulative.len() - 1);
            for (slot, &q) in out.iter_mut().zip(&obs.targets) {
                *slot += if idx & self.stride(q) == 0 { 1.0 } else { -1.0 };
            }
        }
        for v in &mut out {
            *v /= shots.max(1) as f64;
        }
        QuantumFeatures(out)
    }

    /// One `index,real,imag` line per amplitude.
    pub fn dump(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "index,real,imag")?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            writeln!(w, "{i},{},{}", a.re, a.im)?;
        }
        Ok(())
    }
}

/// Single-qubit Pauli-Z measurement targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSet {
    targets: Vec<usize>,
}

impl ObservableSet {
    pub fn new(targets: Vec<usize>, n_qubits: usize) -> Result<Self> {
        let mut seen = vec![false; n_qubits];
        for &t in &targets {
            if t >= n_qubits || seen[t] {
                return Err(Error::invalid(format!(
                    "observable targets must be distinct and below {n_qubits}"
                )));
            }
            seen[t] = true;
        }
        Ok(Self { targets })
    }

    /// `Z` on every qubit.
    pub fn all(n_qubits: usize) -> Self {
        Self {
            targets: (0..n_qubits).collect(),
        }
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Pauli-Z expectation values, each in `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumFeatures(pub Vec<f64>);

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn zero_state() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(
            s.amplitudes(),
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        );
        let s = StateVector::zero(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0].re, 1.0);
        assert!(StateVector::zero(15).is_err());
        assert!(StateVector::zero(0).is_err());
    }

    #[test]
    fn amplitude_encoding() {
        let s = StateVector::from_amplitudes(&[1.0, 1.0], 1).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
        assert!(StateVector::from_amplitudes(&[0.0, 0.0], 1).is_err());
        assert!(StateVector::from_amplitudes(&[1.0; 5], 2).is_err());

        let v: Vec<f64> = (0..784).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = StateVector::from_amplitudes(&v, 10).unwrap();
        assert_eq!(s.amplitudes().len(), 1024);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_encoding_is_idempotent() {
        let v: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let s = StateVector::from_amplitudes(&v, 3).unwrap();
        let padded: Vec<f64> = s.amplitudes().iter().map(|a| a.re).collect();
        let again = StateVector::from_amplitudes(&padded, 3).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn angle_embedding() {
        let mut s = StateVector::zero(1).unwrap();
        s.angle_embed(&[0.0]).unwrap();
        assert!(close(s.amplitudes()[0], 1.0, 0.0));
        let mut s = StateVector::zero(1).unwrap();
        s.angle_embed(&[PI]).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, 0.0));
        assert!(close(s.amplitudes()[1], 1.0, 0.0));
        let mut s = StateVector::zero(1).unwrap();
        s.angle_embed(&[PI / 2.0]).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
        assert!(s.angle_embed(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn rotations() {
        let z = ObservableSet::all(1);
        let mut s = StateVector::zero(1).unwrap();
        s.apply_rotation(0, Axis::Z, 0.7).unwrap();
        assert!((s.measure(&z).0[0] - 1.0).abs() < 1e-12);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_rotation(0, Axis::X, PI).unwrap();
        assert!(close(s.amplitudes()[1], 0.0, -1.0));
        assert!((s.measure(&z).0[0] + 1.0).abs() < 1e-12);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_rotation(0, Axis::Y, 0.3).unwrap();
        assert!((s.measure(&z).0[0] - 0.3f64.cos()).abs() < 1e-12);

        assert!(s.apply_rotation(1, Axis::Y, 0.1).is_err());
        assert!(s.apply_rotation(0, Axis::Y, f64::NAN).is_err());
    }

    #[test]
    fn cnot_action() {
        // |10⟩ is index 2 with qubit 0 as the most significant bit
        let mut s = StateVector::from_amplitudes(&[0.0, 0.0, 1.0, 0.0], 2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert!(close(s.amplitudes()[3], 1.0, 0.0));

        let mut s = StateVector::zero(2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert!(close(s.amplitudes()[0], 1.0, 0.0));

        let mut s = StateVector::from_amplitudes(&[1.0, 0.0, 1.0, 0.0], 2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[3], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[2], 0.0, 0.0));

        assert!(s.apply_cnot(1, 1).is_err());
        assert!(s.apply_cnot(0, 2).is_err());
    }

    #[test]
    fn measurement_examples() {
        let obs = ObservableSet::all(1);
        assert_eq!(StateVector::zero(1).unwrap().measure(&obs).0, vec![1.0]);
        let plus = StateVector::from_amplitudes(&[1.0, 1.0], 1).unwrap();
        assert!(plus.measure(&obs).0[0].abs() < 1e-15);
        assert!(ObservableSet::new(vec![0, 0], 2).is_err());
        assert!(ObservableSet::new(vec![2], 2).is_err());
    }

    #[test]
    fn ry_expectation_at_many_angles() {
        let obs = ObservableSet::all(1);
        for k in 0..64 {
            let theta = -PI + 2.0 * PI * k as f64 / 63.0;
            let mut s = StateVector::zero(1).unwrap();
            s.apply_rotation(0, Axis::Y, theta).unwrap();
            assert!((s.measure(&obs).0[0] - theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn shot_sampling_converges() {
        use rand::SeedableRng;
        let mut s = StateVector::zero(2).unwrap();
        s.apply_rotation(0, Axis::Y, 1.0).unwrap();
        let obs = ObservableSet::all(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let est = s.sample(&obs, 20_000, &mut rng);
        assert!((est.0[0] - 1.0f64.cos()).abs() < 0.03);
        assert_eq!(est.0[1], 1.0);
    }

    #[test]
    fn dump_format() {
        let mut buf = Vec::new();
        StateVector::zero(1).unwrap().dump(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,real,imag\n0,1,0\n1,0,0\n"
        );
    }
}
