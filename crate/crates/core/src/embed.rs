//! Sensor-vector embedding into quantum-ready states.
//!
//! The pipeline is polynomial expansion → Gram matrix → `+εI` → SPD square
//! root → unit-trace density matrix → column-major Hilbert–Schmidt
//! vectorisation. Everything here is real arithmetic; the density matrices are
//! real symmetric because the inputs are real.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{self, SpectralDecomposition};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// A finite, non-empty real feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector must not be empty"));
        }
        ensure_finite(&values, "feature vector")?;
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Which monomials the polynomial expansion keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermMode {
    /// Every monomial of total degree `1..=degree`.
    #[default]
    AllUpToDegree,
    /// Only monomials of total degree exactly `degree` (e.g. 28 quadratic terms for 7 inputs).
    ExactDegreeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyConfig {
    pub degree: usize,
    #[serde(default)]
    pub include_bias: bool,
    #[serde(default)]
    pub terms: TermMode,
}

impl Default for PolyConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            include_bias: false,
            terms: TermMode::AllUpToDegree,
        }
    }
}

impl PolyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.degree) {
            return Err(Error::invalid(format!(
                "polynomial degree must be 1, 2 or 3 (got {})",
                self.degree
            )));
        }
        Ok(())
    }

    fn degrees(&self) -> std::ops::RangeInclusive<usize> {
        match self.terms {
            TermMode::AllUpToDegree => 1..=self.degree,
            TermMode::ExactDegreeOnly => self.degree..=self.degree,
        }
    }

    /// Length of the expanded vector for `m` inputs, computed without expanding.
    pub fn expanded_dim(&self, m: usize) -> usize {
        let terms: usize = self.degrees().map(|k| binomial(m + k - 1, k)).sum();
        terms + usize::from(self.include_bias)
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Monomial expansion in graded-lexicographic order.
///
/// Within a degree, index tuples `i1 ≤ i2 ≤ … ≤ ik` are listed lexicographically,
/// so `[x1, x2]` at degree 2 gives `[x1, x2, x1², x1·x2, x2²]`. The constant
/// term, when requested, comes first.
pub fn poly_expand(x: &FeatureVector, cfg: &PolyConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    let xs = x.as_slice();
    let m = xs.len();
    let mut out = Vec::with_capacity(cfg.expanded_dim(m));
    if cfg.include_bias {
        out.push(1.0);
    }
    for k in cfg.degrees() {
        push_monomials(xs, k, 0, 1.0, &mut out);
    }
    debug_assert_eq!(out.len(), cfg.expanded_dim(m));
    FeatureVector::new(out)
}

fn push_monomials(xs: &[f64], remaining: usize, start: usize, acc: f64, out: &mut Vec<f64>) {
    if remaining == 0 {
        out.push(acc);
        return;
    }
    for i in start..xs.len() {
        push_monomials(xs, remaining - 1, i, acc * xs[i], out);
    }
}

/// Outer product `z zᵀ`.
pub fn gram(z: &FeatureVector) -> DMatrix<f64> {
    let v = DVector::from_column_slice(z.as_slice());
    &v * v.transpose()
}

/// Symmetric matrix shifted by `εI`, `ε > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    epsilon: f64,
}

impl SpdMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

pub fn regularize(k: &DMatrix<f64>, epsilon: f64) -> Result<SpdMatrix> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be positive (got {epsilon})"
        )));
    }
    if k.nrows() != k.ncols() || k.nrows() == 0 {
        return Err(Error::invalid("regularize needs a non-empty square matrix"));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram matrix"));
    }
    let scale = k.amax();
    if linalg::asymmetry(k) > 1e-12 * scale {
        return Err(Error::invalid("regularize needs a symmetric matrix"));
    }
    let mut entries = k.clone();
    for i in 0..entries.nrows() {
        entries[(i, i)] += epsilon;
    }
    Ok(SpdMatrix { entries, epsilon })
}

pub fn sym_eig(m: &SpdMatrix) -> Result<SpectralDecomposition> {
    linalg::sym_eig(&m.entries)
}

/// Principal square root `V Λ^{1/2} Vᵀ`.
pub fn matrix_sqrt(m: &SpdMatrix) -> Result<DMatrix<f64>> {
    let decomp = sym_eig(m)?;
    // Rounding can leave eigenvalues a few ulps below zero for tiny epsilon.
    Ok(decomp.map_spectrum(|l| l.max(0.0).sqrt()))
}

/// Trace-one positive semidefinite real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<f64>,
}

impl DensityMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `Tr(ρ²)`, which for symmetric ρ equals the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().copied().collect()
    }
}

pub fn to_density(sqrt: &DMatrix<f64>) -> Result<DensityMatrix> {
    let trace = sqrt.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::invalid(format!(
            "density normalisation needs a positive trace (got {trace})"
        )));
    }
    let mut entries = sqrt / trace;
    // Renormalise the diagonal sum so the trace is one to rounding.
    let residual = entries.trace();
    if residual != 1.0 {
        entries /= residual;
    }
    Ok(DensityMatrix { entries })
}

/// Unit-norm Hilbert–Schmidt state `vec(ρ)/√Tr(ρ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedState {
    pub amplitudes: Vec<f64>,
    pub purity: f64,
}

/// Column-major flattening divided by `√Tr(ρ²)`.
pub fn hs_vectorize(rho: &DensityMatrix) -> EmbeddedState {
    let purity = rho.purity();
    let scale = purity.sqrt();
    let amplitudes = rho.entries.as_slice().iter().map(|v| v / scale).collect();
    EmbeddedState { amplitudes, purity }
}

/// `V_kᵀ z` with the `k` leading eigenvectors.
pub fn spectral_project(
    z: &FeatureVector,
    decomp: &SpectralDecomposition,
    k: usize,
) -> Result<FeatureVector> {
    let d = decomp.dim();
    if k == 0 || k > d {
        return Err(Error::invalid(format!(
            "projection rank must be in 1..={d} (got {k})"
        )));
    }
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: z.len(),
            context: "spectral_project",
        });
    }
    let zv = DVector::from_column_slice(z.as_slice());
    let proj = decomp.eigenvectors.columns(0, k).transpose() * zv;
    FeatureVector::new(proj.as_slice().to_vec())
}

/// Density matrix of one feature vector (steps 1–4).
pub fn density_of(x: &FeatureVector, cfg: &PolyConfig, epsilon: f64) -> Result<DensityMatrix> {
    let z = poly_expand(x, cfg)?;
    density_of_expanded(&z, epsilon)
}

pub(crate) fn density_of_expanded(z: &FeatureVector, epsilon: f64) -> Result<DensityMatrix> {
    let spd = regularize(&gram(z), epsilon)?;
    to_density(&matrix_sqrt(&spd)?)
}

/// The full embedding of one raw feature vector.
pub fn embed(x: &FeatureVector, cfg: &PolyConfig, epsilon: f64) -> Result<EmbeddedState> {
    Ok(hs_vectorize(&density_of(x, cfg, epsilon)?))
}

/// Embedding settings as they appear in experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default)]
    pub poly: PolyConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Optional rank of a spectral projection applied to the expanded features
    /// before the Gram step. The projection basis comes from the training
    /// set's regularised second-moment matrix.
    #[serde(default)]
    pub projection: Option<usize>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            poly: PolyConfig::default(),
            epsilon: DEFAULT_EPSILON,
            projection: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        self.poly.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("embedding epsilon must be positive"));
        }
        if let Some(k) = self.projection {
            let d = self.poly.expanded_dim(input_dim);
            if k == 0 || k > d {
                return Err(Error::invalid(format!(
                    "projection rank must be in 1..={d} (got {k})"
                )));
            }
        }
        Ok(())
    }

    /// Side of the density matrix, `d'`.
    pub fn density_dim(&self, input_dim: usize) -> usize {
        self.projection
            .unwrap_or_else(|| self.poly.expanded_dim(input_dim))
    }

    /// Qubits needed to hold `vec(ρ)`: `⌈log₂ d'²⌉`.
    pub fn amplitude_qubits(&self, input_dim: usize) -> usize {
        qubits_for_len(self.density_dim(input_dim).pow(2))
    }
}

pub fn qubits_for_len(len: usize) -> usize {
    let mut n = 0;
    while (1usize << n) < len {
        n += 1;
    }
    n.max(1)
}

/// An embedding ready to apply, including a fitted projection basis if configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub config: EmbeddingConfig,
    pub projection_basis: Option<SpectralDecomposition>,
}

impl Embedder {
    /// Fit the projection basis (if any) on training inputs.
    pub fn fit(config: EmbeddingConfig, inputs: &[Vec<f64>]) -> Result<Self> {
        let m = inputs
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("cannot fit an embedder on no samples"))?;
        config.validate(m)?;
        let projection_basis = match config.projection {
            None => None,
            Some(_) => {
                let d = config.poly.expanded_dim(m);
                let mut moment = DMatrix::<f64>::zeros(d, d);
                for x in inputs {
                    let z = poly_expand(&FeatureVector::new(x.clone())?, &config.poly)?;
                    moment += gram(&z);
                }
                moment /= inputs.len() as f64;
                let spd = regularize(&linalg::symmetrize(moment), config.epsilon)?;
                Some(sym_eig(&spd)?)
            }
        };
        Ok(Self {
            config,
            projection_basis,
        })
    }

    pub fn features(&self, x: &[f64]) -> Result<FeatureVector> {
        let z = poly_expand(&FeatureVector::new(x.to_vec())?, &self.config.poly)?;
        match (&self.projection_basis, self.config.projection) {
            (Some(basis), Some(k)) => spectral_project(&z, basis, k),
            _ => Ok(z),
        }
    }

    pub fn density(&self, x: &[f64]) -> Result<DensityMatrix> {
        density_of_expanded(&self.features(x)?, self.config.epsilon)
    }

    pub fn state(&self, x: &[f64]) -> Result<EmbeddedState> {
        Ok(hs_vectorize(&self.density(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_expansion_order() {
        let out = poly_expand(&fv(&[1.0, 2.0]), &PolyConfig::default()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn bias_comes_first() {
        let cfg = PolyConfig {
            include_bias: true,
            ..PolyConfig::default()
        };
        let out = poly_expand(&fv(&[3.0, 5.0]), &cfg).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 3.0, 5.0, 9.0, 15.0, 25.0]);
    }

    #[test]
    fn zero_input_cubic_is_zero() {
        let cfg = PolyConfig {
            degree: 3,
            ..PolyConfig::default()
        };
        let out = poly_expand(&fv(&[0.0; 7]), &cfg).unwrap();
        assert_eq!(out.len(), 7 + 28 + 84);
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_degree_counts() {
        let cfg = PolyConfig {
            degree: 2,
            include_bias: false,
            terms: TermMode::ExactDegreeOnly,
        };
        assert_eq!(cfg.expanded_dim(7), 28);
        assert_eq!(PolyConfig::default().expanded_dim(7), 35);
    }

    #[test]
    fn expansion_errors() {
        let bad = PolyConfig {
            degree: 4,
            ..PolyConfig::default()
        };
        assert!(poly_expand(&fv(&[1.0]), &bad).is_err());
        assert!(FeatureVector::new(vec![f64::INFINITY]).is_err());
        assert!(FeatureVector::new(vec![]).is_err());
    }

    #[test]
    fn gram_examples() {
        assert_eq!(
            gram(&fv(&[1.0, 0.0])),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(
            gram(&fv(&[1.0, 2.0])),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])
        );
    }

    #[test]
    fn regularize_examples() {
        let r = regularize(&DMatrix::zeros(2, 2), 1e-6).unwrap();
        assert_eq!(r.entries(), &(DMatrix::identity(2, 2) * 1e-6));
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let r = regularize(&k, 1e-6).unwrap();
        let d = sym_eig(&r).unwrap();
        assert!((d.eigenvalues[0] - (5.0 + 1e-6)).abs() < 1e-12);
        assert!((d.eigenvalues[1] - 1e-6).abs() < 1e-12);
        assert!(regularize(&k, 0.0).is_err());
        assert!(regularize(&k, -1.0).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let m = regularize(
            &DMatrix::from_diagonal(&DVector::from_vec(vec![4.0 - 1e-6, 9.0 - 1e-6])),
            1e-6,
        )
        .unwrap();
        let s = matrix_sqrt(&m).unwrap();
        assert!((s[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((s[(1, 1)] - 3.0).abs() < 1e-12);
        assert_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn density_examples() {
        let rho = to_density(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).unwrap();
        assert!((rho.entries()[(0, 0)] - 0.4).abs() < 1e-15);
        assert!((rho.entries()[(1, 1)] - 0.6).abs() < 1e-15);
        let rho = to_density(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(rho.entries(), &(DMatrix::identity(4, 4) * 0.25));
        assert!(to_density(&DMatrix::zeros(2, 2)).is_err());

        let cfg = PolyConfig {
            degree: 1,
            ..PolyConfig::default()
        };
        let rho = density_of(&fv(&[1.0, 2.0]), &cfg, 1e-6).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hs_examples() {
        let pure = DensityMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        };
        let s = hs_vectorize(&pure);
        assert_eq!(s.amplitudes, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.purity, 1.0);

        let mixed = to_density(&DMatrix::identity(2, 2)).unwrap();
        let s = hs_vectorize(&mixed);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.purity - 0.5).abs() < 1e-15);
        for (a, b) in s.amplitudes.iter().zip([h, 0.0, 0.0, h]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hs_vectorize_is_column_major() {
        let rho = DensityMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.3, 0.5]),
        };
        let s = hs_vectorize(&rho);
        let n = rho.purity().sqrt();
        assert!((s.amplitudes[1] - 0.3 / n).abs() < 1e-15);
        assert!((s.amplitudes[2] - 0.1 / n).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let d =
            linalg::sym_eig(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]))).unwrap();
        let p = spectral_project(&fv(&[0.0, 5.0]), &d, 1).unwrap();
        assert_eq!(p.as_slice(), &[0.0]);
        let p = spectral_project(&fv(&[3.0, 4.0]), &d, 2).unwrap();
        assert!((p.norm() - 5.0).abs() < 1e-10);
        assert!(spectral_project(&fv(&[1.0, 1.0]), &d, 0).is_err());
        assert!(spectral_project(&fv(&[1.0, 1.0]), &d, 3).is_err());
    }

    #[test]
    fn zero_sensor_vector_is_maximally_mixed() {
        let s = embed(&fv(&[0.0; 7]), &PolyConfig::default(), 1e-6).unwrap();
        let d = 35;
        assert_eq!(s.amplitudes.len(), d * d);
        let diag = 1.0 / (d as f64).sqrt();
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { diag } else { 0.0 };
                assert!((s.amplitudes[i + j * d] - want).abs() < 1e-12);
            }
        }
        assert!((s.purity - 1.0 / d as f64).abs() < 1e-12);
    }

    #[test]
    fn qubit_counts() {
        let jetty = EmbeddingConfig {
            poly: PolyConfig {
                degree: 2,
                include_bias: false,
                terms: TermMode::ExactDegreeOnly,
            },
            ..EmbeddingConfig::default()
        };
        assert_eq!(jetty.density_dim(7), 28);
        assert_eq!(jetty.amplitude_qubits(7), 10);
        let reduced = EmbeddingConfig {
            projection: Some(8),
            ..EmbeddingConfig::default()
        };
        assert_eq!(reduced.amplitude_qubits(7), 6);
    }
}
