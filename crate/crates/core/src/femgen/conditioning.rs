//! Why direct inversion of the sensor map is ill-posed.
//!
//! With only nodal forces acting, rotations follow from translations by static
//! condensation, `u_r = −K_rr⁻¹ K_rt u_t`. Restricting that operator to the
//! sensor channels gives the linear map `y = A x` from the full translational
//! field to the readings. `AᵀA` has rank at most the channel count, so the
//! normal equations leave a large null space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stiffness::{assemble_stiffness, factor_spd};
use super::{FrameModel, SensorSpec};
use crate::error::{Error, Result};
use crate::linalg::sym_eig;

/// Eigenvalues below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub rank: usize,
    /// `λ_max / λ_min` of `AᵀA` over its non-zero spectrum.
    pub condition_number: f64,
    pub null_space_dim: usize,
    pub n_outputs: usize,
}

/// Sensor operator `A` (channels × translational DOFs, node-major `x, y, z`).
pub fn sensor_operator(model: &FrameModel, spec: &SensorSpec) -> Result<DMatrix<f64>> {
    spec.validate(model)?;
    let k = assemble_stiffness(model);
    let free = model.free_dofs();
    let free_rot: Vec<usize> = free.iter().copied().filter(|d| d % 6 >= 3).collect();
    let translational = model.translational_dofs();
    let free_trans: Vec<(usize, usize)> = translational
        .iter()
        .enumerate()
        .filter(|(_, d)| free.binary_search(d).is_ok())
        .map(|(col, &d)| (col, d))
        .collect();

    let trans_dofs: Vec<usize> = free_trans.iter().map(|&(_, d)| d).collect();
    let krr = k.select_rows(&free_rot).select_columns(&free_rot);
    let krt = k.select_rows(&free_rot).select_columns(&trans_dofs);
    let chol = factor_spd(krr)?;
    let condensed = -chol.solve(&krt);

    let mut a = DMatrix::zeros(spec.len(), translational.len());
    for (row, dof) in spec.dofs().into_iter().enumerate() {
        // a sensor on a constrained rotation always reads zero
        let Ok(r) = free_rot.binary_search(&dof) else {
            continue;
        };
        for (j, &(col, _)) in free_trans.iter().enumerate() {
            a[(row, col)] = condensed[(r, j)];
        }
    }
    Ok(a)
}

/// Rank, condition number and null-space size of `AᵀA`.
pub fn conditioning_of(a: &DMatrix<f64>) -> Result<ConditioningReport> {
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("sensor operator is identically zero"));
    }
    // Column scaling keeps the spectrum well inside f64 range.
    let scale = a.amax();
    let scaled = a / scale;
    let ata = scaled.transpose() * &scaled;
    let eig = sym_eig(&ata)?;
    let lmax = eig.eigenvalues[0];
    let nonzero: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > RANK_TOL * lmax)
        .collect();
    let rank = nonzero.len();
    let lmin = *nonzero.last().expect("at least the largest eigenvalue");
    Ok(ConditioningReport {
        rank,
        condition_number: lmax / lmin,
        null_space_dim: a.ncols() - rank,
        n_outputs: a.ncols(),
    })
}

pub fn conditioning_diagnostic(
    model: &FrameModel,
    spec: &SensorSpec,
) -> Result<ConditioningReport> {
    conditioning_of(&sensor_operator(model, spec)?)
}
