use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, SMatrix, Vector3};

use super::loads::{load_vector, LoadConfig};
use super::{FrameModel, LoadScenario, Section, DOF_PER_NODE};
use crate::error::{Error, Result};

pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Pivots below this fraction of the largest diagonal entry mean a mechanism.
const PIVOT_TOL: f64 = 1e-13;

/// 12×12 Euler–Bernoulli frame element stiffness in local axes.
///
/// Local DOF order per node is `u, v, w, θx, θy, θz` with `x` along the member.
pub fn element_stiffness_local(s: &Section, length: f64) -> Matrix12 {
    let l = length;
    let l2 = l * l;
    let l3 = l2 * l;
    let ea = s.e * s.area / l;
    let gj = s.g * s.j / l;
    let (eiy, eiz) = (s.e * s.iy, s.e * s.iz);

    let mut k = Matrix12::zeros();
    let mut set = |i: usize, j: usize, v: f64| {
        k[(i, j)] = v;
        k[(j, i)] = v;
    };
    set(0, 0, ea);
    set(6, 6, ea);
    set(0, 6, -ea);

    set(3, 3, gj);
    set(9, 9, gj);
    set(3, 9, -gj);

    // bending in the local x–y plane (about z)
    set(1, 1, 12.0 * eiz / l3);
    set(1, 5, 6.0 * eiz / l2);
    set(1, 7, -12.0 * eiz / l3);
    set(1, 11, 6.0 * eiz / l2);
    set(5, 5, 4.0 * eiz / l);
    set(5, 7, -6.0 * eiz / l2);
    set(5, 11, 2.0 * eiz / l);
    set(7, 7, 12.0 * eiz / l3);
    set(7, 11, -6.0 * eiz / l2);
    set(11, 11, 4.0 * eiz / l);

    // bending in the local x–z plane (about y)
    set(2, 2, 12.0 * eiy / l3);
    set(2, 4, -6.0 * eiy / l2);
    set(2, 8, -12.0 * eiy / l3);
    set(2, 10, -6.0 * eiy / l2);
    set(4, 4, 4.0 * eiy / l);
    set(4, 8, 6.0 * eiy / l2);
    set(4, 10, 2.0 * eiy / l);
    set(8, 8, 12.0 * eiy / l3);
    set(8, 10, 6.0 * eiy / l2);
    set(10, 10, 4.0 * eiy / l);
    k
}

/// Rows are the local axes expressed in global coordinates.
pub(crate) fn rotation(a: [f64; 3], b: [f64; 3]) -> Matrix3<f64> {
    let ex = (Vector3::from(b) - Vector3::from(a)).normalize();
    let reference = if ex.z.abs() > 0.99 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    let ey = reference.cross(&ex).normalize();
    let ez = ex.cross(&ey);
    Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()])
}

pub(crate) fn transformation(r: &Matrix3<f64>) -> Matrix12 {
    let mut t = Matrix12::zeros();
    for block in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * block, 3 * block).copy_from(r);
    }
    t
}

pub(crate) fn element_dofs(nodes: [usize; 2]) -> [usize; 12] {
    let mut out = [0; 12];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = nodes[k / 6] * DOF_PER_NODE + k % 6;
    }
    out
}

/// Unconstrained global stiffness matrix.
pub fn assemble_stiffness(model: &FrameModel) -> DMatrix<f64> {
    let n = model.n_dofs();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for e in &model.elements {
        let [a, b] = e.nodes;
        let t = transformation(&rotation(model.nodes[a], model.nodes[b]));
        let kl = element_stiffness_local(&e.section, model.element_length(e));
        let kg = t.transpose() * kl * t;
        let dofs = element_dofs(e.nodes);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                k[(gi, gj)] += kg[(i, j)];
            }
        }
    }
    k
}

/// Factorised constrained system, reusable across load cases.
pub struct StaticSolver {
    n_dofs: usize,
    free: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
}

impl StaticSolver {
    pub fn new(model: &FrameModel) -> Result<Self> {
        let k = assemble_stiffness(model);
        let free = model.free_dofs();
        let kff = k.select_rows(&free).select_columns(&free);
        let chol = factor_spd(kff)?;
        Ok(Self {
            n_dofs: model.n_dofs(),
            free,
            chol,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Solve `K u = f` for a full-length load vector; constrained DOFs get zero.
    pub fn solve(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        if f.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs,
                actual: f.len(),
                context: "load vector",
            });
        }
        let ff = f.select_rows(&self.free);
        let uf = self.chol.solve(&ff);
        let mut u = DVector::zeros(self.n_dofs);
        for (i, &d) in self.free.iter().enumerate() {
            u[d] = uf[i];
        }
        Ok(u)
    }
}

pub(crate) fn factor_spd(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let max_diag = m.diagonal().amax();
    let chol = Cholesky::new(m).ok_or(Error::Singular)?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v * v)
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_TOL * max_diag) {
        return Err(Error::Singular);
    }
    Ok(chol)
}

/// Displacements for one load case.
pub fn solve_static(
    model: &FrameModel,
    scenario: &LoadScenario,
    loads: &LoadConfig,
) -> Result<DVector<f64>> {
    let solver = StaticSolver::new(model)?;
    solver.solve(&load_vector(model, scenario, loads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femgen::{build_frame, dof, Element, FrameConfig, SectionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn section() -> Section {
        SectionSpec::tube(0.2, 0.01).section().unwrap()
    }

    fn beam(n_elements: usize, length: f64, fixed: Vec<usize>) -> FrameModel {
        let nodes = (0..=n_elements)
            .map(|i| [length * i as f64 / n_elements as f64, 0.0, 0.0])
            .collect();
        let elements = (0..n_elements)
            .map(|i| Element {
                nodes: [i, i + 1],
                section: section(),
            })
            .collect();
        FrameModel::new(nodes, elements, fixed).unwrap()
    }

    #[test]
    fn axial_bar_closed_form() {
        let s = Section {
            e: 1.0,
            g: 1.0,
            area: 1.0,
            iy: 1.0,
            iz: 1.0,
            j: 1.0,
        };
        let k = element_stiffness_local(&s, 1.0);
        assert_eq!(
            [k[(0, 0)], k[(0, 6)], k[(6, 0)], k[(6, 6)]],
            [1.0, -1.0, -1.0, 1.0]
        );
    }

    #[test]
    fn element_matrix_is_symmetric_with_six_rigid_modes() {
        let k = element_stiffness_local(&section(), 2.0);
        assert_eq!(k, k.transpose());
        let eig = k.symmetric_eigenvalues();
        let max = eig.amax();
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-9 * max).count(), 6);
    }

    #[test]
    fn cantilever_tip_load() {
        let l = 3.0;
        let p = 1000.0;
        let m = beam(1, l, (0..6).collect());
        let solver = StaticSolver::new(&m).unwrap();
        let mut f = DVector::zeros(m.n_dofs());
        f[dof(1, 2)] = -p;
        let u = solver.solve(&f).unwrap();
        let s = section();
        let exact = p * l.powi(3) / (3.0 * s.e * s.iy);
        assert!((-u[dof(1, 2)] - exact).abs() <= 1e-8 * exact);
        // the same beam loaded sideways bends about the other axis
        let mut f = DVector::zeros(m.n_dofs());
        f[dof(1, 1)] = p;
        let u = solver.solve(&f).unwrap();
        assert!((u[dof(1, 1)] - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn simply_supported_midspan() {
        let l = 4.0;
        let p = 500.0;
        let fixed = vec![
            dof(0, 0),
            dof(0, 1),
            dof(0, 2),
            dof(0, 3),
            dof(2, 1),
            dof(2, 2),
        ];
        let m = beam(2, l, fixed);
        let solver = StaticSolver::new(&m).unwrap();
        let mut f = DVector::zeros(m.n_dofs());
        f[dof(1, 2)] = -p;
        let u = solver.solve(&f).unwrap();
        let s = section();
        let exact = p * l.powi(3) / (48.0 * s.e * s.iy);
        assert!((-u[dof(1, 2)] - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn missing_supports_are_singular() {
        let m = beam(2, 2.0, vec![]);
        assert!(matches!(StaticSolver::new(&m), Err(Error::Singular)));
        let frame = build_frame(&FrameConfig::default()).unwrap();
        let loose = FrameModel::new(frame.nodes.clone(), frame.elements.clone(), vec![]).unwrap();
        assert!(matches!(StaticSolver::new(&loose), Err(Error::Singular)));
    }

    #[test]
    fn constrained_frame_stiffness_is_spd() {
        let m = build_frame(&FrameConfig::default()).unwrap();
        let k = assemble_stiffness(&m);
        assert!(crate::linalg::asymmetry(&k) <= 1e-12 * k.amax());
        let free = m.free_dofs();
        let kff = k.select_rows(&free).select_columns(&free);
        assert!(factor_spd(kff.clone()).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = DVector::from_fn(free.len(), |_, _| rng.random_range(-1.0..1.0));
            assert!(x.dot(&(&kff * &x)) > 0.0);
        }
    }

    #[test]
    fn rotation_is_orthonormal() {
        for (a, b) in [
            ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
            ([0.0, 0.0, 0.0], [0.0, 0.0, 2.0]),
            ([1.0, 2.0, 0.0], [3.0, 5.0, 1.0]),
        ] {
            let r = rotation(a, b);
            assert!((r * r.transpose() - Matrix3::identity()).amax() < 1e-14);
            assert!((r.determinant() - 1.0).abs() < 1e-14);
        }
    }
}
