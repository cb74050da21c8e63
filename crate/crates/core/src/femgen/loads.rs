use nalgebra::{DVector, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::stiffness::{element_dofs, rotation, transformation};
use super::{dof, FrameModel};

/// One static load case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadScenario {
    /// Bulk-material line load on the top chords, kN/m (0 when not operating).
    pub material_load: f64,
    /// Wind speed, m/s.
    pub wind_speed: f64,
    /// Unit wind direction in the horizontal plane, `[x, y]`.
    pub wind_direction: [f64; 2],
}

impl LoadScenario {
    pub fn zero() -> Self {
        Self {
            material_load: 0.0,
            wind_speed: 0.0,
            wind_direction: [1.0, 0.0],
        }
    }
}

/// Load envelope and wind-pressure constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadConfig {
    /// kN/m
    pub material_min: f64,
    /// kN/m
    pub material_max: f64,
    /// m/s
    pub wind_max: f64,
    /// Above this wind speed (m/s) the conveyor does not run.
    pub wind_operating_limit: f64,
    /// kg/m³
    pub air_density: f64,
    pub drag_coefficient: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            material_min: 1.2,
            material_max: 6.5,
            wind_max: 54.0,
            wind_operating_limit: 19.0,
            air_density: 1.225,
            drag_coefficient: 1.2,
        }
    }
}

impl LoadConfig {
    /// Drag pressure `½ ρ C_d v²` in pascals.
    pub fn wind_pressure(&self, speed: f64) -> f64 {
        0.5 * self.air_density * self.drag_coefficient * speed * speed
    }
}

fn distinct_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

/// Half the distance to each neighbouring level.
fn tributary(levels: &[f64], value: f64) -> f64 {
    let i = levels
        .iter()
        .position(|l| (l - value).abs() < 1e-9)
        .expect("value is one of the levels");
    let lo = if i == 0 { levels[i] } else { levels[i - 1] };
    let hi = if i + 1 == levels.len() {
        levels[i]
    } else {
        levels[i + 1]
    };
    0.5 * (hi - lo)
}

/// Work-equivalent nodal loads of a uniform line load `w` (N/m, global axes).
fn add_line_load(model: &FrameModel, element: usize, w: Vector3<f64>, f: &mut DVector<f64>) {
    let e = &model.elements[element];
    let [a, b] = e.nodes;
    let l = model.element_length(e);
    let r = rotation(model.nodes[a], model.nodes[b]);
    let p = r * w;
    let l2 = l * l / 12.0;
    let local = SVector::<f64, 12>::from_column_slice(&[
        p.x * l / 2.0,
        p.y * l / 2.0,
        p.z * l / 2.0,
        0.0,
        -p.z * l2,
        p.y * l2,
        p.x * l / 2.0,
        p.y * l / 2.0,
        p.z * l / 2.0,
        0.0,
        p.z * l2,
        -p.y * l2,
    ]);
    let global = transformation(&r).transpose() * local;
    for (i, &d) in element_dofs(e.nodes).iter().enumerate() {
        f[d] += global[i];
    }
}

/// Global load vector for one scenario.
///
/// The material load is shared equally by the top chord lines (members at the
/// highest level running along x). Wind pressure acts on the windward side
/// face (y component) and the windward end face (x component), lumped onto
/// face nodes by tributary area.
pub fn load_vector(model: &FrameModel, scenario: &LoadScenario, cfg: &LoadConfig) -> DVector<f64> {
    let mut f = DVector::zeros(model.n_dofs());
    let xs = distinct_sorted(model.nodes.iter().map(|n| n[0]).collect());
    let ys = distinct_sorted(model.nodes.iter().map(|n| n[1]).collect());
    let zs = distinct_sorted(model.nodes.iter().map(|n| n[2]).collect());
    let top = *zs.last().expect("model has nodes");

    if scenario.material_load != 0.0 {
        let top_chords: Vec<usize> = model
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let [a, b] = e.nodes.map(|n| model.nodes[n]);
                (a[2] - top).abs() < 1e-9
                    && (b[2] - top).abs() < 1e-9
                    && (a[1] - b[1]).abs() < 1e-9
                    && (a[0] - b[0]).abs() > 1e-9
            })
            .map(|(i, _)| i)
            .collect();
        let lines = distinct_sorted(
            top_chords
                .iter()
                .map(|&i| model.nodes[model.elements[i].nodes[0]][1])
                .collect(),
        )
        .len()
        .max(1);
        let w = Vector3::new(0.0, 0.0, -scenario.material_load * 1e3 / lines as f64);
        for i in top_chords {
            add_line_load(model, i, w, &mut f);
        }
    }

    let q = cfg.wind_pressure(scenario.wind_speed);
    if q != 0.0 {
        let [dx, dy] = scenario.wind_direction;
        let side_y = if dy >= 0.0 {
            ys[0]
        } else {
            *ys.last().unwrap()
        };
        let end_x = if dx >= 0.0 {
            xs[0]
        } else {
            *xs.last().unwrap()
        };
        for (n, p) in model.nodes.iter().enumerate() {
            if dy != 0.0 && (p[1] - side_y).abs() < 1e-9 {
                let area = tributary(&xs, p[0]) * tributary(&zs, p[2]);
                f[dof(n, 1)] += q * dy * area;
            }
            if dx != 0.0 && (p[0] - end_x).abs() < 1e-9 {
                let area = tributary(&ys, p[1]) * tributary(&zs, p[2]);
                f[dof(n, 0)] += q * dx * area;
            }
        }
    }
    f
}
