//! Synthetic frame structure, linear static solver and dataset generator.
//!
//! Stands in for a detailed FE model of a steel conveyor-bridge segment: a
//! rectangular-prism frame of 3D Euler–Bernoulli beams (6 DOF per node) under
//! random bulk-material and wind load cases. Each case yields seven tilt
//! (rotation) readings and the full translational displacement field.

mod conditioning;
mod dataset;
mod frame;
mod loads;
mod sensors;
mod stiffness;

pub use conditioning::{
    conditioning_diagnostic, conditioning_of, sensor_operator, ConditioningReport,
};
pub use dataset::{sample_dataset, sample_scenarios, Dataset, DatasetHeader, SamplePair};
pub use frame::{build_frame, Element, FrameConfig, FrameModel, Section, SectionSpec};
pub use loads::{load_vector, LoadConfig, LoadScenario};
pub use sensors::{extract_sensors, RotationAxis, SensorChannel, SensorSpec};
pub use stiffness::{assemble_stiffness, element_stiffness_local, solve_static, StaticSolver};

/// Degrees of freedom per node: `ux, uy, uz, rx, ry, rz`.
pub const DOF_PER_NODE: usize = 6;

pub fn dof(node: usize, direction: usize) -> usize {
    node * DOF_PER_NODE + direction
}
