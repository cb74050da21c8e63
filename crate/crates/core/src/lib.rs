//! Hybrid quantum-classical surrogates for inverse finite-element modelling.
//!
//! Sparse tilt-sensor readings are mapped to full nodal displacement fields.
//! The crate bundles everything the experiments need:
//!
//! - [`femgen`]: a parametric 3D frame solver that produces synthetic
//!   sensor/displacement datasets,
//! - [`embed`]: polynomial → SPD → density-matrix → Hilbert–Schmidt features,
//! - [`qsim`]: a statevector simulator with parameter-shift gradients,
//! - [`nn`]: dense and hybrid networks, Adam training and metrics,
//! - [`clustering`]: k-means with elbow, silhouette and Davies–Bouldin scores.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod embed;
pub mod error;
pub mod femgen;
pub mod linalg;
pub mod nn;
pub mod qsim;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
