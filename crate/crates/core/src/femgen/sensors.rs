use nalgebra::DVector;
use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::frame::{station_node, TL, TR};
use super::{dof, FrameModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationAxis {
    X,
    Y,
    Z,
}

impl RotationAxis {
    fn offset(self) -> usize {
        match self {
            RotationAxis::X => 3,
            RotationAxis::Y => 4,
            RotationAxis::Z => 5,
        }
    }

    fn label(self) -> &'static str {
        match self {
            RotationAxis::X => "rx",
            RotationAxis::Y => "ry",
            RotationAxis::Z => "rz",
        }
    }
}

/// One tilt channel: a rotational DOF at a named station.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorChannel {
    pub station: String,
    pub node: usize,
    pub axis: RotationAxis,
}

impl SensorChannel {
    pub fn dof(&self) -> usize {
        dof(self.node, self.axis.offset())
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.station, self.axis.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub channels: Vec<SensorChannel>,
    /// Standard deviation of additive Gaussian noise, rad.
    #[serde(default)]
    pub noise_std: f64,
}

impl SensorSpec {
    /// Three tilt meters along the top of a `bays`-bay frame built by
    /// [`super::build_frame`]: S1 reads three axes, S2 and S3 two each.
    pub fn default_for_bays(bays: usize) -> Self {
        let s1 = station_node(bays / 4, TL);
        let s2 = station_node(bays / 2, TR);
        let s3 = station_node((3 * bays).div_ceil(4), TL);
        let ch = |station: &str, node, axis| SensorChannel {
            station: station.to_string(),
            node,
            axis,
        };
        Self {
            channels: vec![
                ch("S1", s1, RotationAxis::X),
                ch("S1", s1, RotationAxis::Y),
                ch("S1", s1, RotationAxis::Z),
                ch("S2", s2, RotationAxis::X),
                ch("S2", s2, RotationAxis::Y),
                ch("S3", s3, RotationAxis::X),
                ch("S3", s3, RotationAxis::Y),
            ],
            noise_std: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn validate(&self, model: &FrameModel) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::invalid("sensor spec has no channels"));
        }
        for c in &self.channels {
            if c.node >= model.n_nodes() {
                return Err(Error::invalid(format!(
                    "sensor {} references missing node {}",
                    c.label(),
                    c.node
                )));
            }
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("sensor noise must be non-negative"));
        }
        Ok(())
    }

    pub fn dofs(&self) -> Vec<usize> {
        self.channels.iter().map(SensorChannel::dof).collect()
    }

    /// Compact text form used in dataset headers, e.g. `S1:10:rx;S1:10:ry`.
    pub fn describe(&self) -> String {
        self.channels
            .iter()
            .map(|c| format!("{}:{}:{}", c.station, c.node, c.axis.label()))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let channels = text
            .split(';')
            .map(|part| {
                let fields: Vec<&str> = part.split(':').collect();
                let bad = || Error::Format(format!("bad sensor channel '{part}'"));
                if fields.len() != 3 {
                    return Err(bad());
                }
                let axis = match fields[2] {
                    "rx" => RotationAxis::X,
                    "ry" => RotationAxis::Y,
                    "rz" => RotationAxis::Z,
                    _ => return Err(bad()),
                };
                Ok(SensorChannel {
                    station: fields[0].to_string(),
                    node: fields[1].parse().map_err(|_| bad())?,
                    axis,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            noise_std: 0.0,
        })
    }
}

/// Read the configured rotational DOFs, adding sensor noise if `noise_std > 0`.
pub fn extract_sensors(
    u: &DVector<f64>,
    spec: &SensorSpec,
    rng: Option<&mut dyn RngCore>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.len());
    for c in &spec.channels {
        let d = c.dof();
        if d >= u.len() {
            return Err(Error::invalid(format!(
                "sensor {} outside displacement vector",
                c.label()
            )));
        }
        out.push(u[d]);
    }
    if spec.noise_std > 0.0 {
        if let Some(rng) = rng {
            let normal =
                Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
            for v in &mut out {
                *v += normal.sample(&mut *rng);
            }
        }
    }
    Ok(out)
}
