use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{dof, DOF_PER_NODE};
use crate::error::{Error, Result};

/// Hollow square tube, dimensions in metres, moduli in pascals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub outer: f64,
    pub thickness: f64,
    #[serde(default = "steel_modulus")]
    pub youngs_modulus: f64,
    #[serde(default = "steel_poisson")]
    pub poisson: f64,
}

fn steel_modulus() -> f64 {
    200e9
}

fn steel_poisson() -> f64 {
    0.3
}

impl SectionSpec {
    pub fn tube(outer: f64, thickness: f64) -> Self {
        Self {
            outer,
            thickness,
            youngs_modulus: steel_modulus(),
            poisson: steel_poisson(),
        }
    }

    pub fn section(&self) -> Result<Section> {
        let b = self.outer;
        let t = self.thickness;
        if !(b > 0.0 && t > 0.0 && 2.0 * t < b) {
            return Err(Error::invalid(format!("invalid tube section {b} x {t}")));
        }
        let inner = b - 2.0 * t;
        let i = (b.powi(4) - inner.powi(4)) / 12.0;
        // thin-walled closed section (Bredt)
        let j = t * (b - t).powi(3);
        Ok(Section {
            e: self.youngs_modulus,
            g: self.youngs_modulus / (2.0 * (1.0 + self.poisson)),
            area: b * b - inner * inner,
            iy: i,
            iz: i,
            j,
        })
    }
}

/// Beam section properties (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub e: f64,
    pub g: f64,
    pub area: f64,
    pub iy: f64,
    pub iz: f64,
    pub j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub nodes: [usize; 2],
    pub section: Section,
}

/// Geometry, connectivity and supports of a beam frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameModel {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<Element>,
    /// Constrained global DOF indices, sorted and unique.
    pub fixed_dofs: Vec<usize>,
}

impl FrameModel {
    pub fn new(
        nodes: Vec<[f64; 3]>,
        elements: Vec<Element>,
        mut fixed_dofs: Vec<usize>,
    ) -> Result<Self> {
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        let model = Self {
            nodes,
            elements,
            fixed_dofs,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.elements.is_empty() {
            return Err(Error::invalid("frame needs nodes and elements"));
        }
        let n = self.nodes.len();
        for e in &self.elements {
            let [a, b] = e.nodes;
            if a >= n || b >= n {
                return Err(Error::invalid("element references a missing node"));
            }
            if self.element_length(e) <= 0.0 {
                return Err(Error::invalid("zero-length element"));
            }
        }
        if let Some(&d) = self.fixed_dofs.last() {
            if d >= self.n_dofs() {
                return Err(Error::invalid("support references a missing DOF"));
            }
        }
        // connectivity by union-find
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for e in &self.elements {
            let ra = root(&mut parent, e.nodes[0]);
            let rb = root(&mut parent, e.nodes[1]);
            parent[ra] = rb;
        }
        let r0 = root(&mut parent, 0);
        if (1..n).any(|i| root(&mut parent, i) != r0) {
            return Err(Error::invalid("frame is not connected"));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * DOF_PER_NODE
    }

    pub fn element_length(&self, e: &Element) -> f64 {
        let a = Vector3::from(self.nodes[e.nodes[0]]);
        let b = Vector3::from(self.nodes[e.nodes[1]]);
        (b - a).norm()
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        let mut fixed = self.fixed_dofs.iter().peekable();
        (0..self.n_dofs())
            .filter(|d| {
                if fixed.peek() == Some(&d) {
                    fixed.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// Indices of all translational DOFs, node by node (`x, y, z`).
    pub fn translational_dofs(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .flat_map(|n| (0..3).map(move |d| dof(n, d)))
            .collect()
    }

    /// Short content hash used to tie datasets to the model that made them.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("frame model serialises");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parametric frame: bays along x, width along y, height along z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub bays: usize,
    pub span: f64,
    pub width: f64,
    pub height: f64,
    pub chord: SectionSpec,
    pub brace: SectionSpec,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            bays: 10,
            span: 23.65,
            width: 3.6,
            height: 2.6,
            chord: SectionSpec::tube(0.25, 0.012),
            brace: SectionSpec::tube(0.15, 0.008),
        }
    }
}

// Node layout per station: bottom-left, bottom-right, top-left, top-right.
pub(crate) const BL: usize = 0;
pub(crate) const BR: usize = 1;
pub(crate) const TL: usize = 2;
pub(crate) const TR: usize = 3;

pub(crate) fn station_node(station: usize, corner: usize) -> usize {
    4 * station + corner
}

/// Rectangular-prism truss frame with chords, verticals, cross members and
/// diagonals, fixed at the four bottom corners.
pub fn build_frame(cfg: &FrameConfig) -> Result<FrameModel> {
    if cfg.bays == 0 {
        return Err(Error::invalid("frame needs at least one bay"));
    }
    if !(cfg.span > 0.0 && cfg.width > 0.0 && cfg.height > 0.0) {
        return Err(Error::invalid("frame dimensions must be positive"));
    }
    let chord = cfg.chord.section()?;
    let brace = cfg.brace.section()?;
    let stations = cfg.bays + 1;
    let dx = cfg.span / cfg.bays as f64;

    let mut nodes = Vec::with_capacity(4 * stations);
    for s in 0..stations {
        let x = s as f64 * dx;
        nodes.push([x, 0.0, 0.0]);
        nodes.push([x, cfg.width, 0.0]);
        nodes.push([x, 0.0, cfg.height]);
        nodes.push([x, cfg.width, cfg.height]);
    }

    let mut elements = Vec::new();
    let mut add = |a: usize, b: usize, section: Section| {
        elements.push(Element {
            nodes: [a, b],
            section,
        })
    };
    for s in 0..stations {
        let n = |c| station_node(s, c);
        add(n(BL), n(TL), brace);
        add(n(BR), n(TR), brace);
        add(n(BL), n(BR), brace);
        add(n(TL), n(TR), brace);
    }
    for s in 0..cfg.bays {
        let a = |c| station_node(s, c);
        let b = |c| station_node(s + 1, c);
        for c in [BL, BR, TL, TR] {
            add(a(c), b(c), chord);
        }
        // alternate diagonal direction bay by bay
        if s % 2 == 0 {
            add(a(BL), b(TL), brace);
            add(a(BR), b(TR), brace);
        } else {
            add(a(TL), b(BL), brace);
            add(a(TR), b(BR), brace);
        }
        add(a(TL), b(TR), brace);
        add(a(BL), b(BR), brace);
    }

    let mut fixed = Vec::new();
    for node in [
        station_node(0, BL),
        station_node(0, BR),
        station_node(cfg.bays, BL),
        station_node(cfg.bays, BR),
    ] {
        fixed.extend((0..DOF_PER_NODE).map(|d| dof(node, d)));
    }
    FrameModel::new(nodes, elements, fixed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bay_counts() {
        let m = build_frame(&FrameConfig {
            bays: 1,
            ..FrameConfig::default()
        })
        .unwrap();
        assert_eq!(m.n_nodes(), 8);
        assert_eq!(m.n_dofs(), 48);
        assert_eq!(m.fixed_dofs.len(), 24);
    }

    #[test]
    fn default_desk_counts() {
        let m = build_frame(&FrameConfig::default()).unwrap();
        assert_eq!(m.n_nodes(), 44);
        assert_eq!(m.n_dofs(), 264);
        assert_eq!(m.translational_dofs().len(), 132);
        assert_eq!(m.free_dofs().len(), 264 - 24);
    }

    #[test]
    fn invalid_geometry() {
        assert!(build_frame(&FrameConfig {
            bays: 0,
            ..FrameConfig::default()
        })
        .is_err());
        assert!(build_frame(&FrameConfig {
            span: 0.0,
            ..FrameConfig::default()
        })
        .is_err());
        assert!(SectionSpec::tube(0.1, 0.06).section().is_err());
    }

    #[test]
    fn disconnected_model_rejected() {
        let s = SectionSpec::tube(0.1, 0.01).section().unwrap();
        let nodes = vec![[0.0; 3], [1.0, 0.0, 0.0], [5.0, 0.0, 0.0], [6.0, 0.0, 0.0]];
        let elements = vec![
            Element {
                nodes: [0, 1],
                section: s,
            },
            Element {
                nodes: [2, 3],
                section: s,
            },
        ];
        assert!(FrameModel::new(nodes, elements, (0..6).collect()).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = build_frame(&FrameConfig::default()).unwrap();
        let b = build_frame(&FrameConfig::default()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
