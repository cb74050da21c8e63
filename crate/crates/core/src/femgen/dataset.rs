use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loads::{load_vector, LoadConfig, LoadScenario};
use super::{extract_sensors, FrameModel, SensorSpec, StaticSolver};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

const CSV_MAGIC: &str = "# qsurrogate-dataset v1";
const BIN_MAGIC: &[u8; 4] = b"QSDS";
const BIN_VERSION: u32 = 1;
pub const UNITS: &str = "sensors:rad;displacements:m";

/// Sensor readings and the full translational displacement field of one load case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub sensors: Vec<f64>,
    pub displacements: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub model_hash: String,
    pub n_nodes: usize,
    /// Channel list in [`SensorSpec::describe`] form.
    pub sensors: String,
    pub seed: u64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub pairs: Vec<SamplePair>,
}

/// Random load cases inside the envelope.
///
/// Wind speed and direction and the material load are drawn uniformly; any
/// case with wind above the operating limit has its material load set to zero.
pub fn sample_scenarios(n: usize, seed: u64, cfg: &LoadConfig) -> Vec<LoadScenario> {
    let mut rng = seed::rng(seed, Stream::Data);
    (0..n)
        .map(|_| {
            let wind_speed = rng.random_range(0.0..=cfg.wind_max);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let mut material_load = rng.random_range(cfg.material_min..=cfg.material_max);
            if wind_speed > cfg.wind_operating_limit {
                material_load = 0.0;
            }
            LoadScenario {
                material_load,
                wind_speed,
                wind_direction: [angle.cos(), angle.sin()],
            }
        })
        .collect()
}

/// Solve every scenario from [`sample_scenarios`] and collect (sensor, displacement) pairs.
pub fn sample_dataset(
    model: &FrameModel,
    spec: &SensorSpec,
    loads: &LoadConfig,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset needs at least one sample"));
    }
    spec.validate(model)?;
    let solver = StaticSolver::new(model)?;
    let scenarios = sample_scenarios(n, seed, loads);
    let translational = model.translational_dofs();
    let pairs = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            let u = solver.solve(&load_vector(model, sc, loads))?;
            let mut noise = seed::sub_rng(seed, Stream::Noise, i as u64);
            let sensors = extract_sensors(&u, spec, Some(&mut noise))?;
            let displacements = translational.iter().map(|&d| u[d]).collect();
            Ok(SamplePair {
                sensors,
                displacements,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            model_hash: model.hash(),
            n_nodes: model.n_nodes(),
            sensors: spec.describe(),
            seed,
            units: UNITS.to_string(),
        },
        pairs,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_sensors(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.sensors.len())
    }

    pub fn n_outputs(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.displacements.len())
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.pairs.iter().map(|p| p.sensors.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.pairs.iter().map(|p| p.displacements.clone()).collect()
    }

    pub fn column_names(&self) -> Result<Vec<String>> {
        let spec = SensorSpec::parse(&self.header.sensors)?;
        let mut names: Vec<String> = spec.channels.iter().map(|c| c.label()).collect();
        for n in 0..self.n_outputs() / 3 {
            for axis in ["x", "y", "z"] {
                names.push(format!("n{n}_{axis}"));
            }
        }
        Ok(names)
    }

    fn check_shape(&self) -> Result<()> {
        let (s, d) = (self.n_sensors(), self.n_outputs());
        if self
            .pairs
            .iter()
            .any(|p| p.sensors.len() != s || p.displacements.len() != d)
        {
            return Err(Error::Format("ragged dataset rows".into()));
        }
        Ok(())
    }

    /// Delimited text with `#` header records; floats use shortest round-trip form.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        self.check_shape()?;
        writeln!(w, "{CSV_MAGIC}")?;
        writeln!(w, "# model_hash={}", self.header.model_hash)?;
        writeln!(w, "# nodes={}", self.header.n_nodes)?;
        writeln!(w, "# sensors={}", self.header.sensors)?;
        writeln!(w, "# seed={}", self.header.seed)?;
        writeln!(w, "# units={}", self.header.units)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.column_names()?)?;
        for p in &self.pairs {
            out.write_record(
                p.sensors
                    .iter()
                    .chain(&p.displacements)
                    .map(|v| format!("{v:e}")),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header_lines = Vec::new();
        let mut line = String::new();
        let mut first_data_line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            if line.starts_with('#') {
                header_lines.push(line.trim_end().to_string());
            } else {
                first_data_line = line.clone();
                break;
            }
        }
        if header_lines.first().map(String::as_str) != Some(CSV_MAGIC) {
            return Err(Error::Format("missing dataset header".into()));
        }
        let field = |key: &str| -> Result<String> {
            header_lines
                .iter()
                .find_map(|l| l.strip_prefix(&format!("# {key}=")))
                .map(str::to_string)
                .ok_or_else(|| Error::Format(format!("dataset header lacks '{key}'")))
        };
        let parse_num = |key: &str| -> Result<u64> {
            field(key)?
                .parse()
                .map_err(|_| Error::Format(format!("bad '{key}' in dataset header")))
        };
        let header = DatasetHeader {
            model_hash: field("model_hash")?,
            n_nodes: parse_num("nodes")? as usize,
            sensors: field("sensors")?,
            seed: parse_num("seed")?,
            units: field("units")?,
        };
        let n_sensors = SensorSpec::parse(&header.sensors)?.len();
        let n_cols = n_sensors + 3 * header.n_nodes;

        let rest = first_data_line.as_bytes().chain(reader);
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(rest);
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != n_cols {
                return Err(Error::Format(format!(
                    "row {i} has {} fields, expected {n_cols}",
                    rec.len()
                )));
            }
            let values = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad number '{f}' in row {i}")))
                })
                .collect::<Result<Vec<_>>>()?;
            pairs.push(SamplePair {
                sensors: values[..n_sensors].to_vec(),
                displacements: values[n_sensors..].to_vec(),
            });
        }
        Ok(Self { header, pairs })
    }

    /// Compact little-endian twin of the CSV file.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        self.check_shape()?;
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(BIN_MAGIC)?;
        w.write_all(&BIN_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.n_sensors() as u64).to_le_bytes())?;
        w.write_all(&(self.n_outputs() as u64).to_le_bytes())?;
        for p in &self.pairs {
            for v in p.sensors.iter().chain(&p.displacements) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BIN_MAGIC {
            return Err(Error::Format("not a binary dataset".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        if u32::from_le_bytes(u32buf) != BIN_VERSION {
            return Err(Error::Format("unsupported binary dataset version".into()));
        }
        r.read_exact(&mut u32buf)?;
        let mut header = vec![0u8; u32::from_le_bytes(u32buf) as usize];
        r.read_exact(&mut header)?;
        let header: DatasetHeader = serde_json::from_slice(&header)?;
        let mut u64buf = [0u8; 8];
        let mut next_u64 = |r: &mut dyn Read| -> Result<usize> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf) as usize)
        };
        let rows = next_u64(&mut r)?;
        let n_sensors = next_u64(&mut r)?;
        let n_outputs = next_u64(&mut r)?;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let mut pairs = Vec::with_capacity(rows);
        for _ in 0..rows {
            let sensors = read_vec(n_sensors)?;
            let displacements = read_vec(n_outputs)?;
            pairs.push(SamplePair {
                sensors,
                displacements,
            });
        }
        Ok(Self { header, pairs })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)?;
        let w = std::io::BufWriter::new(file);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(w)
        } else {
            self.write_csv(w)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let r = BufReader::new(file);
        if path.extension().is_some_and(|e| e == "bin") {
            Self::read_binary(r)
        } else {
            Self::read_csv(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femgen::{build_frame, FrameConfig};

    fn small() -> Dataset {
        let m = build_frame(&FrameConfig {
            bays: 4,
            ..FrameConfig::default()
        })
        .unwrap();
        let spec = SensorSpec::default_for_bays(4);
        sample_dataset(&m, &spec, &LoadConfig::default(), 25, 3).unwrap()
    }

    #[test]
    fn wind_limit_forces_zero_material() {
        let cfg = LoadConfig::default();
        let sc = sample_scenarios(2000, 17, &cfg);
        assert!(sc.iter().any(|s| s.wind_speed > 19.0));
        for s in &sc {
            assert!((0.0..=54.0).contains(&s.wind_speed));
            if s.wind_speed > 19.0 {
                assert_eq!(s.material_load, 0.0);
            } else {
                assert!((1.2..=6.5).contains(&s.material_load));
            }
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = small();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let d = small();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(Dataset::read_binary(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(small(), small());
        assert_eq!(small().len(), 25);
        assert_eq!(small().n_outputs(), 3 * 20);
    }

    #[test]
    fn rejects_malformed_csv() {
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        let d = small();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("1,2,3\n");
        assert!(Dataset::read_csv(text.as_bytes()).is_err());
    }
}
