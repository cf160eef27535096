//! The JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use cdp_core::dpm::{DpmSpec, GibbsSettings, Kernel};
use cdp_core::error::{CdpError, Result};
use cdp_core::ingest::ReadOptions;
use cdp_core::process::{Model, MonteCarloSettings, TruncationPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    /// Horizon `t` for laws of `S_t` and for simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Fixed number of summands: the law of `S_n` instead of `S_t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpm: Option<DpmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Provenance written by `cdp posterior`; ignored on input and not hashed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub paths: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            paths: MonteCarloSettings::default().paths,
        }
    }
}

/// Evaluation points: an explicit list or an evenly spaced range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Points(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match self {
            Self::Points(p) => p.clone(),
            Self::Range { start, stop, points } => {
                if *points < 2 || stop.partial_cmp(start) != Some(std::cmp::Ordering::Greater) {
                    return Err(CdpError::Config(format!(
                        "grid range needs stop > start and at least 2 points, got {start}..{stop} with {points}"
                    )));
                }
                (0..*points)
                    .map(|i| start + (stop - start) * i as f64 / (*points - 1) as f64)
                    .collect()
            }
        };
        if pts.is_empty() || pts.iter().any(|p| !p.is_finite()) {
            return Err(CdpError::Config("grid points must be finite and non-empty".into()));
        }
        Ok(pts)
    }

    /// `start:stop:points` or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || CdpError::Config(format!("cannot read grid '{s}' (use start:stop:points or a,b,c)"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(Self::Range {
                start: parts[0].trim().parse().map_err(|_| bad())?,
                stop: parts[1].trim().parse().map_err(|_| bad())?,
                points: parts[2].trim().parse().map_err(|_| bad())?,
            })
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()
                .map(Self::Points)
        }
    }
}

fn default_chains() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpmConfig {
    /// Mixture for interarrival times; defaults to alpha 1 with a Gamma(1, 8) rate base.
    #[serde(default = "default_time_spec")]
    pub time: DpmSpec,
    /// Mixture for event locations; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<DpmSpec>,
    #[serde(default)]
    pub gibbs: GibbsSettings,
    #[serde(default = "default_chains")]
    pub chains: usize,
}

impl Default for DpmConfig {
    fn default() -> Self {
        Self {
            time: default_time_spec(),
            space: None,
            gibbs: GibbsSettings::default(),
            chains: 1,
        }
    }
}

fn default_time_spec() -> DpmSpec {
    DpmSpec {
        alpha: 1.0,
        kernel: Kernel::ExponentialGamma { shape: 1.0, rate: 8.0 },
        dims: 1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default = "col_date")]
    pub date_col: String,
    #[serde(default = "col_x")]
    pub x_col: String,
    #[serde(default = "col_y")]
    pub y_col: String,
    #[serde(default = "col_id")]
    pub id_col: String,
    /// Columns of `(interarrival, mark)` pairs for `cdp posterior`.
    #[serde(default = "col_time")]
    pub time_col: String,
    #[serde(default = "col_mark")]
    pub mark_col: String,
    #[serde(default = "comma")]
    pub delimiter: char,
    #[serde(default)]
    pub skip_invalid: bool,
}

fn col_date() -> String {
    "date".into()
}
fn col_x() -> String {
    "x".into()
}
fn col_y() -> String {
    "y".into()
}
fn col_id() -> String {
    "id".into()
}
fn col_time() -> String {
    "interarrival".into()
}
fn col_mark() -> String {
    "mark".into()
}
fn comma() -> char {
    ','
}

impl DataConfig {
    pub fn new(path: PathBuf) -> Self {
        Self {
            path,
            date_col: col_date(),
            x_col: col_x(),
            y_col: col_y(),
            id_col: col_id(),
            time_col: col_time(),
            mark_col: col_mark(),
            delimiter: comma(),
            skip_invalid: false,
        }
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(|b| b.is_ascii())
            .ok_or_else(|| CdpError::Config(format!("delimiter '{}' is not a single ASCII character", self.delimiter)))
    }

    pub fn read_options(&self) -> Result<ReadOptions> {
        Ok(ReadOptions {
            date_col: self.date_col.clone(),
            x_col: self.x_col.clone(),
            y_col: self.y_col.clone(),
            id_col: self.id_col.clone(),
            delimiter: self.delimiter_byte()?,
            skip_invalid: self.skip_invalid,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File (single table) or directory (several tables); standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CdpError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CdpError::Config(m) => CdpError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            CdpError::Config(format!("at '{at}': {}", e.inner()))
        })
    }

    /// SHA-256 of the configuration as run, without the metadata block.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.metadata = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model(&self) -> Result<&Model> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| CdpError::Config("this command needs a 'model' section".into()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn horizon(&self) -> Result<f64> {
        match self.horizon {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(CdpError::Config(format!("horizon must be positive and finite, got {t}"))),
            None => Err(CdpError::Config("this command needs 'horizon' (or 'n' for a fixed-size sum)".into())),
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        self.grid
            .as_ref()
            .ok_or_else(|| CdpError::Config("this command needs a 'grid' (config or --grid)".into()))?
            .points()
    }

    pub fn monte_carlo(&self) -> MonteCarloSettings {
        MonteCarloSettings {
            paths: self.simulation.paths,
            seed: self.seed,
        }
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| CdpError::Config("this command needs a 'data' section or --data".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_name_their_path() {
        let e = RunConfig::from_json(r#"{"truncation": {"max_n": 10, "eps": 1}}"#).unwrap_err();
        let CdpError::Config(m) = e else { panic!() };
        assert!(m.contains("truncation"), "{m}");
        assert!(m.contains("eps"), "{m}");
    }

    #[test]
    fn model_and_grid_forms() {
        let c = RunConfig::from_json(
            r#"{
                "model": {"cdp": {
                    "time_prior": {"alpha": 1.0, "base": {"exponential": {"rate": 2.0}}},
                    "mark_prior": {"alpha": 0.5, "base": {"gaussian": {"mu": 0.0, "sigma2": 1.0}}}
                }},
                "horizon": 2.0,
                "grid": {"start": 0, "stop": 1, "points": 3}
            }"#,
        )
        .unwrap();
        assert_eq!(c.grid().unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(c.model().is_ok());
        assert_eq!(Grid::parse("1,2.5").unwrap(), Grid::Points(vec![1.0, 2.5]));
        assert_eq!(
            Grid::parse("0:2:5").unwrap(),
            Grid::Range {
                start: 0.0,
                stop: 2.0,
                points: 5
            }
        );
    }

    #[test]
    fn hash_ignores_metadata() {
        let mut c = RunConfig::default();
        let h = c.hash();
        c.metadata = Some(serde_json::json!({"note": 1}));
        assert_eq!(c.hash(), h);
        c.seed = 3;
        assert_ne!(c.hash(), h);
    }
}
