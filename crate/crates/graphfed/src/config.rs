//! Experiment configuration: a single flat key-value file with one section
//! per subsystem. Unknown keys are hard errors so a typo cannot silently
//! fall back to a default. Defaults reproduce the reference setup
//! (K = 20 devices in N = 4 rooms, 200 rounds, alpha = 3, 20 MHz uplink).

use std::path::PathBuf;

use rand::Rng;

use crate::data::Setup;
use crate::error::{Error, Result};
use crate::schedule::ScheduleBounds;
use crate::sysmodel::DeviceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum AggregatorKind {
    FedAvg,
    GFedfilt,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunSection {
    pub rounds: usize,
    pub seed: u64,
    pub aggregator: AggregatorKind,
    pub mu_s: f64,
    pub optimize: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelSection {
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub eta: f64,
    pub batch_size: usize,
    /// Local epochs per round when the optimizer is off.
    pub alpha: u32,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum GraphSource {
    /// Sample room layouts and device positions from the graph stream.
    Sample,
    /// `cluster x y z` rows; adjacency from the distance threshold.
    Positions(PathBuf),
    /// Explicit 0/1 adjacency matrix file.
    Adjacency(PathBuf),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GraphSection {
    pub source: GraphSource,
    pub d_max: f64,
    pub rooms: usize,
    pub devices: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum DataSource {
    /// Class-conditional Gaussian pool at desk scale.
    Synthetic,
    /// Directory holding the four standard IDX files.
    Mnist(PathBuf),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DataSection {
    pub source: DataSource,
    pub classes: usize,
    pub feature_dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub labels_per_device: usize,
    pub train_per_device: usize,
    pub local_test_per_device: usize,
    pub global_test_size: usize,
    pub setup: Setup,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum SpecSource {
    Sample,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct UniformRange {
    pub min: f64,
    pub max: f64,
}

impl UniformRange {
    fn validate(&self, name: &str) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::config(format!(
                "system.{name}: invalid range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..self.max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SystemSection {
    pub source: SpecSource,
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub switched_capacitance: f64,
    pub cycles_per_sample: UniformRange,
    pub cpu_hz: UniformRange,
    pub tx_power_w: UniformRange,
    pub gain_db: UniformRange,
    pub energy_budget_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScheduleSection {
    pub alpha_min: u32,
    pub alpha_max: u32,
    pub q_min: f64,
    pub z_min: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl ScheduleSection {
    pub fn bounds(&self) -> Result<ScheduleBounds> {
        ScheduleBounds::new(
            self.alpha_min,
            self.alpha_max,
            self.q_min,
            self.z_min,
            self.mu1,
            self.mu2,
            self.mu3,
        )
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub graph: GraphSection,
    pub data: DataSection,
    pub system: SystemSection,
    pub schedule: ScheduleSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            run: RunSection {
                rounds: 200,
                seed: 42,
                aggregator: AggregatorKind::GFedfilt,
                mu_s: 10.0,
                optimize: false,
            },
            model: ModelSection {
                hidden: vec![128],
                eta: 0.05,
                batch_size: 32,
                alpha: 3,
            },
            graph: GraphSection {
                source: GraphSource::Sample,
                d_max: 10.0,
                rooms: 4,
                devices: 20,
            },
            data: DataSection {
                source: DataSource::Synthetic,
                classes: 10,
                feature_dim: 16,
                per_class: 2500,
                separation: 3.0,
                labels_per_device: 2,
                train_per_device: 450,
                local_test_per_device: 100,
                global_test_size: 100,
                setup: Setup::ClusterAligned,
            },
            system: SystemSection {
                source: SpecSource::Sample,
                bandwidth_hz: 20e6,
                noise_dbm_per_hz: -174.0,
                switched_capacitance: 1e-28,
                cycles_per_sample: UniformRange { min: 1e4, max: 5e4 },
                cpu_hz: UniformRange { min: 1e9, max: 3.5e9 },
                tx_power_w: UniformRange { min: 0.5, max: 1.0 },
                gain_db: UniformRange { min: 1.0, max: 2.0 },
                energy_budget_j: 1.0,
            },
            schedule: ScheduleSection {
                alpha_min: 1,
                alpha_max: 5,
                q_min: 0.3,
                z_min: 0.1,
                mu1: 0.4,
                mu2: 0.4,
                mu3: 0.2,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn parse_file(path: impl AsRef<std::path::Path>) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse_str(&text)
    }

    /// Parse the flat key-value format. Every key must be known; every
    /// section must be one of run/model/graph/data/system/schedule.
    pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if !matches!(
                    section.as_str(),
                    "run" | "model" | "graph" | "data" | "system" | "schedule"
                ) {
                    return Err(Error::config(format!(
                        "line {}: unknown section [{section}]",
                        lineno + 1
                    )));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                )));
            };
            if section.is_empty() {
                return Err(Error::config(format!(
                    "line {}: key before any [section]",
                    lineno + 1
                )));
            }
            cfg.set(&section, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let path = format!("{section}.{key}");
        let bad = |e: String| Error::config(format!("{path}: {e}"));
        match (section, key) {
            ("run", "rounds") => self.run.rounds = parse_num(value).map_err(bad)?,
            ("run", "seed") => self.run.seed = parse_num(value).map_err(bad)?,
            ("run", "aggregator") => self.run.aggregator = parse_aggregator(value).map_err(bad)?,
            ("run", "mu_s") => self.run.mu_s = parse_f64(value).map_err(bad)?,
            ("run", "optimize") => self.run.optimize = parse_switch(value).map_err(bad)?,
            ("model", "hidden") => self.model.hidden = parse_size_list(value).map_err(bad)?,
            ("model", "eta") => self.model.eta = parse_f64(value).map_err(bad)?,
            ("model", "batch_size") => self.model.batch_size = parse_num(value).map_err(bad)?,
            ("model", "alpha") => self.model.alpha = parse_num(value).map_err(bad)?,
            ("graph", "source") => {
                self.graph.source = match split_source(value) {
                    ("sample", None) => GraphSource::Sample,
                    ("positions", Some(p)) => GraphSource::Positions(PathBuf::from(p)),
                    ("adjacency", Some(p)) => GraphSource::Adjacency(PathBuf::from(p)),
                    _ => {
                        return Err(bad(format!(
                            "expected sample | positions:PATH | adjacency:PATH, got `{value}`"
                        )))
                    }
                }
            }
            ("graph", "d_max") => self.graph.d_max = parse_f64(value).map_err(bad)?,
            ("graph", "rooms") => self.graph.rooms = parse_num(value).map_err(bad)?,
            ("graph", "devices") => self.graph.devices = parse_num(value).map_err(bad)?,
            ("data", "source") => {
                self.data.source = match split_source(value) {
                    ("synthetic", None) => DataSource::Synthetic,
                    ("mnist", Some(p)) => DataSource::Mnist(PathBuf::from(p)),
                    _ => {
                        return Err(bad(format!(
                            "expected synthetic | mnist:DIR, got `{value}`"
                        )))
                    }
                }
            }
            ("data", "classes") => self.data.classes = parse_num(value).map_err(bad)?,
            ("data", "feature_dim") => self.data.feature_dim = parse_num(value).map_err(bad)?,
            ("data", "per_class") => self.data.per_class = parse_num(value).map_err(bad)?,
            ("data", "separation") => self.data.separation = parse_f64(value).map_err(bad)?,
            ("data", "labels_per_device") => {
                self.data.labels_per_device = parse_num(value).map_err(bad)?
            }
            ("data", "train_per_device") => {
                self.data.train_per_device = parse_num(value).map_err(bad)?
            }
            ("data", "local_test_per_device") => {
                self.data.local_test_per_device = parse_num(value).map_err(bad)?
            }
            ("data", "global_test_size") => {
                self.data.global_test_size = parse_num(value).map_err(bad)?
            }
            ("data", "setup") => {
                self.data.setup = match value {
                    "cluster_aligned" => Setup::ClusterAligned,
                    "random" => Setup::Random,
                    other => {
                        return Err(bad(format!(
                            "expected cluster_aligned | random, got `{other}`"
                        )))
                    }
                }
            }
            ("system", "source") => {
                self.system.source = match split_source(value) {
                    ("sample", None) => SpecSource::Sample,
                    ("file", Some(p)) => SpecSource::File(PathBuf::from(p)),
                    _ => return Err(bad(format!("expected sample | file:PATH, got `{value}`"))),
                }
            }
            ("system", "bandwidth_hz") => self.system.bandwidth_hz = parse_f64(value).map_err(bad)?,
            ("system", "noise_dbm_per_hz") => {
                self.system.noise_dbm_per_hz = parse_f64(value).map_err(bad)?
            }
            ("system", "switched_capacitance") => {
                self.system.switched_capacitance = parse_f64(value).map_err(bad)?
            }
            ("system", "cycles_per_sample_min") => {
                self.system.cycles_per_sample.min = parse_f64(value).map_err(bad)?
            }
            ("system", "cycles_per_sample_max") => {
                self.system.cycles_per_sample.max = parse_f64(value).map_err(bad)?
            }
            ("system", "cpu_hz_min") => self.system.cpu_hz.min = parse_f64(value).map_err(bad)?,
            ("system", "cpu_hz_max") => self.system.cpu_hz.max = parse_f64(value).map_err(bad)?,
            ("system", "tx_power_min") => {
                self.system.tx_power_w.min = parse_f64(value).map_err(bad)?
            }
            ("system", "tx_power_max") => {
                self.system.tx_power_w.max = parse_f64(value).map_err(bad)?
            }
            ("system", "gain_db_min") => self.system.gain_db.min = parse_f64(value).map_err(bad)?,
            ("system", "gain_db_max") => self.system.gain_db.max = parse_f64(value).map_err(bad)?,
            ("system", "energy_budget") => {
                self.system.energy_budget_j = parse_f64(value).map_err(bad)?
            }
            ("schedule", "alpha_min") => self.schedule.alpha_min = parse_num(value).map_err(bad)?,
            ("schedule", "alpha_max") => self.schedule.alpha_max = parse_num(value).map_err(bad)?,
            ("schedule", "q_min") => self.schedule.q_min = parse_f64(value).map_err(bad)?,
            ("schedule", "z_min") => self.schedule.z_min = parse_f64(value).map_err(bad)?,
            ("schedule", "mu1") => self.schedule.mu1 = parse_f64(value).map_err(bad)?,
            ("schedule", "mu2") => self.schedule.mu2 = parse_f64(value).map_err(bad)?,
            ("schedule", "mu3") => self.schedule.mu3 = parse_f64(value).map_err(bad)?,
            _ => return Err(Error::config(format!("{path}: unknown key"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.rounds == 0 {
            return Err(Error::config("run.rounds: must be at least 1"));
        }
        if !self.run.mu_s.is_finite() || self.run.mu_s < 0.0 {
            return Err(Error::config(format!(
                "run.mu_s: must be finite and nonnegative, got {}",
                self.run.mu_s
            )));
        }
        if !self.model.eta.is_finite() || self.model.eta < 0.0 {
            return Err(Error::config(format!(
                "model.eta: must be nonnegative, got {}",
                self.model.eta
            )));
        }
        if self.model.batch_size == 0 {
            return Err(Error::config("model.batch_size: must be at least 1"));
        }
        if self.model.alpha == 0 {
            return Err(Error::config("model.alpha: must be at least 1"));
        }
        if self.graph.d_max.is_nan() || self.graph.d_max <= 0.0 {
            return Err(Error::config(format!(
                "graph.d_max: must be positive, got {}",
                self.graph.d_max
            )));
        }
        if self.graph.rooms == 0 || self.graph.devices == 0 {
            return Err(Error::config("graph.rooms and graph.devices must be positive"));
        }
        if self.graph.devices < self.graph.rooms {
            return Err(Error::config(format!(
                "graph.devices: {} devices cannot fill {} rooms",
                self.graph.devices, self.graph.rooms
            )));
        }
        if self.data.classes < 2 {
            return Err(Error::config("data.classes: must be at least 2"));
        }
        if self.data.labels_per_device == 0 || self.data.labels_per_device > self.data.classes {
            return Err(Error::config(format!(
                "data.labels_per_device: must be in [1, {}], got {}",
                self.data.classes, self.data.labels_per_device
            )));
        }
        if self.data.feature_dim == 0 || self.data.per_class == 0 {
            return Err(Error::config("data.feature_dim and data.per_class must be positive"));
        }
        if self.data.separation.is_nan() || self.data.separation < 0.0 {
            return Err(Error::config("data.separation: must be nonnegative"));
        }
        if self.data.train_per_device == 0
            || self.data.local_test_per_device == 0
            || self.data.global_test_size == 0
        {
            return Err(Error::config("data: partition sizes must be positive"));
        }
        if self.system.bandwidth_hz.is_nan() || self.system.bandwidth_hz <= 0.0 {
            return Err(Error::config("system.bandwidth_hz: must be positive"));
        }
        if self.system.switched_capacitance.is_nan() || self.system.switched_capacitance <= 0.0 {
            return Err(Error::config("system.switched_capacitance: must be positive"));
        }
        if self.system.energy_budget_j.is_nan() || self.system.energy_budget_j <= 0.0 {
            return Err(Error::config("system.energy_budget: must be positive"));
        }
        self.system.cycles_per_sample.validate("cycles_per_sample")?;
        self.system.cpu_hz.validate("cpu_hz")?;
        self.system.tx_power_w.validate("tx_power")?;
        self.system.gain_db.validate("gain_db")?;
        self.schedule
            .bounds()
            .map_err(|e| Error::config(format!("schedule: {e}")))?;
        Ok(())
    }

    /// Canonical serialization; `parse_str` of the output reproduces the
    /// config exactly.
    pub fn write_string(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = write!(
            s,
            "[run]\nrounds = {}\nseed = {}\naggregator = {}\nmu_s = {:?}\noptimize = {}\n\n",
            self.run.rounds,
            self.run.seed,
            match self.run.aggregator {
                AggregatorKind::FedAvg => "fedavg",
                AggregatorKind::GFedfilt => "gfedfilt",
            },
            self.run.mu_s,
            if self.run.optimize { "on" } else { "off" },
        );
        let hidden = if self.model.hidden.is_empty() {
            "none".to_string()
        } else {
            self.model
                .hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = write!(
            s,
            "[model]\nhidden = {}\neta = {:?}\nbatch_size = {}\nalpha = {}\n\n",
            hidden, self.model.eta, self.model.batch_size, self.model.alpha,
        );
        let graph_source = match &self.graph.source {
            GraphSource::Sample => "sample".to_string(),
            GraphSource::Positions(p) => format!("positions:{}", p.display()),
            GraphSource::Adjacency(p) => format!("adjacency:{}", p.display()),
        };
        let _ = write!(
            s,
            "[graph]\nsource = {}\nd_max = {:?}\nrooms = {}\ndevices = {}\n\n",
            graph_source, self.graph.d_max, self.graph.rooms, self.graph.devices,
        );
        let data_source = match &self.data.source {
            DataSource::Synthetic => "synthetic".to_string(),
            DataSource::Mnist(p) => format!("mnist:{}", p.display()),
        };
        let _ = write!(
            s,
            "[data]\nsource = {}\nclasses = {}\nfeature_dim = {}\nper_class = {}\n\
             separation = {:?}\nlabels_per_device = {}\ntrain_per_device = {}\n\
             local_test_per_device = {}\nglobal_test_size = {}\nsetup = {}\n\n",
            data_source,
            self.data.classes,
            self.data.feature_dim,
            self.data.per_class,
            self.data.separation,
            self.data.labels_per_device,
            self.data.train_per_device,
            self.data.local_test_per_device,
            self.data.global_test_size,
            match self.data.setup {
                Setup::ClusterAligned => "cluster_aligned",
                Setup::Random => "random",
            },
        );
        let system_source = match &self.system.source {
            SpecSource::Sample => "sample".to_string(),
            SpecSource::File(p) => format!("file:{}", p.display()),
        };
        let _ = write!(
            s,
            "[system]\nsource = {}\nbandwidth_hz = {:?}\nnoise_dbm_per_hz = {:?}\n\
             switched_capacitance = {:?}\ncycles_per_sample_min = {:?}\ncycles_per_sample_max = {:?}\n\
             cpu_hz_min = {:?}\ncpu_hz_max = {:?}\ntx_power_min = {:?}\ntx_power_max = {:?}\n\
             gain_db_min = {:?}\ngain_db_max = {:?}\nenergy_budget = {:?}\n\n",
            system_source,
            self.system.bandwidth_hz,
            self.system.noise_dbm_per_hz,
            self.system.switched_capacitance,
            self.system.cycles_per_sample.min,
            self.system.cycles_per_sample.max,
            self.system.cpu_hz.min,
            self.system.cpu_hz.max,
            self.system.tx_power_w.min,
            self.system.tx_power_w.max,
            self.system.gain_db.min,
            self.system.gain_db.max,
            self.system.energy_budget_j,
        );
        let _ = write!(
            s,
            "[schedule]\nalpha_min = {}\nalpha_max = {}\nq_min = {:?}\nz_min = {:?}\n\
             mu1 = {:?}\nmu2 = {:?}\nmu3 = {:?}\n",
            self.schedule.alpha_min,
            self.schedule.alpha_max,
            self.schedule.q_min,
            self.schedule.z_min,
            self.schedule.mu1,
            self.schedule.mu2,
            self.schedule.mu3,
        );
        s
    }
}

fn split_source(value: &str) -> (&str, Option<&str>) {
    match value.split_once(':') {
        Some((kind, rest)) => (kind, Some(rest)),
        None => (value, None),
    }
}

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    value.parse::<f64>().map_err(|e| e.to_string())
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn parse_switch(value: &str) -> std::result::Result<bool, String> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on | off, got `{other}`")),
    }
}

fn parse_aggregator(value: &str) -> std::result::Result<AggregatorKind, String> {
    match value {
        "fedavg" => Ok(AggregatorKind::FedAvg),
        "gfedfilt" => Ok(AggregatorKind::GFedfilt),
        other => Err(format!("expected fedavg | gfedfilt, got `{other}`")),
    }
}

fn parse_size_list(value: &str) -> std::result::Result<Vec<usize>, String> {
    if value == "none" || value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect()
}

/// Draw K device specs from the configured uniform ranges, deterministic
/// under the seed. Bandwidth is split evenly: b = beta / K.
pub fn sample_device_specs(seed: u64, k: usize, system: &SystemSection) -> Result<Vec<DeviceSpec>> {
    if k == 0 {
        return Err(Error::input("device count must be positive"));
    }
    let mut rng = crate::seed::stream(seed, 0);
    let per_device_bandwidth = system.bandwidth_hz / k as f64;
    (0..k)
        .map(|_| {
            let rho = system.cycles_per_sample.sample(&mut rng);
            let f = system.cpu_hz.sample(&mut rng);
            let p = system.tx_power_w.sample(&mut rng);
            let gain = system.gain_db.sample(&mut rng);
            DeviceSpec::new(
                rho,
                f,
                p,
                gain,
                per_device_bandwidth,
                system.switched_capacitance,
                system.energy_budget_j,
            )
        })
        .collect()
}

/// Device spec file: one device per line,
/// `cycles_per_sample cpu_hz tx_power_w gain_db bandwidth_hz switched_capacitance energy_budget_j`.
pub fn load_device_specs(path: impl AsRef<std::path::Path>) -> Result<Vec<DeviceSpec>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut specs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::input(format!("spec file line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if fields.len() != 7 {
            return Err(Error::input(format!(
                "spec file line {}: expected 7 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        specs.push(DeviceSpec::new(
            fields[0], fields[1], fields[2], fields[3], fields[4], fields[5], fields[6],
        )?);
    }
    if specs.is_empty() {
        return Err(Error::input("spec file contains no devices"));
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_reference_setup() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.graph.devices, 20);
        assert_eq!(cfg.graph.rooms, 4);
        assert_eq!(cfg.run.rounds, 200);
        assert_eq!(cfg.model.alpha, 3);
        assert_eq!(cfg.system.bandwidth_hz, 20e6);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse_str("[run]\nseed = 7\n").unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.run.rounds, 200);
        assert_eq!(cfg.graph.devices, 20);
    }

    #[test]
    fn objective_weights_must_sum_to_one() {
        let err =
            ExperimentConfig::parse_str("[schedule]\nmu1 = 0.5\nmu2 = 0.5\nmu3 = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("sum to 1"), "{err}");
    }

    #[test]
    fn inverted_alpha_bounds_rejected() {
        let err =
            ExperimentConfig::parse_str("[schedule]\nalpha_min = 6\nalpha_max = 5\n").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn unknown_key_names_the_path() {
        let err = ExperimentConfig::parse_str("[graph]\nd_maxx = 3\n").unwrap_err();
        assert!(err.to_string().contains("graph.d_maxx"), "{err}");
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(ExperimentConfig::parse_str("[grpah]\n").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.seed = 99;
        cfg.run.aggregator = AggregatorKind::FedAvg;
        cfg.run.optimize = true;
        cfg.model.hidden = vec![64, 32];
        cfg.graph.source = GraphSource::Positions(PathBuf::from("/tmp/pos.txt"));
        cfg.data.source = DataSource::Mnist(PathBuf::from("/data/mnist"));
        cfg.system.source = SpecSource::File(PathBuf::from("devices.txt"));
        cfg.schedule.q_min = 0.25;
        let text = cfg.write_string();
        let parsed = ExperimentConfig::parse_str(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = ExperimentConfig::parse_str(
            "# experiment\n[run]\nrounds = 10 # short\n\n[model]\nhidden = none\n",
        )
        .unwrap();
        assert_eq!(cfg.run.rounds, 10);
        assert!(cfg.model.hidden.is_empty());
    }

    #[test]
    fn degenerate_ranges_give_identical_specs() {
        let mut system = ExperimentConfig::default().system;
        system.cycles_per_sample = UniformRange { min: 2e4, max: 2e4 };
        system.cpu_hz = UniformRange { min: 2e9, max: 2e9 };
        system.tx_power_w = UniformRange { min: 0.7, max: 0.7 };
        system.gain_db = UniformRange { min: 1.5, max: 1.5 };
        let specs = sample_device_specs(5, 6, &system).unwrap();
        assert!(specs.windows(2).all(|w| w[0] == w[1]));
        let h = crate::sysmodel::heterogeneity_indicator(&specs, 3, -174.0).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn sampled_specs_are_reproducible() {
        let system = ExperimentConfig::default().system;
        let a = sample_device_specs(11, 20, &system).unwrap();
        let b = sample_device_specs(11, 20, &system).unwrap();
        assert_eq!(a, b);
        let c = sample_device_specs(12, 20, &system).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wider_cpu_range_raises_heterogeneity_on_average() {
        let narrow = {
            let mut s = ExperimentConfig::default().system;
            s.cpu_hz = UniformRange { min: 2e9, max: 2.2e9 };
            s.cycles_per_sample = UniformRange { min: 2e4, max: 2.2e4 };
            s
        };
        let wide = {
            let mut s = ExperimentConfig::default().system;
            s.cpu_hz = UniformRange { min: 1e9, max: 3.5e9 };
            s.cycles_per_sample = UniformRange { min: 2e4, max: 2.2e4 };
            s
        };
        let mean_h = |sys: &SystemSection| {
            (0..20)
                .map(|seed| {
                    let specs = sample_device_specs(seed, 20, sys).unwrap();
                    crate::sysmodel::heterogeneity_indicator(&specs, 3, -174.0).unwrap()
                })
                .sum::<f64>()
                / 20.0
        };
        assert!(mean_h(&wide) > mean_h(&narrow));
    }

    #[test]
    fn device_spec_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("devices.txt");
        std::fs::write(
            &path,
            "# rho f p gain b capacitance budget\n2e4 1.5e9 0.6 1.2 1e6 1e-28 1.0\n3e4 2e9 0.8 1.8 1e6 1e-28 1.0\n",
        )
        .unwrap();
        let specs = load_device_specs(&path).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].cpu_hz, 2e9);
    }
}
