//! Scenario files: a versioned TOML document holding the experiment
//! protocol, the constants and the source of the transition model.
//!
//! The model is either synthetic, inline in the TOML, or a directory of
//! headerless CSV matrices: `distance.csv` plus `p_{t}.csv`, `e_{t}.csv`,
//! `mu_{t}.csv` and `sigma_{t}.csv` for every interval `t`.

use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::demand::{IntervalMatrices, TransitionModel};
use crate::dispatch::{AppendAnchor, Policy};
use crate::domain::{stream, EconomicConfig, EnergyConfig, RandomSource, TimeGrid, ZoneId};
use crate::error::{Error, Result};
use crate::sim::SimConfig;
use crate::synth::{generate_synthetic, SyntheticSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEARCH_FLEET: u32 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepotChoice {
    Zone(ZoneId),
    Search,
}

impl Serialize for DepotChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DepotChoice::Zone(z) => s.serialize_u64(z.0 as u64),
            DepotChoice::Search => s.serialize_str("search"),
        }
    }
}

impl<'de> Deserialize<'de> for DepotChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Zone(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Zone(z) => Ok(DepotChoice::Zone(ZoneId(z))),
            Raw::Word(w) if w == "search" => Ok(DepotChoice::Search),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "depot must be a zone index or \"search\", got \"{w}\""
            ))),
        }
    }
}

impl fmt::Display for DepotChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepotChoice::Zone(z) => write!(f, "{z}"),
            DepotChoice::Search => f.write_str("search"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineInterval {
    pub p: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub trips_per_ldev_per_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Synthetic(SyntheticSpec),
    Inline {
        distance: Vec<Vec<f64>>,
        intervals: Vec<InlineInterval>,
    },
    Files {
        /// Relative paths resolve against the scenario file's directory.
        dir: PathBuf,
        /// K per interval; its length is the interval count.
        trips_per_ldev_per_min: Vec<f64>,
    },
}

/// The on-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub n_ldev: u32,
    pub fleet_sizes: Vec<u32>,
    #[serde(default = "ScenarioConfig::default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default = "ScenarioConfig::default_eta")]
    pub eta: f64,
    pub depot: DepotChoice,
    pub seeds: Vec<u64>,
    #[serde(default = "ScenarioConfig::default_service")]
    pub service_minutes: f64,
    #[serde(default = "ScenarioConfig::default_reload")]
    pub reload_minutes: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wait_minutes: Option<f64>,
    #[serde(default = "ScenarioConfig::default_search_fleet")]
    pub search_fleet_size: u32,
    #[serde(default = "ScenarioConfig::default_true")]
    pub waiting_feedback: bool,
    #[serde(default = "ScenarioConfig::default_tol")]
    pub stationary_tol: f64,
    #[serde(default)]
    pub omdd_append_anchor: AppendAnchor,
    /// Free-form group label per zone, passed through to outputs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zone_labels: Vec<String>,
    #[serde(default)]
    pub time: TimeGrid,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub economics: EconomicConfig,
    pub model: ModelSource,
}

impl ScenarioConfig {
    fn default_policies() -> Vec<Policy> {
        Policy::ALL.to_vec()
    }
    fn default_eta() -> f64 {
        0.1
    }
    fn default_service() -> f64 {
        2.5
    }
    fn default_reload() -> f64 {
        10.0
    }
    fn default_search_fleet() -> u32 {
        DEFAULT_SEARCH_FLEET
    }
    fn default_true() -> bool {
        true
    }
    fn default_tol() -> f64 {
        1e-10
    }

    /// A config with every optional field at its default.
    pub fn new(n_ldev: u32, fleet_sizes: Vec<u32>, depot: DepotChoice, seeds: Vec<u64>, model: ModelSource) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            name: String::new(),
            n_ldev,
            fleet_sizes,
            policies: Self::default_policies(),
            eta: Self::default_eta(),
            depot,
            seeds,
            service_minutes: Self::default_service(),
            reload_minutes: Self::default_reload(),
            max_wait_minutes: None,
            search_fleet_size: Self::default_search_fleet(),
            waiting_feedback: true,
            stationary_tol: Self::default_tol(),
            omdd_append_anchor: AppendAnchor::Now,
            zone_labels: Vec::new(),
            time: TimeGrid::default(),
            energy: EnergyConfig::default(),
            economics: EconomicConfig::default(),
            model,
        }
    }

    /// Checks everything that does not need the model.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.fleet_sizes.is_empty() {
            return bad("fleet_sizes must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.policies.is_empty() {
            return bad("policies must not be empty".into());
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        if !(self.service_minutes > 0.0) || !(self.reload_minutes > 0.0) {
            return bad("service_minutes and reload_minutes must be positive".into());
        }
        if let Some(m) = self.max_wait_minutes {
            if !(m >= 0.0) {
                return bad(format!("max_wait_minutes {m} must be nonnegative"));
            }
        }
        if !(self.stationary_tol > 0.0) {
            return bad("stationary_tol must be positive".into());
        }
        self.time.validate()?;
        self.energy.validate()?;
        self.economics.validate()?;
        if let ModelSource::Synthetic(spec) = &self.model {
            spec.validate()?;
        }
        Ok(())
    }
}

/// A validated scenario with its model loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: TransitionModel,
}

impl Scenario {
    /// Loads the model described by `config`, resolving files against `base`.
    pub fn from_config(config: ScenarioConfig, base: &Path) -> Result<Self> {
        config.validate()?;
        let model = match &config.model {
            ModelSource::Synthetic(spec) => {
                let mut rng = RandomSource::new(spec.seed).fork(&[stream::SYNTHETIC]);
                generate_synthetic(spec, &mut rng)?
            }
            ModelSource::Inline { distance, intervals } => inline_model(distance, intervals)?,
            ModelSource::Files {
                dir,
                trips_per_ldev_per_min,
            } => files_model(&base.join(dir), trips_per_ldev_per_min)?,
        };
        let n = model.n_zones();
        if let DepotChoice::Zone(z) = config.depot {
            if z.0 >= n {
                return Err(Error::InvalidConfig(format!("depot zone {z} outside the {n} zones")));
            }
        }
        if !config.zone_labels.is_empty() && config.zone_labels.len() != n {
            return Err(Error::InvalidConfig(format!(
                "zone_labels has {} entries for {n} zones",
                config.zone_labels.len()
            )));
        }
        Ok(Scenario { config, model })
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::parse(base.join("<scenario>"), e))?;
        Self::from_config(config, base)
    }

    pub fn n_zones(&self) -> usize {
        self.model.n_zones()
    }

    /// Simulation settings for one cell of the experiment grid.
    pub fn sim_config(&self, fleet_size: u32, policy: Policy, depot: ZoneId) -> SimConfig {
        let c = &self.config;
        SimConfig {
            grid: c.time.clone(),
            energy: c.energy.clone(),
            policy,
            eta: c.eta,
            depot,
            fleet_size,
            n_ldev: c.n_ldev,
            service_minutes: c.service_minutes,
            reload_minutes: c.reload_minutes,
            max_wait_minutes: c.max_wait_minutes,
            stationary_tol: c.stationary_tol,
            waiting_feedback: c.waiting_feedback,
            omdd_append_anchor: c.omdd_append_anchor,
            audit_insertions: false,
        }
    }

    /// The fixed depot, or an error for scenarios that ask for a search.
    pub fn depot(&self) -> Result<ZoneId> {
        match self.config.depot {
            DepotChoice::Zone(z) => Ok(z),
            DepotChoice::Search => Err(Error::InvalidConfig(
                "scenario asks for a depot search; run depot-search or set a depot zone".into(),
            )),
        }
    }

    /// SHA-256 over the canonical JSON of the config and the raw bytes of
    /// every loaded matrix, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let json = serde_json::to_vec(&self.config).expect("scenario config serializes");
        h.update((json.len() as u64).to_le_bytes());
        h.update(&json);
        let mut put = |a: &Array2<f64>| {
            h.update((a.nrows() as u64).to_le_bytes());
            for v in a.iter() {
                h.update(v.to_le_bytes());
            }
        };
        put(self.model.distance());
        for m in self.model.intervals() {
            put(&m.p);
            put(&m.e);
            put(&m.mu);
            put(&m.sigma);
        }
        for m in self.model.intervals() {
            h.update(m.trips_per_ldev_per_min.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Same scenario with the model written out inline.
    pub fn to_inline(&self) -> Scenario {
        let to_rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let mut config = self.config.clone();
        config.model = ModelSource::Inline {
            distance: to_rows(self.model.distance()),
            intervals: self
                .model
                .intervals()
                .iter()
                .map(|m| InlineInterval {
                    p: to_rows(&m.p),
                    e: to_rows(&m.e),
                    mu: to_rows(&m.mu),
                    sigma: to_rows(&m.sigma),
                    trips_per_ldev_per_min: m.trips_per_ldev_per_min,
                })
                .collect(),
        };
        Scenario {
            config,
            model: self.model.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.config).map_err(|e| Error::InvalidConfig(format!("cannot serialize scenario: {e}")))
    }

    /// Writes the scenario to `path`. A file-backed model is written as CSV
    /// into its directory, resolved against the new location.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let ModelSource::Files { dir, .. } = &self.config.model {
            let base = path.parent().unwrap_or(Path::new("."));
            write_model_files(&self.model, &base.join(dir))?;
        }
        let text = self.to_toml_string()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ScenarioConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Scenario::from_config(config, base)
}

fn rows_to_array(rows: &[Vec<f64>], n: usize, what: &str) -> Result<Array2<f64>> {
    if rows.len() != n {
        return Err(Error::ScenarioData(format!("{what}: expected {n} rows, found {}", rows.len())));
    }
    let mut a = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ScenarioData(format!(
                "{what}: row {i} has {} entries, expected {n} (missing OD entry)",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    Ok(a)
}

fn inline_model(distance: &[Vec<f64>], intervals: &[InlineInterval]) -> Result<TransitionModel> {
    let n = distance.len();
    let distance = rows_to_array(distance, n, "distance")?;
    let intervals = intervals
        .iter()
        .enumerate()
        .map(|(t, m)| {
            Ok(IntervalMatrices {
                p: rows_to_array(&m.p, n, &format!("interval {t}: p"))?,
                e: rows_to_array(&m.e, n, &format!("interval {t}: e"))?,
                mu: rows_to_array(&m.mu, n, &format!("interval {t}: mu"))?,
                sigma: rows_to_array(&m.sigma, n, &format!("interval {t}: sigma"))?,
                trips_per_ldev_per_min: m.trips_per_ldev_per_min,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TransitionModel::new(intervals, distance)
}

fn read_csv_matrix(path: &Path, n: Option<usize>) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, format!("row {i}, column {j}: \"{field}\" is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = n.unwrap_or(rows.len());
    rows_to_array(&rows, n, &path.display().to_string())
}

fn files_model(dir: &Path, ks: &[f64]) -> Result<TransitionModel> {
    if ks.is_empty() {
        return Err(Error::InvalidConfig("trips_per_ldev_per_min needs one entry per interval".into()));
    }
    let distance = read_csv_matrix(&dir.join("distance.csv"), None)?;
    let n = distance.nrows();
    let intervals = ks
        .iter()
        .enumerate()
        .map(|(t, &k)| {
            let load = |name: &str| read_csv_matrix(&dir.join(format!("{name}_{t}.csv")), Some(n));
            Ok(IntervalMatrices {
                p: load("p")?,
                e: load("e")?,
                mu: load("mu")?,
                sigma: load("sigma")?,
                trips_per_ldev_per_min: k,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TransitionModel::new(intervals, distance)
}

fn write_csv_matrix(path: &Path, a: &Array2<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for row in a.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a model in the CSV directory layout.
pub fn write_model_files(model: &TransitionModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv_matrix(&dir.join("distance.csv"), model.distance())?;
    for (t, m) in model.intervals().iter().enumerate() {
        for (name, a) in [("p", &m.p), ("e", &m.e), ("mu", &m.mu), ("sigma", &m.sigma)] {
            write_csv_matrix(&dir.join(format!("{name}_{t}.csv")), a)?;
        }
    }
    Ok(())
}
