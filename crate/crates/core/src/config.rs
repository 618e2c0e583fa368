//! Declarative run configuration. Files are TOML with a `schema_version`
//! key; referenced catalogue and score-table paths are resolved relative to
//! the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grasp::GraspScoringParams;
use crate::motion::MotionParams;
use crate::orchestrator::{OrchestratorParams, RunParams};
use crate::perception::PerceptionParams;
use crate::scoring::ScoreTable;
use crate::task::{OrderLine, TaskSpec};
use crate::world::{Catalog, ContainerKind, WorldParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {field}: {message}")]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    Schema { path: PathBuf, found: u32 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StowShape {
    pub items: usize,
}

impl Default for StowShape {
    fn default() -> Self {
        Self { items: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PickShape {
    pub storage_items: usize,
    pub order_items: usize,
    /// Fixed order; replaces the random one when non-empty. Every listed
    /// item is placed in storage.
    pub order: Vec<OrderLine>,
}

impl Default for PickShape {
    fn default() -> Self {
        Self {
            storage_items: 16,
            order_items: 8,
            order: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinalsShape {
    pub storage_items: usize,
    pub tote_items: usize,
    pub order_items: usize,
    pub stow_budget_s: f64,
}

impl Default for FinalsShape {
    fn default() -> Self {
        Self {
            storage_items: 16,
            tote_items: 16,
            order_items: 10,
            stow_budget_s: 900.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LongrunShape {
    pub sim_hours: f64,
    pub stow_items: usize,
    pub pick_storage_items: usize,
    pub pick_order_items: usize,
}

impl Default for LongrunShape {
    fn default() -> Self {
        Self {
            sim_hours: 7.2,
            stow_items: 12,
            pick_storage_items: 17,
            pick_order_items: 9,
        }
    }
}

/// Contents of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub catalog: PathBuf,
    pub longterm_catalog: PathBuf,
    pub score_table: PathBuf,
    #[serde(default)]
    pub stow: StowShape,
    #[serde(default)]
    pub pick: PickShape,
    #[serde(default)]
    pub finals: FinalsShape,
    #[serde(default)]
    pub longrun: LongrunShape,
    #[serde(default)]
    pub world: WorldParams,
    #[serde(default)]
    pub motion: MotionParams,
    #[serde(default)]
    pub perception: PerceptionParams,
    #[serde(default)]
    pub grasp: GraspScoringParams,
    #[serde(default)]
    pub orchestrator: OrchestratorParams,
}

/// A config with every referenced file loaded.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: SimConfig,
    pub catalog: Catalog,
    pub longterm_catalog: Catalog,
    pub score_table: ScoreTable,
}

impl LoadedConfig {
    pub fn run_params(&self) -> RunParams {
        let c = &self.config;
        RunParams {
            world: c.world.clone(),
            motion: c.motion.clone(),
            perception: c.perception.clone(),
            grasp: c.grasp.clone(),
            orchestrator: c.orchestrator.clone(),
        }
    }

    pub fn stow_task(&self, seed: u64) -> TaskSpec {
        TaskSpec::random_stow(&self.catalog, self.config.stow.items, seed)
    }

    pub fn pick_task(&self, seed: u64) -> TaskSpec {
        let shape = &self.config.pick;
        let mut task = TaskSpec::random_pick(&self.catalog, shape.storage_items, shape.order_items, seed);
        if !shape.order.is_empty() {
            for line in &shape.order {
                if !task.manifest.iter().any(|e| e.item == line.item) {
                    task.manifest.push(crate::task::ManifestEntry {
                        item: line.item.clone(),
                        container: crate::world::STORAGE_A.into(),
                    });
                }
            }
            task.order = shape.order.clone();
        }
        task
    }

    pub fn finals_task(&self, seed: u64) -> TaskSpec {
        let f = &self.config.finals;
        let mut task = TaskSpec::finals(&self.catalog, f.storage_items, f.tote_items, f.order_items, seed);
        task.stow_budget_s = Some(f.stow_budget_s);
        task
    }
}

/// Parses TOML, reporting the path of the offending field.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Field {
        path: path.to_owned(),
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        ConfigError::Field {
            path: path.to_owned(),
            field,
            message: e.into_inner().message().to_owned(),
        }
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })
}

fn check_schema(text: &str, path: &Path) -> Result<(), ConfigError> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: Option<u32>,
    }
    let v: Version = toml::from_str(text).map_err(|e| ConfigError::Field {
        path: path.to_owned(),
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    match v.schema_version {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(found) => Err(ConfigError::Schema {
            path: path.to_owned(),
            found,
        }),
        None => Err(ConfigError::Field {
            path: path.to_owned(),
            field: "schema_version".into(),
            message: "missing field `schema_version`".into(),
        }),
    }
}

fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = read(path)?;
    check_schema(&text, path)?;
    parse_toml(&text, path)
}

pub fn load_catalog(path: &Path) -> Result<Catalog, ConfigError> {
    load_file(path)
}

pub fn load_score_table(path: &Path) -> Result<ScoreTable, ConfigError> {
    load_file(path)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Loads a config and everything it references, refusing to proceed when
/// any diagnostic is raised.
pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let config: SimConfig = load_file(path)?;
    let loaded = LoadedConfig {
        catalog: load_catalog(&resolve(path, &config.catalog))?,
        longterm_catalog: load_catalog(&resolve(path, &config.longterm_catalog))?,
        score_table: load_score_table(&resolve(path, &config.score_table))?,
        path: path.to_owned(),
        config,
    };
    let problems = cross_check(&loaded);
    if problems.is_empty() {
        Ok(loaded)
    } else {
        Err(ConfigError::Invalid(problems.join("; ")))
    }
}

/// Every problem found in a config file; empty when it is valid. Only an
/// unreadable file is an error.
pub fn validate_config(path: &Path) -> Result<Vec<String>, std::io::Error> {
    fs::metadata(path)?;
    match load(path) {
        Ok(_) => Ok(Vec::new()),
        Err(ConfigError::Invalid(joined)) => Ok(joined.split("; ").map(str::to_owned).collect()),
        Err(ConfigError::Io { path: p, source }) if p == path => Err(source),
        Err(other) => Ok(vec![other.to_string()]),
    }
}

fn cross_check(loaded: &LoadedConfig) -> Vec<String> {
    let c = &loaded.config;
    let mut problems = Vec::new();
    problems.extend(loaded.catalog.validate().into_iter().map(|p| format!("catalog: {p}")));
    problems.extend(loaded.longterm_catalog.validate().into_iter().map(|p| format!("longterm_catalog: {p}")));
    problems.extend(loaded.score_table.validate());
    problems.extend(c.grasp.validate());
    problems.extend(c.perception.validate());
    problems.extend(c.orchestrator.validate());
    problems.extend(c.motion.validate());
    problems.extend(validate_world(&c.world));
    if c.orchestrator.weight_tolerance_g <= 2.0 * c.world.scale_noise_g {
        problems.push(format!(
            "orchestrator.weight_tolerance_g = {} must exceed twice world.scale_noise_g = {}",
            c.orchestrator.weight_tolerance_g, c.world.scale_noise_g
        ));
    }
    for line in &c.pick.order {
        if loaded.catalog.get(&line.item).is_none() {
            problems.push(format!("pick.order references unknown item {}", line.item));
        }
        let is_box = c
            .world
            .containers
            .iter()
            .any(|k| k.id == line.target && k.kind == ContainerKind::ShippingBox);
        if !is_box {
            problems.push(format!("pick.order target {} is not a shipping box", line.target));
        }
    }
    let n = loaded.catalog.items.len();
    if c.finals.storage_items + c.finals.tote_items > n {
        problems.push(format!("finals needs {} items but the catalog has {n}", c.finals.storage_items + c.finals.tote_items));
    }
    if c.finals.order_items > c.finals.storage_items + c.finals.tote_items {
        problems.push("finals.order_items exceeds the number of items in play".into());
    }
    if c.pick.order_items > c.pick.storage_items {
        problems.push("pick.order_items exceeds pick.storage_items".into());
    }
    if c.stow.items > n || c.pick.storage_items > n {
        problems.push(format!("stow or pick asks for more items than the catalog's {n}"));
    }
    let m = loaded.longterm_catalog.items.len();
    if c.longrun.stow_items > m || c.longrun.pick_storage_items > m || c.longrun.pick_order_items > c.longrun.pick_storage_items {
        problems.push(format!("longrun item counts do not fit the long-term catalog of {m}"));
    }
    if !(c.longrun.sim_hours > 0.0) {
        problems.push("longrun.sim_hours must be positive".into());
    }
    if !(c.finals.stow_budget_s >= 0.0) {
        problems.push("finals.stow_budget_s must be non-negative".into());
    }
    problems
}

fn validate_world(w: &WorldParams) -> Vec<String> {
    let mut problems = Vec::new();
    for (name, v) in [
        ("world.occlusion_penalty", w.occlusion_penalty),
        ("world.edge_penalty", w.edge_penalty),
        ("world.default_drop_prob", w.default_drop_prob),
        ("world.drop_outside_prob", w.drop_outside_prob),
        ("world.fill_limit", w.fill_limit),
    ] {
        if !(0.0..=1.0).contains(&v) {
            problems.push(format!("{name} must lie in [0, 1]"));
        }
    }
    if !(w.scale_noise_g >= 0.0) {
        problems.push("world.scale_noise_g must be non-negative".into());
    }
    if w.suction_probes == 0 {
        problems.push("world.suction_probes must be positive".into());
    }
    for c in &w.containers {
        if c.interior_mm.iter().any(|d| !(*d > 0.0)) || !(c.wall_height_mm > 0.0) {
            problems.push(format!("world.containers: {} needs positive dimensions", c.id));
        }
    }
    problems
}

/// Location of the config shipped with the crate.
pub fn default_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("default.toml")
}

#[cfg(test)]
mod tests;
