//! Task definitions: what starts where and what must end up where.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::named_stream;
use crate::world::{Catalog, ContainerId, STORAGE_A, STORAGE_B, TOTE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stow,
    Pick,
    Finals,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub item: String,
    pub container: ContainerId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderLine {
    pub item: String,
    pub target: ContainerId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub phase: Phase,
    #[serde(default)]
    pub manifest: Vec<ManifestEntry>,
    #[serde(default)]
    pub order: Vec<OrderLine>,
    pub time_limit_s: f64,
    /// Share of a finals run reserved for stowing before picking starts.
    #[serde(default)]
    pub stow_budget_s: Option<f64>,
}

pub const STOW_TIME_LIMIT_S: f64 = 900.0;
pub const PICK_TIME_LIMIT_S: f64 = 900.0;
pub const FINALS_TIME_LIMIT_S: f64 = 1800.0;

impl TaskSpec {
    pub fn stow<S: AsRef<str>>(items: &[S]) -> Self {
        Self {
            phase: Phase::Stow,
            manifest: items
                .iter()
                .map(|i| ManifestEntry {
                    item: i.as_ref().to_owned(),
                    container: TOTE.into(),
                })
                .collect(),
            order: Vec::new(),
            time_limit_s: STOW_TIME_LIMIT_S,
            stow_budget_s: None,
        }
    }

    /// Finals layout drawn from a catalog: `storage` items pre-placed across
    /// both compartments, `tote` items to stow, then an order of `order`
    /// items spread over the three shipping boxes.
    pub fn finals(catalog: &Catalog, storage: usize, tote: usize, order: usize, seed: u64) -> Self {
        let mut rng = named_stream(seed, "task");
        let mut ids: Vec<&str> = catalog.ids().collect();
        ids.shuffle(&mut rng);
        let storage_ids = &ids[..storage.min(ids.len())];
        let tote_ids = &ids[storage_ids.len()..(storage_ids.len() + tote).min(ids.len())];
        let mut manifest = Vec::new();
        for (i, id) in storage_ids.iter().enumerate() {
            let container = if i % 2 == 0 { STORAGE_A } else { STORAGE_B };
            manifest.push(ManifestEntry {
                item: (*id).to_owned(),
                container: container.into(),
            });
        }
        for id in tote_ids {
            manifest.push(ManifestEntry {
                item: (*id).to_owned(),
                container: TOTE.into(),
            });
        }
        let mut pool: Vec<&str> = storage_ids.iter().chain(tote_ids.iter()).copied().collect();
        pool.shuffle(&mut rng);
        let boxes = ["box_1", "box_2", "box_3"];
        let offset = rng.random_range(0..boxes.len());
        let order = pool
            .iter()
            .take(order)
            .enumerate()
            .map(|(i, id)| OrderLine {
                item: (*id).to_owned(),
                target: boxes[(i + offset) % boxes.len()].into(),
            })
            .collect();
        Self {
            phase: Phase::Finals,
            manifest,
            order,
            time_limit_s: FINALS_TIME_LIMIT_S,
            stow_budget_s: Some(FINALS_TIME_LIMIT_S / 2.0),
        }
    }

    /// Stow task of `count` catalogue items drawn at random.
    pub fn random_stow(catalog: &Catalog, count: usize, seed: u64) -> Self {
        let mut rng = named_stream(seed, "task");
        let mut ids: Vec<&str> = catalog.ids().collect();
        ids.shuffle(&mut rng);
        ids.truncate(count);
        Self::stow(&ids)
    }

    /// Pick task: `storage` catalogue items spread over both compartments
    /// and an order of `order` of them for the shipping boxes.
    pub fn random_pick(catalog: &Catalog, storage: usize, order: usize, seed: u64) -> Self {
        let mut spec = Self::finals(catalog, storage, 0, order, seed);
        spec.phase = Phase::Pick;
        spec.time_limit_s = PICK_TIME_LIMIT_S;
        spec.stow_budget_s = None;
        spec
    }

    /// Items that start in a given container.
    pub fn items_in<'a>(&'a self, container: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.manifest
            .iter()
            .filter(move |e| e.container.as_str() == container)
            .map(|e| e.item.as_str())
    }

    /// Structural and cross-reference problems; empty when valid.
    pub fn validate(&self, catalog: &Catalog) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for entry in &self.manifest {
            if catalog.get(&entry.item).is_none() {
                problems.push(format!("manifest references unknown item {}", entry.item));
            }
            if !seen.insert(entry.item.as_str()) {
                problems.push(format!("manifest lists {} twice", entry.item));
            }
        }
        for line in &self.order {
            if catalog.get(&line.item).is_none() {
                problems.push(format!("order references unknown item {}", line.item));
            } else if !self.manifest.is_empty() && !seen.contains(line.item.as_str()) {
                problems.push(format!("order item {} is not in the manifest", line.item));
            }
        }
        if self.phase == Phase::Stow && !self.order.is_empty() {
            problems.push("a stow task cannot carry an order".into());
        }
        if !(self.time_limit_s >= 0.0) {
            problems.push("time_limit_s must be non-negative".into());
        }
        problems
    }
}
