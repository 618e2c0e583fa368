use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::perception::View;
use crate::task::TaskSpec;
use crate::world::{ContainerId, Location};

/// Where and how an item was last detected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sighting {
    pub container: ContainerId,
    pub view: View,
    pub position: [f64; 2],
    pub time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemBelief {
    pub location: Location,
    pub last_seen: Option<Sighting>,
    /// Labels assigned to this item's grasps by weight or side camera.
    pub classifications: Vec<String>,
    pub consecutive_failures: u32,
}

/// A lifted item identified as something other than the grasp target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reclassification {
    pub expected: String,
    pub identified_as: String,
    pub source: ContainerId,
    pub time_s: f64,
}

/// The orchestrator's internal model of the task. Every manifest item has
/// exactly one believed location.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub items: BTreeMap<String, ItemBelief>,
    pub reclassifications: Vec<Reclassification>,
}

impl Belief {
    pub fn from_task(task: &TaskSpec) -> Self {
        let items = task
            .manifest
            .iter()
            .map(|e| {
                (
                    e.item.clone(),
                    ItemBelief {
                        location: Location::Container(e.container.clone()),
                        last_seen: None,
                        classifications: Vec::new(),
                        consecutive_failures: 0,
                    },
                )
            })
            .collect();
        Self {
            items,
            reclassifications: Vec::new(),
        }
    }

    pub fn location(&self, item: &str) -> Option<&Location> {
        self.items.get(item).map(|b| &b.location)
    }

    pub fn is_in(&self, item: &str, container: &ContainerId) -> bool {
        self.location(item).and_then(Location::container) == Some(container)
    }

    pub fn items_in<'a>(&'a self, container: &'a ContainerId) -> impl Iterator<Item = &'a str> + 'a {
        self.items
            .iter()
            .filter(move |(_, b)| b.location.container() == Some(container))
            .map(|(k, _)| k.as_str())
    }

    pub fn set_location(&mut self, item: &str, location: Location) {
        if let Some(b) = self.items.get_mut(item) {
            b.location = location;
        }
    }

    pub fn failures(&self, item: &str) -> u32 {
        self.items.get(item).map_or(0, |b| b.consecutive_failures)
    }

    pub fn record_failure(&mut self, item: &str) {
        if let Some(b) = self.items.get_mut(item) {
            b.consecutive_failures += 1;
        }
    }

    pub fn reset_failures(&mut self, item: &str) {
        if let Some(b) = self.items.get_mut(item) {
            b.consecutive_failures = 0;
        }
    }

    pub fn record_sighting(&mut self, item: &str, sighting: Sighting) {
        if let Some(b) = self.items.get_mut(item) {
            b.last_seen = Some(sighting);
        }
    }

    pub fn record_classification(&mut self, item: &str, label: &str) {
        if let Some(b) = self.items.get_mut(item) {
            b.classifications.push(label.to_owned());
        }
    }

    /// Whether each of `manifest` has exactly one entry and nothing else is
    /// tracked.
    pub fn is_partition_of<'a>(&self, manifest: impl IntoIterator<Item = &'a str>) -> bool {
        let mut n = 0;
        for item in manifest {
            if !self.items.contains_key(item) {
                return false;
            }
            n += 1;
        }
        n == self.items.len()
    }
}
