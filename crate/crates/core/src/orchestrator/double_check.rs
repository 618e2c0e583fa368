use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Belief;
use crate::motion::MotionParams;
use crate::perception::{segment_scene, viewpoints_for, PerceptionError, PerceptionParams};
use crate::world::{ContainerId, Location, WorldState};

/// A belief location overridden by repeated sightings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub item: String,
    pub from: Location,
    pub to: ContainerId,
    /// Reclassification records that mention the item, by index.
    pub related_reclassifications: Vec<usize>,
}

/// Consecutive sightings of items away from their believed location,
/// carried across double-check rounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SightingStreaks {
    streaks: BTreeMap<String, (ContainerId, u32)>,
}

impl SightingStreaks {
    pub fn get(&self, item: &str) -> Option<(&ContainerId, u32)> {
        self.streaks.get(item).map(|(c, n)| (c, *n))
    }
}

/// Consecutive sightings needed before a belief is overridden.
pub const CONSISTENT_SIGHTINGS: u32 = 2;

/// Re-images every tote and storage compartment once when at most
/// `threshold` items remain, and moves any item seen in the same wrong
/// container on consecutive rounds. Corrections are applied to `belief`
/// and returned.
#[allow(clippy::too_many_arguments)]
pub fn double_check<R: Rng>(
    world: &mut WorldState,
    belief: &mut Belief,
    streaks: &mut SightingStreaks,
    remaining: usize,
    threshold: usize,
    perception: &PerceptionParams,
    motion: &MotionParams,
    rng: &mut R,
) -> Result<Vec<Correction>, PerceptionError> {
    if remaining > threshold {
        return Ok(Vec::new());
    }
    let imageable: Vec<ContainerId> = world
        .containers
        .values()
        .filter(|c| c.is_imageable())
        .map(|c| c.id.clone())
        .collect();
    let mut seen_elsewhere: BTreeMap<String, ContainerId> = BTreeMap::new();
    for id in &imageable {
        let pose = viewpoints_for(&world.containers[id])?.remove(0);
        world.advance(motion.perception_time);
        for p in segment_scene(world, &pose, perception, rng)? {
            if belief.items.contains_key(&p.label) && !belief.is_in(&p.label, id) {
                seen_elsewhere.entry(p.label).or_insert_with(|| id.clone());
            }
        }
    }
    streaks.streaks.retain(|item, _| seen_elsewhere.contains_key(item));
    let mut corrections = Vec::new();
    for (item, container) in seen_elsewhere {
        let entry = streaks.streaks.entry(item.clone()).or_insert((container.clone(), 0));
        if entry.0 == container {
            entry.1 += 1;
        } else {
            *entry = (container.clone(), 1);
        }
        if entry.1 >= CONSISTENT_SIGHTINGS {
            streaks.streaks.remove(&item);
            let from = belief.items[&item].location.clone();
            let related = belief
                .reclassifications
                .iter()
                .enumerate()
                .filter(|(_, r)| r.expected == item || r.identified_as == item)
                .map(|(i, _)| i)
                .collect();
            belief.set_location(&item, Location::Container(container.clone()));
            corrections.push(Correction {
                item,
                from,
                to: container,
                related_reclassifications: related,
            });
        }
    }
    Ok(corrections)
}
