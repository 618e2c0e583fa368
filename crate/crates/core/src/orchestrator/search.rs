use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::select::Candidate;
use super::Belief;
use crate::motion::MotionParams;
use crate::perception::{segment_scene, viewpoints_for, PerceptionError, PerceptionParams, SegmentPercept};
use crate::world::{ContainerId, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewUsed {
    Top,
    Closeups,
}

/// Images a compartment from above and, when no wanted item shows up, from
/// both close-up poses as well. Merged percepts keep the most confident
/// segment per label. Each view costs one perception interval.
pub fn active_perceive<R: Rng>(
    world: &mut WorldState,
    compartment: &ContainerId,
    wanted: &BTreeSet<String>,
    perception: &PerceptionParams,
    motion: &MotionParams,
    rng: &mut R,
) -> Result<(Vec<SegmentPercept>, ViewUsed), PerceptionError> {
    let container = world
        .containers
        .get(compartment)
        .ok_or_else(|| PerceptionError::UnknownContainer(compartment.clone()))?;
    let poses = viewpoints_for(container)?;
    world.advance(motion.perception_time);
    let top = segment_scene(world, &poses[0], perception, rng)?;
    if top.iter().any(|p| wanted.contains(&p.label)) {
        return Ok((top, ViewUsed::Top));
    }
    let mut merged: BTreeMap<String, SegmentPercept> = BTreeMap::new();
    let mut keep = |p: SegmentPercept| match merged.get(&p.label) {
        Some(q) if q.confidence >= p.confidence => {}
        _ => {
            merged.insert(p.label.clone(), p);
        }
    };
    top.into_iter().for_each(&mut keep);
    for pose in &poses[1..] {
        world.advance(motion.perception_time);
        segment_scene(world, pose, perception, rng)?.into_iter().for_each(&mut keep);
    }
    let mut percepts: Vec<SegmentPercept> = merged.into_values().collect();
    percepts.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.label.cmp(&b.label)));
    Ok((percepts, ViewUsed::Closeups))
}

/// An unwanted item to move out of the way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchMove {
    pub item: String,
    pub percept: usize,
    pub source: ContainerId,
    pub destination: ContainerId,
}

/// Picks an unwanted item to move when no wanted item is visible in
/// `compartment`. Items near the latest sighting of a wanted item go first;
/// without sightings the largest, highest item is chosen. The item moves to
/// `other` if that compartment holds no wanted items, otherwise it is
/// relocated within its own compartment.
pub fn directed_search(
    percepts: &[SegmentPercept],
    candidates: &[Candidate],
    compartment: &ContainerId,
    other: &ContainerId,
    wanted: &BTreeSet<String>,
    belief: &Belief,
) -> Option<SearchMove> {
    let movable: Vec<usize> = (0..percepts.len())
        .filter(|&i| !wanted.contains(&percepts[i].label) && belief.is_in(&percepts[i].label, compartment))
        .collect();
    let sighting = wanted
        .iter()
        .filter_map(|w| belief.items.get(w)?.last_seen.as_ref())
        .filter(|s| &s.container == compartment)
        .max_by(|a, b| a.time_s.total_cmp(&b.time_s));
    let chosen = match sighting {
        Some(s) => movable.iter().copied().min_by(|&a, &b| {
            let da = dist(percepts[a].planar_centroid(), s.position);
            let db = dist(percepts[b].planar_centroid(), s.position);
            da.total_cmp(&db).then_with(|| percepts[a].label.cmp(&percepts[b].label))
        }),
        None => movable.iter().copied().max_by(|&a, &b| {
            let sa = bulk(&candidates[a]);
            let sb = bulk(&candidates[b]);
            sa.total_cmp(&sb).then_with(|| percepts[b].label.cmp(&percepts[a].label))
        }),
    }?;
    let other_has_wanted = wanted.iter().any(|w| belief.is_in(w, other));
    Some(SearchMove {
        item: percepts[chosen].label.clone(),
        percept: chosen,
        source: compartment.clone(),
        destination: if other_has_wanted { compartment.clone() } else { other.clone() },
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn bulk(c: &Candidate) -> f64 {
    c.pixel_area as f64 * (c.height_m.max(0.0) + 0.01)
}
