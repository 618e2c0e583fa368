use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Belief;
use crate::geometry::CELL_PITCH;
use crate::perception::SegmentPercept;
use crate::world::{Container, ItemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionParams {
    pub height_bin_m: f64,
    pub blacklist_after: u32,
    pub min_segment_area: usize,
    pub min_confidence: f64,
    pub double_check_threshold: usize,
    /// When stowing, a segment showing less than this share of the item's
    /// top face counts as partly covered.
    pub stow_min_visible_fraction: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            height_bin_m: 0.03,
            blacklist_after: 3,
            min_segment_area: 20,
            min_confidence: 0.2,
            double_check_threshold: 5,
            stow_min_visible_fraction: 0.5,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.height_bin_m > 0.0) {
            problems.push("orchestrator.selection.height_bin_m must be positive".into());
        }
        if self.blacklist_after == 0 {
            problems.push("orchestrator.selection.blacklist_after must be positive".into());
        }
        if self.min_segment_area == 0 {
            problems.push("orchestrator.selection.min_segment_area must be positive".into());
        }
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            problems.push("orchestrator.selection.min_confidence must lie in (0, 1]".into());
        }
        if self.double_check_threshold == 0 {
            problems.push("orchestrator.selection.double_check_threshold must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.stow_min_visible_fraction) {
            problems.push("orchestrator.selection.stow_min_visible_fraction must lie in [0, 1]".into());
        }
        problems
    }
}

/// What selection needs to know about one percept.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub confidence: f64,
    /// Apparent top-surface height above the container floor.
    pub height_m: f64,
    pub pixel_area: usize,
    /// Share of the item's expected top face the segment covers, when known.
    pub visible_fraction: Option<f64>,
}

impl Candidate {
    /// Reads a percept against its container and the labelled item's
    /// catalogue entry. Height is the median point height, which ignores
    /// stray pixels spilling onto neighbours.
    pub fn from_percept(percept: &SegmentPercept, container: &Container, spec: Option<&ItemSpec>) -> Self {
        let mut zs: Vec<f64> = percept.points.iter().map(|p| p.position[2]).collect();
        zs.sort_by(f64::total_cmp);
        let median = zs.get(zs.len() / 2).copied().unwrap_or(container.floor_z());
        let visible_fraction = spec.map(|s| {
            let e = s.extent_m();
            let expected = (e[0] * e[1] / (CELL_PITCH * CELL_PITCH)).max(1.0);
            percept.pixel_area as f64 / expected
        });
        Self {
            label: percept.label.clone(),
            confidence: percept.confidence,
            height_m: median - container.floor_z(),
            pixel_area: percept.pixel_area,
            visible_fraction,
        }
    }
}

/// Chooses the next grasp target among `candidates`, returning its index.
///
/// Candidates outside `wanted` are never chosen. The rest pass through four
/// filters: partial cover (stowing only), the failure blacklist, minimum
/// segment area and minimum confidence. When nothing survives, filters are
/// dropped one at a time in that order. Survivors are binned by height and
/// the most confident item of the highest bin wins, ties going to the
/// smaller label.
pub fn select_next_item(
    candidates: &[Candidate],
    belief: &Belief,
    wanted: &BTreeSet<String>,
    params: &SelectionParams,
    stowing: bool,
) -> Option<usize> {
    let pool: Vec<usize> = (0..candidates.len())
        .filter(|&i| wanted.contains(&candidates[i].label))
        .collect();
    if pool.is_empty() {
        return None;
    }
    let uncovered = |c: &Candidate| !stowing || c.visible_fraction.is_none_or(|f| f >= params.stow_min_visible_fraction);
    let fresh = |c: &Candidate| belief.failures(&c.label) < params.blacklist_after;
    let large = |c: &Candidate| c.pixel_area >= params.min_segment_area;
    let confident = |c: &Candidate| c.confidence >= params.min_confidence;
    let filters: [&dyn Fn(&Candidate) -> bool; 4] = [&uncovered, &fresh, &large, &confident];

    for relaxed in 0..=filters.len() {
        let survivors: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&i| filters[relaxed..].iter().all(|f| f(&candidates[i])))
            .collect();
        if let Some(best) = best_of(candidates, &survivors, params.height_bin_m) {
            return Some(best);
        }
    }
    None
}

fn best_of(candidates: &[Candidate], pool: &[usize], bin: f64) -> Option<usize> {
    let bin_of = |i: usize| (candidates[i].height_m / bin).floor() as i64;
    pool.iter().copied().max_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        bin_of(a)
            .cmp(&bin_of(b))
            .then(ca.confidence.total_cmp(&cb.confidence))
            .then_with(|| cb.label.cmp(&ca.label))
    })
}
