//! Simulated camera and semantic segmentation.
//!
//! Instead of running a network, each visible item yields a labelled mask
//! whose F0.5 agreement with the true visible surface is drawn around a
//! clutter-dependent mean. Missing pixels are eroded from the mask's rim and
//! spurious pixels grow as a blob into the neighbouring surface, so low
//! quality masks leak onto adjacent items or the container floor.

mod fbeta;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fbeta::{f_beta, f_beta_from_pr};

use crate::geometry::{cell_center, Cell, CellGrid, Rect};
use crate::world::{Container, ContainerId, HeightMap, InstanceId, VisualClass, WorldState};

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("container {0} is never imaged")]
    NotImageable(ContainerId),
    #[error("unknown container {0}")]
    UnknownContainer(ContainerId),
    #[error("the side camera only classifies held items")]
    SideViewNotSegmentable,
    #[error("the gripper is empty")]
    EmptyGripper,
    #[error("no candidate labels given")]
    NoCandidates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    TopFull,
    CloseupLeft,
    CloseupRight,
    SideReclassify,
}

impl View {
    pub fn is_closeup(self) -> bool {
        matches!(self, View::CloseupLeft | View::CloseupRight)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub container: ContainerId,
    pub view: View,
    pub position: [f64; 3],
}

impl CameraPose {
    /// Horizontal region of the container this pose sees.
    pub fn region(&self, container: &Container) -> Rect {
        let r = container.interior();
        let mid = r.center()[0];
        match self.view {
            View::CloseupLeft => Rect::new(r.min, [mid, r.max[1]]),
            View::CloseupRight => Rect::new([mid, r.min[1]], r.max),
            View::TopFull | View::SideReclassify => r,
        }
    }
}

/// One camera-space sample of a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub pixel: Cell,
    pub position: [f64; 3],
    pub depth_valid: bool,
}

/// One hypothesised item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPercept {
    pub label: String,
    pub confidence: f64,
    pub points: Vec<SurfacePoint>,
    pub pixel_area: usize,
    /// Centre of the colour segment: the segment point nearest its mean.
    pub centroid_rgb: [f64; 3],
    pub container: ContainerId,
    pub view: View,
}

impl SegmentPercept {
    pub fn mask(&self) -> BTreeSet<Cell> {
        self.points.iter().map(|p| p.pixel).collect()
    }

    /// Highest point of the segment; used as the item's apparent height.
    pub fn top_z(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.position[2])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn planar_centroid(&self) -> [f64; 2] {
        let n = self.points.len().max(1) as f64;
        let sx: f64 = self.points.iter().map(|p| p.position[0]).sum();
        let sy: f64 = self.points.iter().map(|p| p.position[1]).sum();
        [sx / n, sy / n]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionParams {
    /// Knots (item count, mean F0.5), interpolated linearly and clamped.
    pub f_half_by_clutter: Vec<[f64; 2]>,
    /// Standard deviation of per-item mask quality around the mean.
    pub quality_spread: f64,
    pub confusion_prob: f64,
    /// Knots (item count, probability an item is not detected).
    pub miss_prob_by_clutter: Vec<[f64; 2]>,
    /// Minimum share of true pixels eroded from every mask.
    pub mask_erosion_fraction: f64,
    /// Recall as a multiple of mask quality; precision follows from the
    /// quality, so values below 1 trade missing pixels for fewer spurious ones.
    pub recall_scale: f64,
    /// Per-point depth dropout on reflective surfaces.
    pub reflective_dropout: f64,
    /// Factor applied to the item count seen by a close-up view.
    pub closeup_clutter_factor: f64,
    /// Side-camera classifications below this confidence return nothing.
    pub min_classification_confidence: f64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            f_half_by_clutter: vec![[1.0, 0.85], [20.0, 0.45]],
            quality_spread: 0.12,
            confusion_prob: 0.03,
            miss_prob_by_clutter: vec![[1.0, 0.0], [20.0, 0.08]],
            mask_erosion_fraction: 0.05,
            recall_scale: 1.0,
            reflective_dropout: 0.5,
            closeup_clutter_factor: 0.5,
            min_classification_confidence: 0.3,
        }
    }
}

impl PerceptionParams {
    /// Perfect segmentation: exact masks, no misses, no confusion.
    pub fn noiseless() -> Self {
        Self {
            f_half_by_clutter: vec![[1.0, 1.0]],
            quality_spread: 0.0,
            confusion_prob: 0.0,
            miss_prob_by_clutter: vec![[1.0, 0.0]],
            mask_erosion_fraction: 0.0,
            ..Self::default()
        }
    }

    pub fn mean_quality(&self, clutter: f64) -> f64 {
        interpolate(&self.f_half_by_clutter, clutter).clamp(0.0, 1.0)
    }

    pub fn miss_prob(&self, clutter: f64) -> f64 {
        interpolate(&self.miss_prob_by_clutter, clutter).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (name, knots) in [
            ("perception.f_half_by_clutter", &self.f_half_by_clutter),
            ("perception.miss_prob_by_clutter", &self.miss_prob_by_clutter),
        ] {
            if knots.is_empty() {
                problems.push(format!("{name} needs at least one knot"));
            }
            if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                problems.push(format!("{name} item counts must be strictly increasing"));
            }
            if knots.iter().any(|k| !(0.0..=1.0).contains(&k[1])) {
                problems.push(format!("{name} values must lie in [0, 1]"));
            }
        }
        if self.f_half_by_clutter.windows(2).any(|w| w[1][1] > w[0][1]) {
            problems.push("perception.f_half_by_clutter must be non-increasing in item count".into());
        }
        for (name, v) in [
            ("perception.confusion_prob", self.confusion_prob),
            ("perception.mask_erosion_fraction", self.mask_erosion_fraction),
            ("perception.recall_scale", self.recall_scale),
            ("perception.reflective_dropout", self.reflective_dropout),
            ("perception.min_classification_confidence", self.min_classification_confidence),
        ] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.quality_spread < 0.0 {
            problems.push("perception.quality_spread must be non-negative".into());
        }
        if !(self.closeup_clutter_factor > 0.0) {
            problems.push("perception.closeup_clutter_factor must be positive".into());
        }
        problems
    }
}

/// Piecewise-linear interpolation through `knots`, clamped at both ends.
pub fn interpolate(knots: &[[f64; 2]], x: f64) -> f64 {
    match knots {
        [] => 0.0,
        [only] => only[1],
        _ => {
            if x <= knots[0][0] {
                return knots[0][1];
            }
            for w in knots.windows(2) {
                if x <= w[1][0] {
                    let t = (x - w[0][0]) / (w[1][0] - w[0][0]);
                    return w[0][1] + t * (w[1][1] - w[0][1]);
                }
            }
            knots[knots.len() - 1][1]
        }
    }
}

const TOP_VIEW_HEIGHT: f64 = 0.85;
const CLOSEUP_HEIGHT: f64 = 0.6;
const MIN_QUALITY: f64 = 0.05;

/// Camera poses for a tote or storage compartment: the full top view, then
/// the two close-ups each covering half of it.
pub fn viewpoints_for(container: &Container) -> Result<Vec<CameraPose>, PerceptionError> {
    if !container.is_imageable() {
        return Err(PerceptionError::NotImageable(container.id.clone()));
    }
    let r = container.interior();
    let c = r.center();
    let quarter = r.width() / 4.0;
    Ok(vec![
        CameraPose {
            container: container.id.clone(),
            view: View::TopFull,
            position: [c[0], c[1], TOP_VIEW_HEIGHT],
        },
        CameraPose {
            container: container.id.clone(),
            view: View::CloseupLeft,
            position: [c[0] - quarter, c[1], CLOSEUP_HEIGHT],
        },
        CameraPose {
            container: container.id.clone(),
            view: View::CloseupRight,
            position: [c[0] + quarter, c[1], CLOSEUP_HEIGHT],
        },
    ])
}

/// True visible mask of every item that shows at least one pixel in the
/// camera's region.
pub fn visible_masks(world: &WorldState, camera: &CameraPose) -> Result<BTreeMap<InstanceId, BTreeSet<Cell>>, PerceptionError> {
    let container = world
        .containers
        .get(&camera.container)
        .ok_or_else(|| PerceptionError::UnknownContainer(camera.container.clone()))?;
    Ok(masks_in(&world.height_map(&camera.container), &camera.region(container)))
}

fn masks_in(heights: &HeightMap, region: &Rect) -> BTreeMap<InstanceId, BTreeSet<Cell>> {
    let mut masks: BTreeMap<InstanceId, BTreeSet<Cell>> = BTreeMap::new();
    for (cell, surface) in heights.iter() {
        let (x, y) = cell_center(cell);
        if let (Some(owner), true) = (surface.owner, region.contains(x, y)) {
            masks.entry(owner).or_default().insert(cell);
        }
    }
    masks
}

/// Recall and precision realising a target F0.5 of `quality`, with recall
/// capped by the erosion floor.
fn mask_rates(quality: f64, erosion: f64, recall_scale: f64) -> (f64, f64) {
    let q = quality.clamp(MIN_QUALITY, 1.0);
    let floor = 0.25 * q / (1.25 - q);
    let recall = (recall_scale * q).min(1.0 - erosion).max(floor).min(1.0);
    let precision = (q * recall / (1.25 * recall - 0.25 * q)).min(1.0);
    (precision, recall)
}

fn four_neighbors(c: Cell) -> [Cell; 4] {
    [(c.0 + 1, c.1), (c.0 - 1, c.1), (c.0, c.1 + 1), (c.0, c.1 - 1)]
}

/// Pixels of `truth` ordered rim first, random among equal depth.
fn erosion_order<R: Rng>(truth: &BTreeSet<Cell>, inside: impl Fn(Cell) -> bool, scratch: &HeightMap, rng: &mut R) -> Vec<Cell> {
    let mut depth: CellGrid<Option<u32>> = CellGrid::like(scratch.grid(), None);
    let mut queue = VecDeque::new();
    for &c in truth {
        if four_neighbors(c).iter().any(|n| !inside(*n)) {
            if let Some(d) = depth.get_mut(c) {
                *d = Some(0);
            }
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        let d = depth.get(c).copied().flatten().unwrap_or(0);
        for n in four_neighbors(c) {
            if inside(n) {
                if let Some(slot @ None) = depth.get_mut(n) {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    let mut keyed: Vec<(u32, u32, Cell)> = truth
        .iter()
        .map(|&c| (depth.get(c).copied().flatten().unwrap_or(0), rng.random::<u32>(), c))
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, _, c)| c).collect()
}

/// A connected blob of `count` pixels outside `truth`, grown from a random
/// pixel bordering it.
fn spurious_blob<R: Rng>(
    truth: &BTreeSet<Cell>,
    inside: impl Fn(Cell) -> bool,
    allowed: impl Fn(Cell) -> bool,
    scratch: &HeightMap,
    count: usize,
    rng: &mut R,
) -> Vec<Cell> {
    if count == 0 {
        return Vec::new();
    }
    let border: Vec<Cell> = truth
        .iter()
        .flat_map(|c| four_neighbors(*c))
        .filter(|n| !inside(*n) && allowed(*n))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let Some(seed) = border.choose(rng).copied() else {
        return Vec::new();
    };
    let mut seen: CellGrid<bool> = CellGrid::like(scratch.grid(), false);
    if let Some(s) = seen.get_mut(seed) {
        *s = true;
    }
    let mut taken = vec![seed];
    let mut queue = VecDeque::from([seed]);
    while let Some(c) = queue.pop_front() {
        if taken.len() >= count {
            break;
        }
        for n in four_neighbors(c) {
            if taken.len() >= count {
                break;
            }
            if !inside(n) && allowed(n) {
                if let Some(s @ false) = seen.get_mut(n) {
                    *s = true;
                    taken.push(n);
                    queue.push_back(n);
                }
            }
        }
    }
    taken
}

fn sample_quality<R: Rng>(mean: f64, spread: f64, rng: &mut R) -> f64 {
    let q = if spread > 0.0 {
        Normal::new(mean, spread).map_or(mean, |d| d.sample(rng))
    } else {
        mean
    };
    q.clamp(MIN_QUALITY, 1.0)
}

fn depth_valid<R: Rng>(class: Option<VisualClass>, params: &PerceptionParams, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    match class {
        Some(c) if c.depth_blind() => false,
        Some(VisualClass::Reflective) => u >= params.reflective_dropout,
        _ => true,
    }
}

/// Segments the scene seen from `camera`.
pub fn segment_scene<R: Rng>(
    world: &WorldState,
    camera: &CameraPose,
    params: &PerceptionParams,
    rng: &mut R,
) -> Result<Vec<SegmentPercept>, PerceptionError> {
    if camera.view == View::SideReclassify {
        return Err(PerceptionError::SideViewNotSegmentable);
    }
    let container = world
        .containers
        .get(&camera.container)
        .ok_or_else(|| PerceptionError::UnknownContainer(camera.container.clone()))?;
    if !container.is_imageable() {
        return Err(PerceptionError::NotImageable(container.id.clone()));
    }
    let region = camera.region(container);
    let heights = world.height_map(&camera.container);
    let allowed = |c: Cell| {
        let (x, y) = cell_center(c);
        heights.contains(c) && region.contains(x, y)
    };
    let mut clutter = world.items_in(&camera.container).count() as f64;
    if camera.view.is_closeup() {
        clutter *= params.closeup_clutter_factor;
    }
    let mean = params.mean_quality(clutter);
    let miss = params.miss_prob(clutter);
    let labels: Vec<&String> = world.specs.keys().collect();

    let mut percepts = Vec::new();
    for (instance, truth) in masks_in(&heights, &region) {
        let missed = rng.random::<f64>() < miss;
        let quality = sample_quality(mean, params.quality_spread, rng);
        let confused = rng.random::<f64>() < params.confusion_prob;
        let true_label = &world.items[&instance].spec_id;
        let alternatives: Vec<&&String> = labels.iter().filter(|l| **l != true_label).collect();
        let swapped = alternatives.choose(rng).map(|l| (**l).clone());
        if missed {
            continue;
        }
        let label = match (confused, swapped) {
            (true, Some(other)) => other,
            _ => true_label.clone(),
        };

        let (precision, recall) = mask_rates(quality, params.mask_erosion_fraction, params.recall_scale);
        let keep = ((recall * truth.len() as f64).round() as usize).clamp(1, truth.len());
        let inside = |c: Cell| allowed(c) && heights.get(c).and_then(|s| s.owner) == Some(instance);
        let order = erosion_order(&truth, inside, &heights, rng);
        let mut mask: BTreeSet<Cell> = order[truth.len() - keep..].iter().copied().collect();
        let spurious = ((keep as f64) * (1.0 - precision) / precision).round() as usize;
        mask.extend(spurious_blob(&truth, inside, allowed, &heights, spurious, rng));

        let points: Vec<SurfacePoint> = mask
            .iter()
            .map(|cell| {
                let surface = heights.get(*cell).expect("mask cells lie on the height map");
                let class = surface
                    .owner
                    .and_then(|o| world.spec(o).ok())
                    .map(|s| s.visual_class);
                let (x, y) = cell_center(*cell);
                SurfacePoint {
                    pixel: *cell,
                    position: [x, y, surface.z],
                    depth_valid: depth_valid(class, params, rng),
                }
            })
            .collect();
        let centroid_rgb = segment_centre(&points);
        percepts.push(SegmentPercept {
            label,
            confidence: quality,
            pixel_area: points.len(),
            points,
            centroid_rgb,
            container: camera.container.clone(),
            view: camera.view,
        });
    }
    percepts.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.label.cmp(&b.label)));
    Ok(percepts)
}

/// Segment point closest to the planar mean, so the centre always lies on
/// the segment itself.
fn segment_centre(points: &[SurfacePoint]) -> [f64; 3] {
    let n = points.len().max(1) as f64;
    let mx = points.iter().map(|p| p.position[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p.position[1]).sum::<f64>() / n;
    points
        .iter()
        .min_by(|a, b| {
            let da = (a.position[0] - mx).hypot(a.position[1] - my);
            let db = (b.position[0] - mx).hypot(b.position[1] - my);
            da.total_cmp(&db).then_with(|| a.pixel.cmp(&b.pixel))
        })
        .map_or([mx, my, 0.0], |p| p.position)
}

/// Mean per-item F0.5 of a set of percepts against the true visible masks.
/// An item's prediction is the union of all masks carrying its label;
/// undetected items score 0. `None` when nothing is visible.
pub fn scene_f_half(
    world: &WorldState,
    camera: &CameraPose,
    percepts: &[SegmentPercept],
) -> Result<Option<f64>, PerceptionError> {
    let truth = visible_masks(world, camera)?;
    if truth.is_empty() {
        return Ok(None);
    }
    let mut predicted: BTreeMap<&str, BTreeSet<Cell>> = BTreeMap::new();
    for p in percepts {
        predicted.entry(p.label.as_str()).or_default().extend(p.mask());
    }
    let empty = BTreeSet::new();
    let mut total = 0.0;
    for (instance, mask) in &truth {
        let label = world.items[instance].spec_id.as_str();
        total += f_beta(predicted.get(label).unwrap_or(&empty), mask, 0.5)?;
    }
    Ok(Some(total / truth.len() as f64))
}

/// Second classification of the held item by the side camera, restricted to
/// `candidates`.
pub fn classify_held_item<R: Rng>(
    world: &WorldState,
    candidates: &[String],
    params: &PerceptionParams,
    rng: &mut R,
) -> Result<Option<String>, PerceptionError> {
    let held = world.gripper.held.ok_or(PerceptionError::EmptyGripper)?;
    if candidates.is_empty() {
        return Err(PerceptionError::NoCandidates);
    }
    let truth = world.items[&held].spec_id.clone();
    let confidence = sample_quality(params.mean_quality(1.0), params.quality_spread, rng);
    let confused = rng.random::<f64>() < params.confusion_prob;
    let pick: f64 = rng.random();
    if confidence < params.min_classification_confidence || !candidates.contains(&truth) {
        return Ok(None);
    }
    if !confused {
        return Ok(Some(truth));
    }
    let wrong: Vec<&String> = candidates.iter().filter(|c| **c != truth).collect();
    // Each wrong label and "no answer" are equally likely.
    let slot = ((pick * (wrong.len() + 1) as f64) as usize).min(wrong.len());
    Ok(wrong.get(slot).map(|s| (*s).clone()))
}

#[cfg(test)]
mod tests;
