//! Ground-truth simulated work cell.
//!
//! Items rest quasi-statically at stacked bounding-box heights. Every action
//! advances the simulation clock through the motion model, and stochastic
//! outcomes are drawn from the world's named random streams.

mod container;
mod item;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use container::{default_layout, Container, ContainerId, ContainerKind, STORAGE_A, STORAGE_B, TOTE};
pub use item::{Catalog, InstanceId, ItemInstance, ItemSpec, Location, Rigidity, Tool, VisualClass};

use crate::geometry::{cell_center, oriented_extent, Cell, CellGrid, Pose, Rect};
use crate::grasp::GraspPlan;
use crate::motion::{self, MotionError, MotionParams};
use crate::rng::{SimRng, Streams};
use crate::task::TaskSpec;

const PLACEMENT_TRIES: usize = 256;
const SPOT_STEP: f64 = 0.01;
const DROP_SAMPLES: usize = 4;
const SPAWN_SAMPLES: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("item {0} appears more than once in the manifest")]
    DuplicateItem(String),
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("unknown container {0}")]
    UnknownContainer(ContainerId),
    #[error("cannot place {item} in {container}: {reason}")]
    PlacementFailure {
        container: ContainerId,
        item: String,
        reason: String,
    },
    #[error("gripper already holds an item")]
    GripperOccupied,
    #[error("gripper is empty")]
    GripperEmpty,
    #[error("grasp plan has no candidates")]
    EmptyPlan,
    #[error("target {target} is not located in {source_container}")]
    TargetNotInSource {
        target: InstanceId,
        source_container: ContainerId,
    },
    #[error("plan needs the {wanted} but the {active} is active")]
    WrongTool { wanted: Tool, active: Tool },
    #[error("vacuum state queried while the gripper tool is active")]
    SuctionInactive,
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldParams {
    /// Half-width of the uniform scale noise (g).
    pub scale_noise_g: f64,
    /// Success-probability reduction when the target is occluded.
    pub occlusion_penalty: f64,
    /// Success-probability multiplier for probes near a wall.
    pub edge_penalty: f64,
    pub edge_margin_m: f64,
    /// Drop probability after a good grasp unless the item overrides it.
    pub default_drop_prob: f64,
    /// Fraction of drops that land outside every container.
    pub drop_outside_prob: f64,
    pub travel_height_m: f64,
    /// Suction candidates tried within one attempt.
    pub suction_probes: usize,
    /// How far the surface may sit below a probe point and still be touched (m).
    pub contact_tolerance_m: f64,
    /// Largest fraction of a container's volume a manifest may occupy.
    pub fill_limit: f64,
    pub containers: Vec<Container>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            scale_noise_g: 2.0,
            occlusion_penalty: 0.3,
            edge_penalty: 0.6,
            edge_margin_m: 0.05,
            default_drop_prob: 0.03,
            drop_outside_prob: 0.05,
            travel_height_m: 0.55,
            suction_probes: 3,
            contact_tolerance_m: 0.02,
            fill_limit: 0.6,
            containers: default_layout(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Success,
    FailedGrasp,
    DroppedItem,
    WeightMismatch,
    IncorrectReclassification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Perception,
    PhysicalOcclusion,
    Unreachable,
    GraspPoseFailure,
}

/// Result of one grasp attempt. `cause` is present exactly when the kind is
/// `FailedGrasp`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspOutcome {
    kind: OutcomeKind,
    cause: Option<FailureCause>,
    pub grasped_instance: Option<InstanceId>,
    pub probes: usize,
    /// Height above the container floor at which the tool made contact.
    pub contact_height: Option<f64>,
}

impl GraspOutcome {
    pub fn success(instance: InstanceId, probes: usize, contact_height: f64) -> Self {
        Self {
            kind: OutcomeKind::Success,
            cause: None,
            grasped_instance: Some(instance),
            probes,
            contact_height: Some(contact_height),
        }
    }

    pub fn failed(cause: FailureCause, probes: usize) -> Self {
        Self {
            kind: OutcomeKind::FailedGrasp,
            cause: Some(cause),
            grasped_instance: None,
            probes,
            contact_height: None,
        }
    }

    pub fn kind(&self) -> OutcomeKind {
        self.kind
    }

    pub fn cause(&self) -> Option<FailureCause> {
        self.cause
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CarryOutcome {
    Arrived,
    Dropped { landed: Location },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaceReport {
    pub top_height: f64,
    pub protruding: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gripper {
    pub held: Option<InstanceId>,
    pub active_tool: Tool,
    pub wrist: Pose,
}

/// Top surface of one grid cell inside a container.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surface {
    pub z: f64,
    pub owner: Option<InstanceId>,
}

/// Top surfaces of a container's interior cells.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightMap {
    grid: CellGrid<Option<Surface>>,
}

impl HeightMap {
    fn new(cells: &[Cell], floor: Surface) -> Self {
        let mut grid = CellGrid::covering(cells, None);
        for &c in cells {
            if let Some(slot) = grid.get_mut(c) {
                *slot = Some(floor);
            }
        }
        Self { grid }
    }

    pub fn get(&self, cell: Cell) -> Option<Surface> {
        self.grid.get(cell).copied().flatten()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.get(cell).is_some()
    }

    fn get_mut(&mut self, cell: Cell) -> Option<&mut Surface> {
        self.grid.get_mut(cell).and_then(Option::as_mut)
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior cells in ascending `(x, y)` order.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, Surface)> + '_ {
        self.grid.iter().filter_map(|(c, s)| s.map(|s| (c, s)))
    }

    /// The underlying grid, for sizing scratch grids over the same block.
    pub fn grid(&self) -> &CellGrid<Option<Surface>> {
        &self.grid
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub params: WorldParams,
    pub specs: BTreeMap<String, ItemSpec>,
    pub containers: BTreeMap<ContainerId, Container>,
    pub items: BTreeMap<InstanceId, ItemInstance>,
    pub gripper: Gripper,
    pub vacuum_sealed: bool,
    pub clock: f64,
    pub rng: Streams,
    pending_drop: bool,
    grasp_source: Option<ContainerId>,
}

impl WorldState {
    /// A world with the configured containers and no items.
    pub fn empty(params: &WorldParams, seed: u64) -> Self {
        let containers = params
            .containers
            .iter()
            .map(|c| (c.id.clone(), c.clone()))
            .collect();
        let travel = params.travel_height_m;
        Self {
            params: params.clone(),
            specs: BTreeMap::new(),
            containers,
            items: BTreeMap::new(),
            gripper: Gripper {
                held: None,
                active_tool: Tool::Suction,
                wrist: Pose::new([0.5, 0.5, travel], 0.0),
            },
            vacuum_sealed: false,
            clock: 0.0,
            rng: Streams::new(seed),
            pending_drop: false,
            grasp_source: None,
        }
    }

    /// Builds the initial scene of a task: every manifest item is dropped at
    /// a random pose into its container and settles on whatever lies below.
    pub fn spawn(task: &TaskSpec, catalog: &Catalog, params: &WorldParams, seed: u64) -> Result<Self, WorldError> {
        let mut world = Self::empty(params, seed);
        let mut seen = BTreeSet::new();
        let mut volume: BTreeMap<&ContainerId, f64> = BTreeMap::new();
        for entry in &task.manifest {
            let spec = catalog
                .get(&entry.item)
                .ok_or_else(|| WorldError::UnknownItem(entry.item.clone()))?;
            if !seen.insert(entry.item.as_str()) {
                return Err(WorldError::DuplicateItem(entry.item.clone()));
            }
            world.container(&entry.container)?;
            *volume.entry(&entry.container).or_default() += spec.volume_m3();
            world.specs.insert(spec.id.clone(), spec.clone());
        }
        for (id, used) in &volume {
            let container = world.container(id)?;
            if *used > container.volume_m3() * params.fill_limit {
                return Err(WorldError::PlacementFailure {
                    container: (*id).clone(),
                    item: "manifest".into(),
                    reason: format!(
                        "items need {:.1} L but only {:.1} L is usable",
                        used * 1000.0,
                        container.volume_m3() * params.fill_limit * 1000.0
                    ),
                });
            }
        }
        let mut order: Vec<usize> = (0..task.manifest.len()).collect();
        order.sort_by(|&a, &b| {
            let area = |i: usize| {
                let e = world.specs[&task.manifest[i].item].extent_m();
                e[0] * e[1]
            };
            area(b).total_cmp(&area(a)).then(a.cmp(&b))
        });
        for index in order {
            let entry = &task.manifest[index];
            let id = InstanceId(index as u32);
            let container = world.container(&entry.container)?.clone();
            let extent = world.specs[&entry.item].extent_m();
            let (pose, oriented) = world
                .random_rest_pose(&container, extent, true, SPAWN_SAMPLES)
                .or_else(|| world.lowest_rest_pose(&container, extent, 0.0, true))
                .or_else(|| world.lowest_rest_pose(&container, extent, std::f64::consts::FRAC_PI_2, true))
                .or_else(|| world.lowest_rest_pose(&container, extent, 0.0, false))
                .ok_or_else(|| WorldError::PlacementFailure {
                    container: container.id.clone(),
                    item: entry.item.clone(),
                    reason: "footprint larger than the container".into(),
                })?;
            let top_z = pose.position[2] + oriented[2];
            world.items.insert(
                id,
                ItemInstance {
                    id,
                    spec_id: entry.item.clone(),
                    pose,
                    extent: oriented,
                    location: Location::Container(container.id.clone()),
                    top_height: top_z - container.floor_z(),
                    occluded_by: BTreeSet::new(),
                    protruding: top_z > container.top_z() + 1e-9,
                },
            );
        }
        let ids: Vec<ContainerId> = world.containers.keys().cloned().collect();
        for id in &ids {
            world.recompute_occlusion(id);
        }
        Ok(world)
    }

    pub fn container(&self, id: &ContainerId) -> Result<&Container, WorldError> {
        self.containers
            .get(id)
            .ok_or_else(|| WorldError::UnknownContainer(id.clone()))
    }

    pub fn spec(&self, instance: InstanceId) -> Result<&ItemSpec, WorldError> {
        let item = self
            .items
            .get(&instance)
            .ok_or(WorldError::UnknownInstance(instance))?;
        self.specs
            .get(&item.spec_id)
            .ok_or_else(|| WorldError::UnknownItem(item.spec_id.clone()))
    }

    pub fn instance_of(&self, spec_id: &str) -> Option<InstanceId> {
        self.items
            .values()
            .find(|i| i.spec_id == spec_id)
            .map(|i| i.id)
    }

    pub fn items_in<'a>(&'a self, container: &'a ContainerId) -> impl Iterator<Item = &'a ItemInstance> + 'a {
        self.items
            .values()
            .filter(move |i| i.location.container() == Some(container))
    }

    /// Number of items per location class; used by the conservation check.
    pub fn location_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for item in self.items.values() {
            let key = match &item.location {
                Location::Container(c) => c.0.clone(),
                Location::Gripper => "gripper".into(),
                Location::Outside => "outside".into(),
            };
            *counts.entry(key).or_insert(0) += 1;
        }
        counts
    }

    pub fn advance(&mut self, seconds: f64) {
        debug_assert!(seconds >= 0.0);
        self.clock += seconds.max(0.0);
    }

    /// Moves the wrist in a straight line and returns the elapsed time.
    pub fn move_wrist(&mut self, to: Pose, motion: &MotionParams) -> Result<f64, WorldError> {
        let dt = motion::move_time(&self.gripper.wrist, &to, motion)?;
        self.gripper.wrist = to;
        self.advance(dt);
        Ok(dt)
    }

    /// Swaps to `tool` if needed and returns the elapsed time.
    pub fn change_tool(&mut self, tool: Tool, motion: &MotionParams) -> f64 {
        let dt = motion::tool_switch_time(self.gripper.active_tool, tool, motion);
        self.gripper.active_tool = tool;
        self.advance(dt);
        dt
    }

    /// Top surface of every interior cell of a container.
    pub fn height_map(&self, container: &ContainerId) -> HeightMap {
        let Some(c) = self.containers.get(container) else {
            return HeightMap::new(&[], Surface { z: 0.0, owner: None });
        };
        let interior = c.interior();
        let mut map = HeightMap::new(&interior.cells().collect::<Vec<_>>(), Surface { z: c.floor_z(), owner: None });
        let mut stack: Vec<&ItemInstance> = self.items_in(container).collect();
        stack.sort_by(|a, b| a.top_z().total_cmp(&b.top_z()).then(a.id.cmp(&b.id)));
        for item in stack {
            for cell in item.footprint().cells() {
                if let Some(surface) = map.get_mut(cell) {
                    if item.top_z() >= surface.z {
                        *surface = Surface {
                            z: item.top_z(),
                            owner: Some(item.id),
                        };
                    }
                }
            }
        }
        map
    }

    /// Topmost surface directly below `(x, y)` inside a container.
    pub fn surface_at(&self, container: &Container, x: f64, y: f64) -> Surface {
        let mut best = Surface {
            z: container.floor_z(),
            owner: None,
        };
        if !container.interior().contains(x, y) {
            return best;
        }
        for item in self.items_in(&container.id) {
            if item.footprint().contains(x, y) && item.top_z() >= best.z {
                let higher = item.top_z() > best.z || best.owner.is_none_or(|o| item.id > o);
                if higher {
                    best = Surface {
                        z: item.top_z(),
                        owner: Some(item.id),
                    };
                }
            }
        }
        best
    }

    /// Cells of the top surface of an item that no other item covers.
    pub fn visible_cells(&self, instance: InstanceId) -> BTreeSet<Cell> {
        let Some(item) = self.items.get(&instance) else {
            return BTreeSet::new();
        };
        let Some(container) = item.location.container() else {
            return BTreeSet::new();
        };
        self.height_map(container)
            .iter()
            .filter(|(_, s)| s.owner == Some(instance))
            .map(|(c, _)| c)
            .collect()
    }

    pub fn recompute_occlusion(&mut self, container: &ContainerId) {
        let members: Vec<(InstanceId, Rect, f64, f64)> = self
            .items_in(container)
            .map(|i| (i.id, i.footprint(), i.bottom_z(), i.top_z()))
            .collect();
        for (id, rect, _, top) in &members {
            let over: BTreeSet<InstanceId> = members
                .iter()
                .filter(|(other, orect, obottom, _)| other != id && orect.overlaps(rect) && *obottom >= top - 1e-9)
                .map(|(other, ..)| *other)
                .collect();
            if let Some(item) = self.items.get_mut(id) {
                item.occluded_by = over;
            }
        }
    }

    pub fn true_mass(&self, container: &ContainerId) -> f64 {
        self.items_in(container)
            .map(|i| self.specs.get(&i.spec_id).map_or(0.0, |s| s.mass_g))
            .sum()
    }

    /// Scale reading: true contained mass plus uniform noise. Each call
    /// re-samples the noise.
    pub fn read_scale(&mut self, container: &ContainerId) -> Result<f64, WorldError> {
        self.container(container)?;
        let truth = self.true_mass(container);
        let bound = self.params.scale_noise_g;
        let noise = if bound > 0.0 {
            self.rng.sensors.random_range(-bound..=bound)
        } else {
            0.0
        };
        Ok(truth + noise)
    }

    /// Pressure switch on the vacuum line.
    pub fn vacuum_state(&self) -> Result<bool, WorldError> {
        if self.gripper.active_tool != Tool::Suction {
            return Err(WorldError::SuctionInactive);
        }
        Ok(self.vacuum_sealed)
    }

    /// Whether the active tool reports holding something: the vacuum switch
    /// for suction, finger closure for the gripper.
    pub fn held_item_detected(&self) -> bool {
        match self.gripper.active_tool {
            Tool::Suction => self.vacuum_sealed,
            Tool::Gripper => self.gripper.held.is_some(),
        }
    }

    /// Executes a grasp plan against `target`, which the caller believes to
    /// be in `source`. Suction tries up to `suction_probes` candidates in
    /// order; the gripper tries only the first.
    pub fn apply_grasp(
        &mut self,
        plan: &GraspPlan,
        target: InstanceId,
        source: &ContainerId,
        motion: &MotionParams,
    ) -> Result<GraspOutcome, WorldError> {
        if self.gripper.held.is_some() {
            return Err(WorldError::GripperOccupied);
        }
        if plan.candidates.is_empty() {
            return Err(WorldError::EmptyPlan);
        }
        let container = self.container(source)?.clone();
        let located = self
            .items
            .get(&target)
            .ok_or(WorldError::UnknownInstance(target))?
            .location
            .container()
            == Some(source);
        if !located {
            return Err(WorldError::TargetNotInSource {
                target,
                source_container: source.clone(),
            });
        }
        if plan.tool != self.gripper.active_tool {
            return Err(WorldError::WrongTool {
                wanted: plan.tool,
                active: self.gripper.active_tool,
            });
        }
        let probes = match plan.tool {
            Tool::Suction => self.params.suction_probes.max(1),
            Tool::Gripper => 1,
        };
        let travel = self.params.travel_height_m;
        let mut first_cause = None;
        let mut tried = 0;
        for candidate in plan.candidates.iter().take(probes) {
            tried += 1;
            let yaw = candidate.gripper_yaw.unwrap_or(self.gripper.wrist.yaw);
            let [x, y, z] = candidate.position;
            let (x, y) = (
                x.clamp(0.0, motion.workspace_m[0]),
                y.clamp(0.0, motion.workspace_m[1]),
            );
            self.move_wrist(Pose::new([x, y, travel], yaw), motion)?;
            let surface = self.surface_at(&container, x, y);
            let reach = if candidate.descend_until_contact {
                surface.z
            } else {
                z.max(surface.z)
            };
            self.move_wrist(Pose::new([x, y, reach.clamp(0.0, travel)], yaw), motion)?;
            self.advance(motion.grasp_dwell);

            let draws: [f64; 4] = [
                self.rng.grasp.random(),
                self.rng.grasp.random(),
                self.rng.grasp.random(),
                self.rng.grasp.random(),
            ];
            let in_contact = candidate.descend_until_contact
                || surface.z >= z - self.params.contact_tolerance_m;
            let result = match surface.owner {
                Some(owner) if in_contact => {
                    match self.probe(owner, &container, x, y, plan.tool, &draws)? {
                        None => Ok(owner),
                        Some(_) if owner != target => Err(FailureCause::Perception),
                        Some(cause) => Err(cause),
                    }
                }
                _ => Err(FailureCause::Perception),
            };
            self.move_wrist(Pose::new([x, y, travel], yaw), motion)?;
            match result {
                Ok(owner) => {
                    let drop_prob = self
                        .spec(owner)?
                        .drop_prob
                        .unwrap_or(self.params.default_drop_prob);
                    self.pending_drop = draws[3] < drop_prob;
                    let item = self.items.get_mut(&owner).expect("owner exists");
                    item.location = Location::Gripper;
                    item.occluded_by.clear();
                    self.gripper.held = Some(owner);
                    self.vacuum_sealed = plan.tool == Tool::Suction;
                    self.grasp_source = Some(source.clone());
                    self.recompute_occlusion(source);
                    return Ok(GraspOutcome::success(owner, tried, surface.z - container.floor_z()));
                }
                Err(cause) => {
                    first_cause.get_or_insert(cause);
                }
            }
        }
        Ok(GraspOutcome::failed(
            first_cause.unwrap_or(FailureCause::GraspPoseFailure),
            tried,
        ))
    }

    /// Samples one probe on `owner`. Returns the failing factor, if any,
    /// checked in the order occlusion, reach, grasp pose.
    fn probe(
        &self,
        owner: InstanceId,
        container: &Container,
        x: f64,
        y: f64,
        tool: Tool,
        draws: &[f64; 4],
    ) -> Result<Option<FailureCause>, WorldError> {
        let item = &self.items[&owner];
        let spec = self.spec(owner)?;
        let occluded = !item.occluded_by.is_empty();
        let near_wall = container.interior().edge_distance(x, y) < self.params.edge_margin_m;
        if occluded && draws[0] < self.params.occlusion_penalty {
            return Ok(Some(FailureCause::PhysicalOcclusion));
        }
        if near_wall && draws[1] >= self.params.edge_penalty {
            return Ok(Some(FailureCause::Unreachable));
        }
        if draws[2] >= spec.success_prob(tool) {
            return Ok(Some(FailureCause::GraspPoseFailure));
        }
        Ok(None)
    }

    /// Transports the held item to above `dest`. A drop sampled at grasp
    /// time happens here.
    pub fn carry_to(&mut self, dest: &ContainerId, motion: &MotionParams) -> Result<CarryOutcome, WorldError> {
        let held = self.gripper.held.ok_or(WorldError::GripperEmpty)?;
        let target = self.container(dest)?.interior().center();
        let yaw = self.gripper.wrist.yaw;
        let travel = self.params.travel_height_m;
        self.move_wrist(Pose::new([target[0], target[1], travel], yaw), motion)?;
        if !self.pending_drop {
            return Ok(CarryOutcome::Arrived);
        }
        self.pending_drop = false;
        let outside = self.rng.grasp.random::<f64>() < self.params.drop_outside_prob;
        let landed = match (&self.grasp_source, outside) {
            (Some(source), false) => Location::Container(source.clone()),
            _ => Location::Outside,
        };
        self.release_to(held, &landed, false)?;
        Ok(CarryOutcome::Dropped { landed })
    }

    /// Simulated drop of the held item, for fault injection.
    pub fn inject_drop(&mut self, landed: Location) -> Result<(), WorldError> {
        let held = self.gripper.held.ok_or(WorldError::GripperEmpty)?;
        self.pending_drop = false;
        self.release_to(held, &landed, false)
    }

    fn release_to(&mut self, instance: InstanceId, landed: &Location, aligned: bool) -> Result<(), WorldError> {
        self.gripper.held = None;
        self.vacuum_sealed = false;
        self.grasp_source = None;
        match landed {
            Location::Container(id) => self.settle(instance, id, self.gripper.wrist.yaw, aligned).map(|_| ()),
            other => {
                let item = self.items.get_mut(&instance).ok_or(WorldError::UnknownInstance(instance))?;
                item.location = other.clone();
                Ok(())
            }
        }
    }

    /// Lowers the held item into `dest` at the lowest free spot and releases
    /// it with the given yaw.
    pub fn place_item(&mut self, dest: &ContainerId, aligned_yaw: f64, motion: &MotionParams) -> Result<PlaceReport, WorldError> {
        let held = self.gripper.held.ok_or(WorldError::GripperEmpty)?;
        let container = self.container(dest)?.clone();
        let extent = self.spec(held)?.extent_m();
        let oriented = oriented_extent([extent[0], extent[1]], aligned_yaw);
        let (pose, _) = self
            .lowest_rest_pose(&container, extent, aligned_yaw, false)
            .unwrap_or((
                Pose::new(
                    [
                        container.interior().center()[0],
                        container.interior().center()[1],
                        container.floor_z(),
                    ],
                    aligned_yaw,
                ),
                [oriented[0], oriented[1], extent[2]],
            ));
        let travel = self.params.travel_height_m;
        let [x, y, z] = pose.position;
        self.move_wrist(Pose::new([x, y, travel], aligned_yaw), motion)?;
        let release = (z + extent[2]).min(travel);
        self.move_wrist(Pose::new([x, y, release], aligned_yaw), motion)?;
        self.advance(motion.place_dwell);
        self.gripper.held = None;
        self.vacuum_sealed = false;
        self.pending_drop = false;
        self.grasp_source = None;
        let report = self.settle_at(held, &container, pose, [oriented[0], oriented[1], extent[2]]);
        self.move_wrist(Pose::new([x, y, travel], aligned_yaw), motion)?;
        Ok(report)
    }

    /// Puts an item back into a container by hand, e.g. after it fell out of
    /// the workspace. No simulated time passes.
    pub fn restore_item(&mut self, instance: InstanceId, dest: &ContainerId) -> Result<PlaceReport, WorldError> {
        if self.gripper.held == Some(instance) {
            self.gripper.held = None;
            self.vacuum_sealed = false;
            self.pending_drop = false;
            self.grasp_source = None;
        }
        self.settle(instance, dest, 0.0, true)
    }

    fn settle(&mut self, instance: InstanceId, dest: &ContainerId, yaw: f64, lowest: bool) -> Result<PlaceReport, WorldError> {
        let container = self.container(dest)?.clone();
        let extent = self.spec(instance)?.extent_m();
        let previous = self
            .items
            .get(&instance)
            .and_then(|i| i.location.container().cloned());
        // Keep the item's own footprint out of the resting-height query.
        if let Some(item) = self.items.get_mut(&instance) {
            item.location = Location::Gripper;
        }
        let rest = if lowest {
            self.lowest_rest_pose(&container, extent, yaw, false)
        } else {
            self.random_rest_pose(&container, extent, false, DROP_SAMPLES)
        };
        let (pose, oriented) = rest.unwrap_or_else(|| {
            let o = oriented_extent([extent[0], extent[1]], yaw);
            let c = container.interior().center();
            (
                Pose::new([c[0], c[1], self.rest_z(&container, &Rect::centered(c, o))], yaw),
                [o[0], o[1], extent[2]],
            )
        });
        let report = self.settle_at(instance, &container, pose, oriented);
        if let Some(prev) = previous {
            if prev != container.id {
                self.recompute_occlusion(&prev);
            }
        }
        Ok(report)
    }

    fn settle_at(&mut self, instance: InstanceId, container: &Container, pose: Pose, oriented: [f64; 3]) -> PlaceReport {
        let top_height = pose.position[2] + oriented[2] - container.floor_z();
        let protruding = top_height > container.wall_height_m() + 1e-9;
        if let Some(item) = self.items.get_mut(&instance) {
            item.pose = pose;
            item.extent = oriented;
            item.location = Location::Container(container.id.clone());
            item.top_height = top_height;
            item.protruding = protruding;
        }
        self.recompute_occlusion(&container.id);
        PlaceReport { top_height, protruding }
    }

    fn rest_z(&self, container: &Container, rect: &Rect) -> f64 {
        self.items_in(&container.id)
            .filter(|i| i.footprint().overlaps(rect))
            .map(ItemInstance::top_z)
            .fold(container.floor_z(), f64::max)
    }

    /// Lowest of a few uniformly drawn resting poses, which gives a loose
    /// pile rather than a single tower.
    fn random_rest_pose(
        &mut self,
        container: &Container,
        extent: [f64; 3],
        below_wall: bool,
        samples: usize,
    ) -> Option<(Pose, [f64; 3])> {
        let interior = container.interior();
        let mut best: Option<(Pose, [f64; 3])> = None;
        let mut drawn = 0;
        for _ in 0..PLACEMENT_TRIES {
            let yaw = if self.rng.placement.random_bool(0.5) {
                std::f64::consts::FRAC_PI_2
            } else {
                0.0
            };
            let fx: f64 = self.rng.placement.random();
            let fy: f64 = self.rng.placement.random();
            let o = oriented_extent([extent[0], extent[1]], yaw);
            let (sx, sy) = (interior.width() - o[0], interior.depth() - o[1]);
            if sx < 0.0 || sy < 0.0 {
                continue;
            }
            let center = [
                interior.min[0] + o[0] / 2.0 + fx * sx,
                interior.min[1] + o[1] / 2.0 + fy * sy,
            ];
            let rect = Rect::centered(center, o);
            let z = self.rest_z(container, &rect);
            if below_wall && z + extent[2] > container.top_z() + 1e-9 {
                continue;
            }
            if best.as_ref().is_none_or(|(p, _)| z < p.position[2]) {
                best = Some((Pose::new([center[0], center[1], z], yaw), [o[0], o[1], extent[2]]));
            }
            drawn += 1;
            if drawn == samples {
                break;
            }
        }
        best
    }

    /// Lowest resting pose on a 10 mm grid, preferring spots near the
    /// container centre.
    fn lowest_rest_pose(&self, container: &Container, extent: [f64; 3], yaw: f64, below_wall: bool) -> Option<(Pose, [f64; 3])> {
        let interior = container.interior();
        let o = oriented_extent([extent[0], extent[1]], yaw);
        let (sx, sy) = (interior.width() - o[0], interior.depth() - o[1]);
        if sx < 0.0 || sy < 0.0 {
            return None;
        }
        let c = interior.center();
        let nx = (sx / SPOT_STEP).floor() as usize;
        let ny = (sy / SPOT_STEP).floor() as usize;
        let mut best: Option<(f64, f64, [f64; 2])> = None;
        for i in 0..=nx {
            for j in 0..=ny {
                let center = [
                    interior.min[0] + o[0] / 2.0 + i as f64 * SPOT_STEP,
                    interior.min[1] + o[1] / 2.0 + j as f64 * SPOT_STEP,
                ];
                let z = self.rest_z(container, &Rect::centered(center, o));
                let d = (center[0] - c[0]).powi(2) + (center[1] - c[1]).powi(2);
                let better = match best {
                    None => true,
                    Some((bz, bd, _)) => z < bz - 1e-12 || ((z - bz).abs() <= 1e-12 && d < bd - 1e-12),
                };
                if better {
                    best = Some((z, d, center));
                }
            }
        }
        let (z, _, center) = best?;
        if below_wall && z + extent[2] > container.top_z() + 1e-9 {
            return None;
        }
        Some((Pose::new([center[0], center[1], z], yaw), [o[0], o[1], extent[2]]))
    }

    /// Cell centre helper for callers that need workspace coordinates.
    pub fn cell_position(&self, cell: Cell, surface: &Surface) -> [f64; 3] {
        let (x, y) = cell_center(cell);
        [x, y, surface.z]
    }

    pub fn placement_rng(&mut self) -> &mut SimRng {
        &mut self.rng.placement
    }
}
