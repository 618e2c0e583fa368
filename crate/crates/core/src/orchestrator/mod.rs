//! Task-level state machine: perceive, select, synthesize, grasp, verify and
//! place, with weight-based reclassification, drop recovery, active
//! perception, directed search and end-of-task double-checking.

mod belief;
mod double_check;
mod search;
mod select;
mod verify;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use belief::{Belief, ItemBelief, Reclassification, Sighting};
pub use double_check::{double_check, Correction, SightingStreaks, CONSISTENT_SIGHTINGS};
pub use search::{active_perceive, directed_search, SearchMove, ViewUsed};
pub use select::{select_next_item, Candidate, SelectionParams};
pub use verify::{verify_grasp, Verdict, VerifyError};

use crate::geometry::oriented_extent;
use crate::grasp::{synthesize, GraspScoringParams};
use crate::log::{Event, EventKind, RunLog, State};
use crate::motion::MotionParams;
use crate::perception::{classify_held_item, PerceptionParams, SegmentPercept};
use crate::rng::{named_stream, SimRng, PERCEPTION};
use crate::task::{Phase, TaskSpec};
use crate::world::{
    CarryOutcome, ContainerId, ContainerKind, FailureCause, Location, OutcomeKind, WorldError, WorldParams, WorldState,
    STORAGE_A, STORAGE_B, TOTE,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrchestratorParams {
    pub selection: SelectionParams,
    pub weight_tolerance_g: f64,
    /// Fruitless directed-search moves before an order line is abandoned.
    pub search_give_up: u32,
    /// Consecutive perceptions without a selectable item before a phase ends.
    pub fruitless_perception_limit: u32,
}

impl Default for OrchestratorParams {
    fn default() -> Self {
        Self {
            selection: SelectionParams::default(),
            weight_tolerance_g: 5.0,
            search_give_up: 6,
            fruitless_perception_limit: 3,
        }
    }
}

impl OrchestratorParams {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = self.selection.validate();
        if !(self.weight_tolerance_g > 0.0) {
            problems.push("orchestrator.weight_tolerance_g must be positive".into());
        }
        if self.search_give_up == 0 {
            problems.push("orchestrator.search_give_up must be positive".into());
        }
        if self.fruitless_perception_limit == 0 {
            problems.push("orchestrator.fruitless_perception_limit must be positive".into());
        }
        problems
    }
}

/// Every tunable of a simulated run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    pub world: WorldParams,
    pub motion: MotionParams,
    pub perception: PerceptionParams,
    pub grasp: GraspScoringParams,
    pub orchestrator: OrchestratorParams,
}

impl RunParams {
    /// Exact scales, perfect segmentation and no drops.
    pub fn noiseless() -> Self {
        let mut p = Self::default();
        p.world.scale_noise_g = 0.0;
        p.world.default_drop_prob = 0.0;
        p.perception = PerceptionParams::noiseless();
        p
    }
}

/// Log and final belief of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub log: RunLog,
    pub belief: Belief,
    /// Whether the belief was a partition of the manifest after every step.
    pub belief_partition_held: bool,
}

/// Runs a task on a spawned world until the order is done, no progress is
/// possible, or the time limit passes.
pub fn run_task(world: &mut WorldState, task: &TaskSpec, params: &RunParams, seed: u64) -> RunLog {
    run_task_traced(world, task, params, seed).log
}

pub fn run_task_traced(world: &mut WorldState, task: &TaskSpec, params: &RunParams, seed: u64) -> RunOutput {
    let start = world.clock;
    let mut runner = Runner {
        belief: Belief::from_task(task),
        log: RunLog::default(),
        rng: named_stream(seed, PERCEPTION),
        task_deadline: start + task.time_limit_s,
        phase_deadline: start + task.time_limit_s,
        state: State::Perceive,
        streaks: SightingStreaks::default(),
        last_double_check: None,
        partition_held: true,
        order_complete: false,
        abandoned: BTreeSet::new(),
        world,
        task,
        p: params,
    };
    runner.emit(Event::new(start, State::Perceive, EventKind::TaskStart).payload(json!({
        "phase": task.phase,
        "items": task.manifest.len(),
        "order_lines": task.order.len(),
        "time_limit_s": task.time_limit_s,
    })));
    let result = runner.run();
    runner.finish(result);
    RunOutput {
        log: runner.log,
        belief: runner.belief,
        belief_partition_held: runner.partition_held,
    }
}

enum Stop {
    Timeout,
    PhaseOver,
    Abort(String),
}

impl From<WorldError> for Stop {
    fn from(e: WorldError) -> Self {
        Stop::Abort(e.to_string())
    }
}

impl From<crate::perception::PerceptionError> for Stop {
    fn from(e: crate::perception::PerceptionError) -> Self {
        Stop::Abort(e.to_string())
    }
}

/// Why an item is being lifted; decides where it goes once identified.
#[derive(Clone, Debug, PartialEq)]
enum Purpose {
    Stow,
    Pick,
    Relocate(ContainerId),
}

struct Runner<'a> {
    world: &'a mut WorldState,
    task: &'a TaskSpec,
    p: &'a RunParams,
    belief: Belief,
    log: RunLog,
    rng: SimRng,
    task_deadline: f64,
    phase_deadline: f64,
    state: State,
    streaks: SightingStreaks,
    last_double_check: Option<usize>,
    partition_held: bool,
    order_complete: bool,
    abandoned: BTreeSet<String>,
}

impl Runner<'_> {
    fn emit(&mut self, event: Event) {
        self.log.push(event);
    }

    fn event(&self, kind: EventKind) -> Event {
        Event::new(self.world.clock, self.state, kind)
    }

    fn check_time(&self) -> Result<(), Stop> {
        if self.world.clock >= self.task_deadline {
            Err(Stop::Timeout)
        } else if self.world.clock >= self.phase_deadline {
            Err(Stop::PhaseOver)
        } else {
            Ok(())
        }
    }

    fn step_done(&mut self) {
        let manifest = self.task.manifest.iter().map(|e| e.item.as_str());
        self.partition_held &= self.belief.is_partition_of(manifest);
    }

    fn run(&mut self) -> Result<(), Stop> {
        self.check_time()?;
        match self.task.phase {
            Phase::Stow => self.stow_phase(),
            Phase::Pick => self.pick_phase(),
            Phase::Finals => {
                if let Some(budget) = self.task.stow_budget_s {
                    self.phase_deadline = (self.world.clock + budget).min(self.task_deadline);
                }
                match self.stow_phase() {
                    Ok(()) | Err(Stop::PhaseOver) => {}
                    Err(other) => return Err(other),
                }
                self.phase_deadline = self.task_deadline;
                self.last_double_check = None;
                self.pick_phase()
            }
        }
    }

    fn finish(&mut self, result: Result<(), Stop>) {
        self.state = State::Done;
        if let Some(held) = self.world.gripper.held {
            // A run cut short mid-action leaves the item where it was lifted.
            let source = self.belief_of_instance(held);
            if let Some(src) = source {
                let _ = self.world.restore_item(held, &src);
            }
        }
        let terminal = match &result {
            Err(Stop::Abort(reason)) => {
                self.emit(self.event(EventKind::Abort).payload(json!({ "reason": reason })));
                self.emit(self.event(EventKind::ManualIntervention).payload(json!({ "reason": reason })));
                None
            }
            Err(Stop::Timeout) => Some(EventKind::Timeout),
            Ok(()) | Err(Stop::PhaseOver) => Some(EventKind::TaskEnd),
        };
        self.report();
        if let Some(kind) = terminal {
            self.emit(self.event(kind));
        }
    }

    fn belief_of_instance(&self, instance: crate::world::InstanceId) -> Option<ContainerId> {
        let label = &self.world.items.get(&instance)?.spec_id;
        self.belief.location(label)?.container().cloned()
    }

    /// Final location report: every item whose believed location differs
    /// from where it really is costs a penalty.
    fn report(&mut self) {
        let mut wrong = Vec::new();
        for item in self.world.items.values() {
            let believed = self.belief.location(&item.spec_id);
            if believed != Some(&item.location) {
                wrong.push((item.spec_id.clone(), believed.cloned(), item.location.clone()));
            }
        }
        for (item, believed, actual) in wrong {
            self.emit(
                self.event(EventKind::IncorrectReport)
                    .item(item)
                    .payload(json!({ "believed": believed, "actual": actual })),
            );
        }
    }

    fn phase_start(&mut self, phase: &str) {
        self.state = State::Perceive;
        self.emit(self.event(EventKind::PhaseStart).payload(json!({ "phase": phase })));
    }

    fn stow_phase(&mut self) -> Result<(), Stop> {
        self.phase_start("stow");
        let tote = ContainerId::new(TOTE);
        let mut fruitless = 0;
        loop {
            self.check_time()?;
            let remaining = self.believed_in(&tote);
            if remaining.is_empty() {
                return Ok(());
            }
            self.maybe_double_check(remaining.len(), fruitless > 0)?;
            let remaining = self.believed_in(&tote);
            if remaining.is_empty() {
                return Ok(());
            }
            let percepts = self.perceive(&tote, &remaining)?;
            match self.select(&percepts, &tote, &remaining, true) {
                Some(i) => {
                    fruitless = 0;
                    self.attempt(&percepts[i], &tote, Purpose::Stow)?;
                }
                None => {
                    fruitless += 1;
                    self.emit(self.event(EventKind::NothingSelectable).container(&tote));
                    if fruitless >= self.p.orchestrator.fruitless_perception_limit {
                        return Ok(());
                    }
                }
            }
            self.step_done();
        }
    }

    fn pick_phase(&mut self) -> Result<(), Stop> {
        self.phase_start("pick");
        let mut search_moves: BTreeMap<ContainerId, u32> = BTreeMap::new();
        let mut fruitless_rounds = 0;
        loop {
            self.check_time()?;
            let open = self.open_lines();
            if open.is_empty() {
                return Ok(());
            }
            self.maybe_double_check(open.len(), fruitless_rounds > 0)?;
            let open = self.open_lines();
            let sources: Vec<ContainerId> = [STORAGE_A, STORAGE_B, TOTE]
                .into_iter()
                .map(ContainerId::new)
                .filter(|c| open.iter().any(|w| self.belief.is_in(w, c)))
                .collect();
            if sources.is_empty() {
                for item in open {
                    self.abandon(item, "not believed in any source");
                }
                return Ok(());
            }
            let mut searched: Option<(ContainerId, Vec<SegmentPercept>, BTreeSet<String>)> = None;
            let mut attempted = false;
            for src in &sources {
                let wanted: BTreeSet<String> = open.iter().filter(|w| self.belief.is_in(w, src)).cloned().collect();
                let percepts = self.perceive(src, &wanted)?;
                if let Some(i) = self.select(&percepts, src, &wanted, false) {
                    search_moves.remove(src);
                    self.attempt(&percepts[i], src, Purpose::Pick)?;
                    attempted = true;
                    break;
                }
                if searched.is_none() {
                    searched = Some((src.clone(), percepts, wanted));
                }
                self.check_time()?;
            }
            if attempted {
                fruitless_rounds = 0;
                self.step_done();
                continue;
            }
            fruitless_rounds += 1;
            let (src, percepts, wanted) = searched.expect("at least one source was imaged");
            self.search_step(&src, &percepts, &wanted, &open, &mut search_moves)?;
            self.step_done();
        }
    }

    fn search_step(
        &mut self,
        src: &ContainerId,
        percepts: &[SegmentPercept],
        wanted: &BTreeSet<String>,
        open: &BTreeSet<String>,
        search_moves: &mut BTreeMap<ContainerId, u32>,
    ) -> Result<(), Stop> {
        self.state = State::Search;
        let other = ContainerId::new(if src.as_str() == STORAGE_A { STORAGE_B } else { STORAGE_A });
        let container = self.world.container(src)?.clone();
        let candidates: Vec<Candidate> = percepts
            .iter()
            .map(|p| Candidate::from_percept(p, &container, self.world.specs.get(&p.label)))
            .collect();
        let moves = search_moves.entry(src.clone()).or_insert(0);
        *moves += 1;
        let exhausted = *moves >= self.p.orchestrator.search_give_up;
        match directed_search(percepts, &candidates, src, &other, open, &self.belief) {
            Some(mv) => {
                self.emit(
                    self.event(EventKind::SearchMove)
                        .item(&mv.item)
                        .container(src)
                        .payload(json!({ "destination": mv.destination, "move": *moves })),
                );
                self.attempt(&percepts[mv.percept], src, Purpose::Relocate(mv.destination))?;
            }
            None => {
                for item in wanted {
                    self.abandon(item.clone(), "nothing left to move");
                }
                return Ok(());
            }
        }
        if exhausted {
            for item in wanted {
                self.abandon(item.clone(), "search moves exhausted");
            }
        }
        Ok(())
    }

    fn abandon(&mut self, item: String, reason: &str) {
        self.emit(
            self.event(EventKind::OrderLineAbandoned)
                .item(&item)
                .payload(json!({ "reason": reason })),
        );
        self.abandoned.insert(item);
    }

    fn believed_in(&self, container: &ContainerId) -> BTreeSet<String> {
        self.belief.items_in(container).map(str::to_owned).collect()
    }

    /// Order items not yet believed in their box and not given up on.
    fn open_lines(&self) -> BTreeSet<String> {
        self.task
            .order
            .iter()
            .filter(|l| !self.belief.is_in(&l.item, &l.target) && !self.abandoned.contains(&l.item))
            .map(|l| l.item.clone())
            .collect()
    }

    fn maybe_double_check(&mut self, remaining: usize, stuck: bool) -> Result<(), Stop> {
        let threshold = self.p.orchestrator.selection.double_check_threshold;
        if remaining > threshold || (self.last_double_check == Some(remaining) && !stuck) {
            return Ok(());
        }
        self.last_double_check = Some(remaining);
        self.state = State::DoubleCheck;
        let corrections = double_check(
            self.world,
            &mut self.belief,
            &mut self.streaks,
            remaining,
            threshold,
            &self.p.perception,
            &self.p.motion,
            &mut self.rng,
        )?;
        for c in corrections {
            self.emit(
                self.event(EventKind::BeliefCorrection)
                    .item(&c.item)
                    .container(&c.to)
                    .payload(json!({ "from": c.from, "reclassifications": c.related_reclassifications })),
            );
        }
        self.step_done();
        Ok(())
    }

    /// Images a container and keeps the segments whose label is believed to
    /// be in it.
    fn perceive(&mut self, container: &ContainerId, wanted: &BTreeSet<String>) -> Result<Vec<SegmentPercept>, Stop> {
        self.state = State::Perceive;
        let (mut percepts, view) = active_perceive(
            self.world,
            container,
            wanted,
            &self.p.perception,
            &self.p.motion,
            &mut self.rng,
        )?;
        percepts.retain(|p| self.belief.is_in(&p.label, container));
        for p in &percepts {
            self.belief.record_sighting(
                &p.label,
                Sighting {
                    container: container.clone(),
                    view: p.view,
                    position: p.planar_centroid(),
                    time_s: self.world.clock,
                },
            );
        }
        let labels: Vec<&str> = percepts.iter().map(|p| p.label.as_str()).collect();
        self.emit(
            self.event(EventKind::Perceived)
                .container(container)
                .payload(json!({ "view": view, "labels": labels })),
        );
        Ok(percepts)
    }

    fn select(&mut self, percepts: &[SegmentPercept], src: &ContainerId, wanted: &BTreeSet<String>, stowing: bool) -> Option<usize> {
        self.state = State::Select;
        let container = self.world.containers.get(src)?;
        let candidates: Vec<Candidate> = percepts
            .iter()
            .map(|p| Candidate::from_percept(p, container, self.world.specs.get(&p.label)))
            .collect();
        let chosen = select_next_item(&candidates, &self.belief, wanted, &self.p.orchestrator.selection, stowing)?;
        let c = &candidates[chosen];
        self.emit(
            self.event(EventKind::Selected)
                .item(&c.label)
                .container(src)
                .payload(json!({
                    "confidence": c.confidence,
                    "height_m": c.height_m,
                    "failures": self.belief.failures(&c.label),
                    "blacklisted": self.belief.failures(&c.label) >= self.p.orchestrator.selection.blacklist_after,
                })),
        );
        Some(chosen)
    }

    /// Storage compartment with less believed item volume.
    fn stow_target(&self) -> ContainerId {
        let volume = |c: &ContainerId| -> f64 {
            self.belief
                .items_in(c)
                .filter_map(|i| self.world.specs.get(i))
                .map(|s| s.volume_m3())
                .sum()
        };
        let (a, b) = (ContainerId::new(STORAGE_A), ContainerId::new(STORAGE_B));
        if volume(&b) < volume(&a) {
            b
        } else {
            a
        }
    }

    fn destination(&self, label: &str, source: &ContainerId, purpose: &Purpose) -> ContainerId {
        if let Some(line) = self.task.order.iter().find(|l| l.item == label) {
            if self.open_lines().contains(label) && !matches!(purpose, Purpose::Stow) {
                return line.target.clone();
            }
        }
        match purpose {
            Purpose::Stow if source.as_str() == TOTE => self.stow_target(),
            Purpose::Relocate(dest) => dest.clone(),
            Purpose::Stow | Purpose::Pick => source.clone(),
        }
    }

    fn placement_yaw(&self, label: &str, dest: &ContainerId) -> f64 {
        let (Some(spec), Ok(container)) = (self.world.specs.get(label), self.world.container(dest)) else {
            return 0.0;
        };
        let e = spec.extent_m();
        let r = container.interior();
        let fits = |yaw: f64| {
            let o = oriented_extent([e[0], e[1]], yaw);
            o[0] <= r.width() && o[1] <= r.depth()
        };
        if fits(0.0) {
            0.0
        } else {
            std::f64::consts::FRAC_PI_2
        }
    }

    fn attempt(&mut self, percept: &SegmentPercept, source: &ContainerId, purpose: Purpose) -> Result<(), Stop> {
        let label = percept.label.clone();
        let spec = self
            .world
            .specs
            .get(&label)
            .cloned()
            .ok_or_else(|| Stop::Abort(format!("no catalogue entry for {label}")))?;
        let container = self.world.container(source)?.clone();

        self.state = State::Synthesize;
        let plan = synthesize(percept, &container, &spec, &self.p.grasp);
        let fallbacks: Vec<&str> = plan.fallbacks.iter().map(|(s, _)| s.as_str()).collect();
        self.emit(
            self.event(EventKind::GraspPlanned)
                .item(&label)
                .container(source)
                .payload(json!({
                    "strategy": plan.strategy,
                    "tool": plan.tool,
                    "candidates": plan.candidates.len(),
                    "fallbacks": fallbacks,
                })),
        );

        self.state = State::Grasp;
        if self.world.gripper.active_tool != plan.tool {
            let dt = self.world.change_tool(plan.tool, &self.p.motion);
            self.emit(self.event(EventKind::ToolChange).payload(json!({ "tool": plan.tool, "seconds": dt })));
        }
        self.world.advance(self.p.motion.misc_overhead + self.p.motion.scale_settle);
        let before = self.world.read_scale(source)?;
        self.emit(
            self.event(EventKind::ScaleReading)
                .container(source)
                .payload(json!({ "grams": before, "when": "before_lift" })),
        );
        let target = self
            .world
            .instance_of(&label)
            .ok_or_else(|| Stop::Abort(format!("{label} is not in the scene")))?;
        self.emit(self.event(EventKind::AttemptStart).item(&label).container(source));
        let outcome = self.world.apply_grasp(&plan, target, source, &self.p.motion)?;

        let Some(held) = outcome.grasped_instance else {
            self.belief.record_failure(&label);
            let cause: Option<FailureCause> = outcome.cause();
            self.emit(
                self.event(EventKind::AttemptEnd)
                    .item(&label)
                    .container(source)
                    .payload(json!({
                        "kind": OutcomeKind::FailedGrasp,
                        "cause": cause,
                        "lifted": false,
                        "probes": outcome.probes,
                        "strategy": plan.strategy,
                    })),
            );
            return Ok(());
        };
        let truth = self.world.items[&held].spec_id.clone();

        self.state = State::Verify;
        self.world.advance(self.p.motion.scale_settle);
        let after = self.world.read_scale(source)?;
        self.emit(
            self.event(EventKind::ScaleReading)
                .container(source)
                .payload(json!({ "grams": after, "when": "after_lift" })),
        );
        let believed: Vec<(String, f64)> = self
            .belief
            .items_in(source)
            .filter_map(|i| self.world.specs.get(i).map(|s| (i.to_owned(), s.mass_g)))
            .collect();
        let verdict = verify_grasp(
            Some(before),
            Some(after),
            (&label, spec.mass_g),
            &believed,
            self.p.orchestrator.weight_tolerance_g,
        )
        .map_err(|e| Stop::Abort(e.to_string()))?;
        self.emit(
            self.event(EventKind::Verified)
                .item(&label)
                .payload(serde_json::to_value(&verdict).unwrap_or_default()),
        );
        let identified = match &verdict {
            Verdict::Confirmed => Some(label.clone()),
            Verdict::Reclassified(other) => Some(other.clone()),
            Verdict::SecondLook(candidates) => {
                self.world.advance(self.p.motion.perception_time);
                classify_held_item(self.world, candidates, &self.p.perception, &mut self.rng)?
            }
            Verdict::Replace => None,
        };
        if let Some(id) = &identified {
            let method = match verdict {
                Verdict::Confirmed => "weight",
                Verdict::Reclassified(_) => "weight_match",
                _ => "side_camera",
            };
            self.belief.record_classification(id, method);
            if *id == label {
                self.belief.reset_failures(&label);
            } else {
                self.belief.reclassifications.push(Reclassification {
                    expected: label.clone(),
                    identified_as: id.clone(),
                    source: source.clone(),
                    time_s: self.world.clock,
                });
                self.emit(
                    self.event(EventKind::Reclassified)
                        .item(id)
                        .container(source)
                        .payload(json!({ "expected": label, "method": method })),
                );
            }
        }
        let mut kind = match &identified {
            Some(id) if *id != truth => OutcomeKind::IncorrectReclassification,
            Some(id) if *id == label => OutcomeKind::Success,
            _ => OutcomeKind::WeightMismatch,
        };
        let believed_label = identified.clone().unwrap_or_else(|| label.clone());
        let dest = match &identified {
            Some(id) => self.destination(id, source, &purpose),
            None => source.clone(),
        };

        self.state = State::Move;
        match self.world.carry_to(&dest, &self.p.motion)? {
            CarryOutcome::Arrived => {
                self.place(&truth, &believed_label, source, &dest, identified.is_none())?;
            }
            CarryOutcome::Dropped { landed } => {
                kind = OutcomeKind::DroppedItem;
                self.recover_drop(&truth, &believed_label, source, before, &landed)?;
            }
        }
        self.emit(
            self.event(EventKind::AttemptEnd)
                .item(&label)
                .container(source)
                .payload(json!({
                    "kind": kind,
                    "cause": null,
                    "lifted": true,
                    "probes": outcome.probes,
                    "strategy": plan.strategy,
                    "identified": identified,
                    "grasped": truth,
                })),
        );
        Ok(())
    }

    fn place(&mut self, truth: &str, believed: &str, source: &ContainerId, dest: &ContainerId, replacing: bool) -> Result<(), Stop> {
        self.state = State::Place;
        let yaw = self.placement_yaw(believed, dest);
        let report = self.world.place_item(dest, yaw, &self.p.motion)?;
        let kind = self.world.container(dest)?.kind;
        self.emit(
            self.event(if replacing { EventKind::Replaced } else { EventKind::Placed })
                .item(truth)
                .container(dest)
                .payload(json!({ "protruding": report.protruding, "top_height_m": report.top_height })),
        );
        self.belief.set_location(believed, Location::Container(dest.clone()));
        if report.protruding && kind == ContainerKind::StorageCompartment {
            self.emit(self.event(EventKind::Protrusion).item(truth).container(dest));
        }
        if kind == ContainerKind::StorageCompartment && source.as_str() == TOTE {
            self.emit(self.event(EventKind::Stowed).item(truth).container(dest));
        }
        if kind == ContainerKind::ShippingBox {
            let correct = self.task.order.iter().any(|l| l.item == truth && &l.target == dest);
            self.emit(
                self.event(EventKind::Picked)
                    .item(truth)
                    .container(dest)
                    .payload(json!({ "correct": correct })),
            );
            self.check_order_complete();
        }
        Ok(())
    }

    fn check_order_complete(&mut self) {
        if self.order_complete || self.task.order.is_empty() {
            return;
        }
        let done = self.task.order.iter().all(|l| {
            self.world
                .instance_of(&l.item)
                .is_some_and(|i| self.world.items[&i].location == Location::Container(l.target.clone()))
        });
        if done {
            self.order_complete = true;
            self.emit(self.event(EventKind::OrderComplete));
        }
    }

    /// Finds a dropped item through the source scale: if the source regained
    /// its weight the item fell back in, otherwise it left the workspace.
    fn recover_drop(&mut self, truth: &str, believed: &str, source: &ContainerId, before: f64, landed: &Location) -> Result<(), Stop> {
        self.emit(
            self.event(EventKind::Dropped)
                .item(truth)
                .container(source)
                .payload(json!({ "landed": landed })),
        );
        self.state = State::Recover;
        self.world.advance(self.p.motion.scale_settle);
        let now = self.world.read_scale(source)?;
        self.emit(
            self.event(EventKind::ScaleReading)
                .container(source)
                .payload(json!({ "grams": now, "when": "after_drop" })),
        );
        if (now - before).abs() <= self.p.orchestrator.weight_tolerance_g {
            self.belief.set_location(believed, Location::Container(source.clone()));
            self.emit(self.event(EventKind::DropRecovered).item(believed).container(source));
        } else {
            self.belief.set_location(believed, Location::Outside);
            self.emit(
                self.event(EventKind::ManualIntervention)
                    .item(believed)
                    .payload(json!({ "reason": "item left the workspace" })),
            );
        }
        Ok(())
    }
}
