use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{score_run, ScoreTable};
use crate::log::{EventKind, RunLog};
use crate::world::{FailureCause, OutcomeKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureHistogram {
    pub perception: u64,
    pub physical_occlusion: u64,
    pub unreachable: u64,
    pub grasp_pose_failure: u64,
    pub failed_grasp: u64,
    pub dropped_item: u64,
    pub weight_mismatch: u64,
    pub incorrect_reclassification: u64,
}

impl FailureHistogram {
    pub fn cause_total(&self) -> u64 {
        self.perception + self.physical_occlusion + self.unreachable + self.grasp_pose_failure
    }

    /// Shares of failed grasps per cause, in the order perception,
    /// occlusion, unreachable, grasp pose. `None` without failures.
    pub fn cause_shares(&self) -> Option<[f64; 4]> {
        let total = self.cause_total();
        (total > 0).then(|| {
            let t = total as f64;
            [
                self.perception as f64 / t,
                self.physical_occlusion as f64 / t,
                self.unreachable as f64 / t,
                self.grasp_pose_failure as f64 / t,
            ]
        })
    }

    fn record_cause(&mut self, cause: FailureCause) {
        match cause {
            FailureCause::Perception => self.perception += 1,
            FailureCause::PhysicalOcclusion => self.physical_occlusion += 1,
            FailureCause::Unreachable => self.unreachable += 1,
            FailureCause::GraspPoseFailure => self.grasp_pose_failure += 1,
        }
    }

    fn record_kind(&mut self, kind: OutcomeKind) {
        match kind {
            OutcomeKind::Success => {}
            OutcomeKind::FailedGrasp => self.failed_grasp += 1,
            OutcomeKind::DroppedItem => self.dropped_item += 1,
            OutcomeKind::WeightMismatch => self.weight_mismatch += 1,
            OutcomeKind::IncorrectReclassification => self.incorrect_reclassification += 1,
        }
    }
}

impl AddAssign for FailureHistogram {
    fn add_assign(&mut self, o: Self) {
        self.perception += o.perception;
        self.physical_occlusion += o.physical_occlusion;
        self.unreachable += o.unreachable;
        self.grasp_pose_failure += o.grasp_pose_failure;
        self.failed_grasp += o.failed_grasp;
        self.dropped_item += o.dropped_item;
        self.weight_mismatch += o.weight_mismatch;
        self.incorrect_reclassification += o.incorrect_reclassification;
    }
}

/// Buckets every attempt outcome recorded in the log.
pub fn failure_taxonomy(log: &RunLog) -> FailureHistogram {
    let mut h = FailureHistogram::default();
    for e in log.of_kind(EventKind::AttemptEnd) {
        if let Some(kind) = e.field("kind").and_then(|v| serde_json::from_value(v.clone()).ok()) {
            h.record_kind(kind);
        }
        if let Some(cause) = e.field("cause").and_then(|v| serde_json::from_value(v.clone()).ok()) {
            h.record_cause(cause);
        }
    }
    h
}

pub fn needs_manual_intervention(log: &RunLog) -> bool {
    log.of_kind(EventKind::ManualIntervention).next().is_some()
}

/// Comparison metrics of one run or, after merging, of a batch. Counts are
/// kept alongside the rates so that merging stays exact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: u64,
    pub runs_with_manual_intervention: u64,
    pub attempts: u64,
    pub successes: u64,
    pub attempt_time_total_s: f64,
    pub stowed: u64,
    pub picked: u64,
    pub penalties: u64,
    pub final_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grasp_success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_attempt_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_rate: Option<f64>,
    pub failure_histogram: FailureHistogram,
}

impl MetricsReport {
    fn refresh_rates(&mut self) {
        let attempts = self.attempts as f64;
        self.grasp_success_rate = (self.attempts > 0).then(|| self.successes as f64 / attempts);
        self.avg_attempt_time = (self.attempts > 0).then(|| self.attempt_time_total_s / attempts);
        let handled = self.stowed + self.picked;
        self.error_rate = if self.penalties == 0 {
            Some(0.0)
        } else {
            (handled > 0).then(|| self.penalties as f64 / handled as f64)
        };
    }

    /// Combines per-run reports. Scores add up; rates are recomputed from
    /// the summed counts.
    pub fn merge<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> MetricsReport {
        let mut m = MetricsReport::default();
        for r in reports {
            m.runs += r.runs;
            m.runs_with_manual_intervention += r.runs_with_manual_intervention;
            m.attempts += r.attempts;
            m.successes += r.successes;
            m.attempt_time_total_s += r.attempt_time_total_s;
            m.stowed += r.stowed;
            m.picked += r.picked;
            m.penalties += r.penalties;
            m.final_score += r.final_score;
            m.failure_histogram += r.failure_histogram;
        }
        m.refresh_rates();
        m
    }

    pub fn manual_intervention_rate(&self) -> Option<f64> {
        (self.runs > 0).then(|| self.runs_with_manual_intervention as f64 / self.runs as f64)
    }
}

/// Metrics of one log. An attempt succeeds when an item leaves the source,
/// whichever item it is. Attempt time runs from the start of each task to
/// its last attempt, spread over the attempts.
pub fn compute_metrics(log: &RunLog, table: &ScoreTable) -> MetricsReport {
    let mut m = MetricsReport {
        runs: 1,
        runs_with_manual_intervention: needs_manual_intervention(log) as u64,
        final_score: score_run(log, table).final_score,
        failure_histogram: failure_taxonomy(log),
        ..Default::default()
    };
    let mut task_start: Option<f64> = None;
    let mut last_end: Option<f64> = None;
    let close = |start: Option<f64>, end: Option<f64>, total: &mut f64| {
        if let (Some(s), Some(e)) = (start, end) {
            *total += e - s;
        }
    };
    for e in &log.events {
        match e.event_kind {
            EventKind::TaskStart => {
                close(task_start, last_end, &mut m.attempt_time_total_s);
                task_start = Some(e.time_s);
                last_end = None;
            }
            EventKind::AttemptEnd => {
                m.attempts += 1;
                if e.field("lifted").and_then(|v| v.as_bool()).unwrap_or(false) {
                    m.successes += 1;
                }
                last_end = Some(e.time_s);
            }
            EventKind::Stowed => m.stowed += 1,
            EventKind::Picked => m.picked += 1,
            EventKind::Dropped | EventKind::Protrusion | EventKind::IncorrectReport => m.penalties += 1,
            _ => {}
        }
    }
    close(task_start, last_end, &mut m.attempt_time_total_s);
    m.refresh_rates();
    m
}
