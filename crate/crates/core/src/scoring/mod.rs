//! Competition points, comparison metrics and the failure taxonomy, all
//! computed as folds over a run log.

mod metrics;

use serde::{Deserialize, Serialize};

pub use metrics::{compute_metrics, failure_taxonomy, needs_manual_intervention, FailureHistogram, MetricsReport};

use crate::log::{Event, EventKind, RunLog};

/// Points per scoring event. Awards are non-negative and penalties
/// non-positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreTable {
    #[serde(default = "schema_one")]
    pub schema_version: u32,
    pub stow: f64,
    pub pick: f64,
    pub completion_bonus: f64,
    pub drop_penalty: f64,
    pub protrusion_penalty: f64,
    pub incorrect_report_penalty: f64,
}

fn schema_one() -> u32 {
    1
}

impl Default for ScoreTable {
    /// Calibration table: 14 stows and 9 correct picks plus the completion
    /// bonus add up to 272. Not an official schedule.
    fn default() -> Self {
        Self {
            schema_version: 1,
            stow: 10.0,
            pick: 14.0,
            completion_bonus: 6.0,
            drop_penalty: 0.0,
            protrusion_penalty: 0.0,
            incorrect_report_penalty: 0.0,
        }
    }
}

impl ScoreTable {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("stow", self.stow),
            ("pick", self.pick),
            ("completion_bonus", self.completion_bonus),
        ] {
            if !(v >= 0.0) {
                problems.push(format!("score_table.{name} must be non-negative"));
            }
        }
        for (name, v) in [
            ("drop_penalty", self.drop_penalty),
            ("protrusion_penalty", self.protrusion_penalty),
            ("incorrect_report_penalty", self.incorrect_report_penalty),
        ] {
            if !(v <= 0.0) {
                problems.push(format!("score_table.{name} must not be positive"));
            }
        }
        if self.schema_version != 1 {
            problems.push(format!("score_table.schema_version {} is not supported", self.schema_version));
        }
        problems
    }

    /// Points an event is worth, if it scores at all.
    pub fn delta(&self, event: &Event) -> Option<f64> {
        match event.event_kind {
            EventKind::Stowed => Some(self.stow),
            EventKind::Picked => {
                let correct = event.field("correct").and_then(|v| v.as_bool()).unwrap_or(false);
                correct.then_some(self.pick)
            }
            EventKind::OrderComplete => Some(self.completion_bonus),
            EventKind::Dropped => Some(self.drop_penalty),
            EventKind::Protrusion => Some(self.protrusion_penalty),
            EventKind::IncorrectReport => Some(self.incorrect_report_penalty),
            _ => None,
        }
    }
}

/// Kind of a point in the score trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    Score,
    PhaseStart,
    Completion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time_s: f64,
    pub points: f64,
    pub marker: Marker,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTrace {
    pub final_score: f64,
    pub points: Vec<TracePoint>,
}

impl ScoreTrace {
    /// Two-column CSV of the scoring steps (markers are left out).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seconds", "points"])?;
        for p in self.points.iter().filter(|p| p.marker != Marker::PhaseStart) {
            w.write_record([p.time_s.to_string(), p.points.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sums the per-event points and records the cumulative total after every
/// scoring event. Phase starts appear as markers carrying the running
/// total.
pub fn score_run(log: &RunLog, table: &ScoreTable) -> ScoreTrace {
    let mut total = 0.0;
    let mut points = Vec::new();
    for e in &log.events {
        if let Some(d) = table.delta(e) {
            total += d;
            let marker = if e.event_kind == EventKind::OrderComplete {
                Marker::Completion
            } else {
                Marker::Score
            };
            points.push(TracePoint {
                time_s: e.time_s,
                points: total,
                marker,
            });
        } else if e.event_kind == EventKind::PhaseStart {
            points.push(TracePoint {
                time_s: e.time_s,
                points: total,
                marker: Marker::PhaseStart,
            });
        }
    }
    ScoreTrace {
        final_score: total,
        points,
    }
}
