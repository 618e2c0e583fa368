//! Run log: the totally ordered event record every score and metric is
//! derived from. Serialised as one JSON object per line.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Orchestrator state that emitted an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Perceive,
    Select,
    Synthesize,
    Move,
    Grasp,
    Verify,
    Place,
    Recover,
    Search,
    DoubleCheck,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TaskStart,
    PhaseStart,
    Perceived,
    Selected,
    NothingSelectable,
    GraspPlanned,
    ToolChange,
    ScaleReading,
    AttemptStart,
    AttemptEnd,
    Verified,
    Reclassified,
    Replaced,
    Dropped,
    DropRecovered,
    Placed,
    Stowed,
    Picked,
    Protrusion,
    SearchMove,
    OrderLineAbandoned,
    BeliefCorrection,
    IncorrectReport,
    OrderComplete,
    ManualIntervention,
    Abort,
    Timeout,
    TaskEnd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub time_s: f64,
    pub state: State,
    pub event_kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub payload: Value,
}

impl Event {
    pub fn new(time_s: f64, state: State, event_kind: EventKind) -> Self {
        Self {
            time_s,
            state,
            event_kind,
            item: None,
            container: None,
            payload: Value::Null,
        }
    }

    pub fn item(mut self, item: impl Into<String>) -> Self {
        self.item = Some(item.into());
        self
    }

    pub fn container(mut self, container: impl ToString) -> Self {
        self.container = Some(container.to_string());
        self
    }

    pub fn payload(mut self, payload: Value) -> Self {
        self.payload = payload;
        self
    }

    pub fn field(&self, key: &str) -> Option<&Value> {
        self.payload.get(key)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: time {time} is earlier than the previous event")]
    TimeReversal { line: usize, time: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub events: Vec<Event>,
}

/// First line of a log file when timestamps are enabled. Parsers skip it.
pub const HEADER_KEY: &str = "log_created";

impl RunLog {
    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.event_kind == kind)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.of_kind(kind).count()
    }

    /// Concatenation of two logs.
    pub fn concat(&self, other: &RunLog) -> RunLog {
        RunLog {
            events: self.events.iter().chain(&other.events).cloned().collect(),
        }
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W, header: Option<&str>) -> io::Result<()> {
        if let Some(stamp) = header {
            writeln!(out, "{}", serde_json::json!({ HEADER_KEY: stamp }))?;
        }
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf, None).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses line-delimited events. Blank lines and a leading timestamp
    /// header are skipped; times must never decrease.
    pub fn read_ndjson<R: BufRead>(input: R) -> Result<RunLog, LogError> {
        let mut log = RunLog::default();
        let mut last = f64::NEG_INFINITY;
        for (index, line) in input.lines().enumerate() {
            let line = line?;
            let n = index + 1;
            if line.trim().is_empty() {
                continue;
            }
            if n == 1 && line.contains(HEADER_KEY) {
                continue;
            }
            let event: Event = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: n, source })?;
            if event.time_s < last {
                return Err(LogError::TimeReversal { line: n, time: event.time_s });
            }
            last = event.time_s;
            log.push(event);
        }
        Ok(log)
    }

    pub fn parse(text: &str) -> Result<RunLog, LogError> {
        Self::read_ndjson(text.as_bytes())
    }
}
