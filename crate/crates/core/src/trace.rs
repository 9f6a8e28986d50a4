//! Line-delimited run traces: a header carrying the full scenario, one
//! record per tick, and a closing metrics record.

use crate::avoid::AvoidanceDecision;
use crate::geometry::Point;
use crate::metrics::Metrics;
use crate::pilot::{LocalPlan, Mode, RiskAssessment, SavedContext};
use crate::scenario::Scenario;
use crate::track::TrackSnapshot;
use crate::world::{RobotState, VelocityCommand};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub trace_version: u32,
    /// The scenario as run, with any seed or avoidance override applied.
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSample {
    pub id: u32,
    pub position: Point,
    pub radius: f64,
}

/// Per-frame detection counts against the simulator's ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub scan_points: usize,
    /// Returns labeled dynamic.
    pub dynamic_points: usize,
    /// Dynamic-labeled returns that actually came from an agent.
    pub dynamic_from_agents: usize,
    /// All returns that came from an agent.
    pub agent_points: usize,
}

impl DetectionStats {
    pub fn precision(&self) -> Option<f64> {
        (self.dynamic_points > 0).then(|| self.dynamic_from_agents as f64 / self.dynamic_points as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.agent_points > 0).then(|| self.dynamic_from_agents as f64 / self.agent_points as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub time: f64,
    /// Robot state at `time`, before the command is applied.
    pub robot: RobotState,
    pub agents: Vec<AgentSample>,
    pub detection: DetectionStats,
    pub tracks: Vec<TrackSnapshot>,
    pub risk: RiskAssessment,
    /// Mode after this tick's transition.
    pub mode: Mode,
    pub saved_context: Option<SavedContext>,
    pub clear_timer: f64,
    pub active_avoidance_point: Option<Point>,
    pub nav_goal: Option<Point>,
    /// Attractive goal of the local potential map while avoiding.
    pub local_goal: Option<Point>,
    pub decision: Option<AvoidanceDecision>,
    /// True when avoiding and no candidate survived.
    pub no_feasible: bool,
    pub plan: Option<LocalPlan>,
    pub command: VelocityCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(Box<TraceHeader>),
    Tick(Box<TickRecord>),
    Metrics(Metrics),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub ticks: Vec<TickRecord>,
    pub metrics: Metrics,
}

impl RunTrace {
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), TraceError> {
        let mut line = |r: &TraceRecord| -> Result<(), TraceError> {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
            Ok(())
        };
        line(&TraceRecord::Header(Box::new(self.header.clone())))?;
        for t in &self.ticks {
            line(&TraceRecord::Tick(Box::new(t.clone())))?;
        }
        line(&TraceRecord::Metrics(self.metrics.clone()))?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Reads a trace. The metrics record is optional; when absent the
    /// metrics are recomputed from the ticks.
    pub fn read_jsonl(input: impl BufRead) -> Result<RunTrace, TraceError> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut metrics = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| TraceError::Malformed { line: i + 1, reason };
            let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            match rec {
                TraceRecord::Header(h) if header.is_none() && i == 0 => header = Some(*h),
                TraceRecord::Header(_) => return Err(bad("unexpected header".into())),
                TraceRecord::Tick(t) => {
                    if header.is_none() {
                        return Err(bad("tick before header".into()));
                    }
                    if ticks.last().is_some_and(|p: &TickRecord| p.time >= t.time) {
                        return Err(bad("timestamps must increase".into()));
                    }
                    ticks.push(*t);
                }
                TraceRecord::Metrics(m) => metrics = Some(m),
            }
        }
        let header = header.ok_or(TraceError::Malformed {
            line: 1,
            reason: "missing header".into(),
        })?;
        let metrics = match metrics {
            Some(m) => m,
            None => crate::metrics::compute_metrics(&header, &ticks),
        };
        Ok(RunTrace { header, ticks, metrics })
    }

    pub fn load(path: &std::path::Path) -> Result<RunTrace, TraceError> {
        let f = std::fs::File::open(path)?;
        RunTrace::read_jsonl(std::io::BufReader::new(f))
    }
}
