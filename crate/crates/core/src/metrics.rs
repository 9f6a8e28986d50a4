//! Run metrics computed solely from trace records.

use crate::pilot::{Mode, SavedContext};
use crate::trace::{TickRecord, TraceHeader};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ticks: usize,
    /// Smallest robot-agent center distance; absent without agents.
    pub min_separation: Option<f64>,
    /// Largest distance between an agent and its script.
    pub human_deviation: f64,
    /// Time the navigation goal was reached or, without a goal, the time the
    /// robot settled back at its saved pose.
    pub task_time: Option<f64>,
    /// Distance between the final position and the first saved pose.
    pub recovery_error: Option<f64>,
    /// Ticks with some robot-agent separation below the sum of their radii.
    pub collisions: usize,
    pub deadlock: bool,
    /// Longest stretch without a feasible avoidance point (s).
    pub max_no_feasible: f64,
    /// Modes in order of occurrence, consecutive repeats removed.
    pub mode_sequence: Vec<Mode>,
}

pub fn compute_metrics(header: &TraceHeader, ticks: &[TickRecord]) -> Metrics {
    let scenario = &header.scenario;
    let scripts = scenario.agent_scripts();
    let run = &scenario.params.run;

    let mut min_separation: Option<f64> = None;
    let mut collisions = 0;
    let mut human_deviation: f64 = 0.0;
    for t in ticks {
        let mut hit = false;
        for a in &t.agents {
            let sep = (a.position - t.robot.position).norm();
            min_separation = Some(min_separation.map_or(sep, |m| m.min(sep)));
            hit |= sep < a.radius + t.robot.footprint_radius;
            if let Some(expected) = scripts
                .iter()
                .find(|s| s.id == a.id)
                .and_then(|s| s.position_at(t.time))
            {
                human_deviation = human_deviation.max((expected - a.position).norm());
            }
        }
        collisions += usize::from(hit);
    }

    let mut mode_sequence: Vec<Mode> = Vec::new();
    let mut task_time = None;
    let mut prev_mode: Option<Mode> = None;
    for t in ticks {
        if mode_sequence.last() != Some(&t.mode) {
            mode_sequence.push(t.mode);
        }
        let settled = match (prev_mode, t.mode) {
            (Some(Mode::Navigating), Mode::Idle) => true,
            (Some(Mode::Recovering), Mode::Idle) => scenario.robot.goal.is_none(),
            _ => false,
        };
        if settled && task_time.is_none() {
            task_time = Some(t.time);
        }
        prev_mode = Some(t.mode);
    }

    let first_pose = ticks.iter().find_map(|t| match t.saved_context {
        Some(SavedContext::Pose { pose }) => Some(pose),
        _ => None,
    });
    let recovery_error = first_pose
        .zip(ticks.last())
        .map(|(p, last)| (last.robot.position - p.position).norm());

    let mut max_no_feasible: f64 = 0.0;
    let mut streak = 0usize;
    for t in ticks {
        streak = if t.no_feasible { streak + 1 } else { 0 };
        max_no_feasible = max_no_feasible.max(streak as f64 * scenario.tick);
    }

    let mut deadlock = false;
    for (i, a) in ticks.iter().enumerate() {
        if a.mode != Mode::Navigating {
            continue;
        }
        for b in &ticks[i + 1..] {
            if b.mode != Mode::Navigating {
                break;
            }
            if b.time - a.time >= run.deadlock_window - 1e-9 {
                deadlock |= (b.robot.position - a.robot.position).norm() < run.deadlock_progress;
                break;
            }
        }
        if deadlock {
            break;
        }
    }

    Metrics {
        ticks: ticks.len(),
        min_separation,
        human_deviation,
        task_time,
        recovery_error,
        collisions,
        deadlock,
        max_no_feasible,
        mode_sequence,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"))
}

impl Metrics {
    /// Flat `key = value` summary, one metric per line.
    pub fn to_key_values(&self) -> String {
        let modes: Vec<String> = self.mode_sequence.iter().map(|m| format!("{m:?}")).collect();
        let mut s = String::new();
        let _ = writeln!(s, "ticks = {}", self.ticks);
        let _ = writeln!(s, "min_separation = {}", opt(self.min_separation));
        let _ = writeln!(s, "human_deviation = {:.6}", self.human_deviation);
        let _ = writeln!(s, "task_time = {}", opt(self.task_time));
        let _ = writeln!(s, "recovery_error = {}", opt(self.recovery_error));
        let _ = writeln!(s, "collisions = {}", self.collisions);
        let _ = writeln!(s, "deadlock = {}", self.deadlock);
        let _ = writeln!(s, "max_no_feasible = {:.6}", self.max_no_feasible);
        let _ = writeln!(s, "mode_sequence = {}", modes.join(">"));
        s
    }
}
