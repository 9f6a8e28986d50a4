//! Versioned scenario files: map, robot, scripted agents, timing and
//! parameter overrides for every pipeline stage.

use crate::avoid::AvoidParams;
use crate::detect::TsdfParams;
use crate::field::FieldParams;
use crate::geometry::{Point, Pose};
use crate::pilot::PilotParams;
use crate::track::TrackParams;
use crate::world::{AgentScript, Behavior, RobotLimits, SensorParams, StaticMap, Waypoint};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario schema error: {0}")]
    Parse(String),
    #[error("scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown bundled scenario `{0}`")]
    UnknownBundled(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Static occupancy given as text rows, an image, or an empty rectangle,
/// with optional border and wall rectangles drawn on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub resolution: f64,
    /// World position of the lower-left map corner.
    #[serde(default = "Point::origin")]
    pub origin: Point,
    /// Rows of `#` (occupied) and `.` (free); the first row is the top.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<String>>,
    /// Grayscale PGM, dark pixels occupied; resolved relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    /// Occupy the outermost ring of cells.
    #[serde(default)]
    pub border: bool,
    /// Occupied rectangles `[x0, y0, x1, y1]` in world coordinates.
    #[serde(default)]
    pub walls: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    /// `[x, y, heading]`.
    pub pose: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Point>,
    #[serde(default = "default_footprint")]
    pub footprint_radius: f64,
}

fn default_footprint() -> f64 {
    0.25
}

fn default_agent_radius() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: u32,
    #[serde(default = "default_agent_radius")]
    pub radius: f64,
    pub behavior: Behavior,
    /// `[x, y, arrival_time]` triples.
    pub waypoints: Vec<[f64; 3]>,
}

impl AgentSpec {
    pub fn script(&self) -> AgentScript {
        AgentScript {
            id: self.id,
            radius: self.radius,
            waypoints: self
                .waypoints
                .iter()
                .map(|w| Waypoint {
                    position: Point::new(w[0], w[1]),
                    time: w[2],
                })
                .collect(),
            behavior: self.behavior,
        }
    }
}

/// Run-level knobs that are not owned by a pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    /// Longest tolerated stretch without a feasible avoidance point (s).
    pub no_feasible_tolerance: f64,
    /// Navigating window over which too little progress is a deadlock (s).
    pub deadlock_window: f64,
    /// Displacement below which a deadlock window counts as stuck (m).
    pub deadlock_progress: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            no_feasible_tolerance: 2.0,
            deadlock_window: 5.0,
            deadlock_progress: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub sensor: SensorParams,
    pub tsdf: TsdfParams,
    pub track: TrackParams,
    pub field: FieldParams,
    pub avoid: AvoidParams,
    pub pilot: PilotParams,
    pub robot: RobotLimits,
    pub run: RunParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Simulated time (s).
    pub duration: f64,
    /// Control period (s).
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default)]
    pub seed: u64,
    /// When false the conflict pipeline is bypassed and the robot pursues its
    /// goal (or stays put) regardless of tracks.
    #[serde(default = "default_true")]
    pub avoidance_enabled: bool,
    pub map: MapSpec,
    pub robot: RobotSpec,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub params: Params,
}

fn default_true() -> bool {
    true
}

fn default_tick() -> f64 {
    0.1
}

fn read_pgm(path: &Path) -> Result<Vec<String>, ScenarioError> {
    let img = image::open(path)
        .map_err(|e| invalid("map.image", format!("{}: {e}", path.display())))?
        .to_luma8();
    Ok(img
        .rows()
        .map(|row| row.map(|p| if p.0[0] < 128 { '#' } else { '.' }).collect())
        .collect())
}

impl Scenario {
    /// Parses and validates a scenario. An image map is read relative to
    /// `base_dir` and converted to rows so the scenario is self-contained.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if let Some(rel) = s.map.image.take() {
            let path = match base_dir {
                Some(dir) if rel.is_relative() => dir.join(&rel),
                _ => rel,
            };
            s.map.rows = Some(read_pgm(&path)?);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Scenario::from_toml_str(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.tick).round() as usize
    }

    pub fn robot_pose(&self) -> Pose {
        let [x, y, h] = self.robot.pose;
        Pose::new(x, y, h)
    }

    pub fn agent_scripts(&self) -> Vec<AgentScript> {
        self.agents.iter().map(AgentSpec::script).collect()
    }

    pub fn build_map(&self) -> Result<StaticMap, ScenarioError> {
        let m = &self.map;
        let mut map = match (&m.rows, m.width, m.height) {
            (Some(rows), None, None) => StaticMap::from_rows(m.resolution, m.origin, rows),
            (None, Some(w), Some(h)) => StaticMap::empty(m.resolution, m.origin, w, h),
            (Some(_), _, _) => return Err(invalid("map", "give either rows/image or width and height, not both")),
            _ => return Err(invalid("map", "one of rows, image, or width and height is required")),
        }
        .map_err(|e| invalid("map", e.to_string()))?;
        if m.border {
            map.add_border();
        }
        for w in &m.walls {
            map.fill_rect(
                Point::new(w[0].min(w[2]), w[1].min(w[3])),
                Point::new(w[0].max(w[2]), w[1].max(w[3])),
            );
        }
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        if self.duration <= 0.0 || !self.duration.is_finite() {
            return Err(invalid("duration", "must be positive"));
        }
        if self.tick.is_nan() || self.tick <= 0.0 || self.tick > self.duration {
            return Err(invalid("tick", "must be positive and at most the duration"));
        }
        if self.map.resolution.is_nan() || self.map.resolution <= 0.0 {
            return Err(invalid("map.resolution", "must be positive"));
        }
        let map = self.build_map()?;
        let frame = map.frame();
        let pose = self.robot_pose();
        if !frame.contains_point(&pose.position) {
            return Err(invalid("robot.pose", "outside the map"));
        }
        if let Some(g) = &self.robot.goal {
            if !frame.contains_point(g) {
                return Err(invalid("robot.goal", "outside the map"));
            }
        }
        if self.robot.footprint_radius.is_nan() || self.robot.footprint_radius <= 0.0 {
            return Err(invalid("robot.footprint_radius", "must be positive"));
        }
        let mut ids: Vec<u32> = self.agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("agents.id", "ids must be unique"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.script()
                .validate()
                .map_err(|e| invalid(format!("agents[{i}]"), e.to_string()))?;
            if a.waypoints
                .iter()
                .any(|w| !frame.contains_point(&Point::new(w[0], w[1])))
            {
                return Err(invalid(format!("agents[{i}].waypoints"), "outside the map"));
            }
        }
        self.validate_params()
    }

    fn validate_params(&self) -> Result<(), ScenarioError> {
        let p = &self.params;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("params.{field}"), "must be positive"))
            }
        };
        positive("sensor.max_range", p.sensor.max_range)?;
        if p.sensor.beam_count == 0 {
            return Err(invalid("params.sensor.beam_count", "must be at least 1"));
        }
        if p.tsdf.truncation_cells <= 1.0 {
            return Err(invalid("params.tsdf.truncation_cells", "must exceed one cell"));
        }
        positive("tsdf.weight_new", p.tsdf.weight_new)?;
        positive("track.cluster_radius", p.track.cluster_radius)?;
        positive("track.match_threshold", p.track.match_threshold)?;
        positive("field.d0", p.field.d0)?;
        positive("field.horizon", p.field.horizon)?;
        positive("field.window", p.field.window)?;
        positive("field.r_goal", p.field.r_goal)?;
        if p.avoid.n_samples == 0 {
            return Err(invalid("params.avoid.n_samples", "must be at least 1"));
        }
        positive("pilot.d_conflict", p.pilot.d_conflict)?;
        positive("pilot.horizon", p.pilot.horizon)?;
        positive("pilot.prediction_step", p.pilot.prediction_step)?;
        positive("pilot.arrive_tolerance", p.pilot.arrive_tolerance)?;
        positive("robot.v_max", p.robot.v_max)?;
        positive("robot.omega_max", p.robot.omega_max)?;
        positive("run.deadlock_window", p.run.deadlock_window)?;
        Ok(())
    }
}

/// Scenario files shipped with the crate.
pub const BUNDLED: &[(&str, &str)] = &[
    ("stationary_yield", include_str!("../scenarios/stationary_yield.toml")),
    ("corridor_retreat", include_str!("../scenarios/corridor_retreat.toml")),
    ("corridor_baseline", include_str!("../scenarios/corridor_baseline.toml")),
    ("multi_agent_field", include_str!("../scenarios/multi_agent_field.toml")),
    (
        "static_only_sanity",
        include_str!("../scenarios/static_only_sanity.toml"),
    ),
    (
        "crossing_stationary",
        include_str!("../scenarios/crossing_stationary.toml"),
    ),
    ("crossing_moving", include_str!("../scenarios/crossing_moving.toml")),
];

pub fn bundled(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
    Scenario::from_toml_str(text, None)
}
