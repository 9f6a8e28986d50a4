//! Deterministic planar world: static occupancy, scripted pedestrians, a
//! unicycle robot and a 2D range sensor with pose jitter.

use crate::geometry::{wrap_angle, Cell, GridFrame, Point, Pose, Vector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("agent {id}: {reason}")]
    InvalidAgent { id: u32, reason: String },
    #[error("map: {0}")]
    InvalidMap(String),
}

/// Boolean occupancy on a fixed lattice. Immutable for the duration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticMap {
    frame: GridFrame,
    occupied: Vec<bool>,
}

impl StaticMap {
    pub fn empty(resolution: f64, origin: Point, width: usize, height: usize) -> Result<Self, WorldError> {
        if resolution <= 0.0 || !resolution.is_finite() {
            return Err(WorldError::InvalidMap("resolution must be positive".into()));
        }
        if width == 0 || height == 0 {
            return Err(WorldError::InvalidMap("grid must be at least 1x1".into()));
        }
        let frame = GridFrame::new(resolution, origin, width, height);
        Ok(StaticMap {
            occupied: vec![false; frame.len()],
            frame,
        })
    }

    /// Builds a map from text rows, `#` occupied and anything else free. The
    /// first row is the top of the map (largest y).
    pub fn from_rows(resolution: f64, origin: Point, rows: &[String]) -> Result<Self, WorldError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0);
        if rows.iter().any(|r| r.chars().count() != width) {
            return Err(WorldError::InvalidMap("rows must all have the same length".into()));
        }
        let mut map = StaticMap::empty(resolution, origin, width, height)?;
        for (r, row) in rows.iter().enumerate() {
            let y = (height - 1 - r) as i64;
            for (x, ch) in row.chars().enumerate() {
                if ch == '#' {
                    map.set(Cell::new(x as i64, y), true);
                }
            }
        }
        Ok(map)
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn set(&mut self, c: Cell, occupied: bool) {
        if let Some(i) = self.frame.index(c) {
            self.occupied[i] = occupied;
        }
    }

    /// Marks every cell whose center lies in the closed rectangle.
    pub fn fill_rect(&mut self, min: Point, max: Point) {
        let cells: Vec<Cell> = self
            .frame
            .cells()
            .filter(|c| {
                let p = self.frame.center(*c);
                p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y
            })
            .collect();
        for c in cells {
            self.set(c, true);
        }
    }

    /// Occupies the outermost ring of cells.
    pub fn add_border(&mut self) {
        let f = self.frame;
        for c in f.cells().collect::<Vec<_>>() {
            let ix = c.x - f.min.x;
            let iy = c.y - f.min.y;
            if ix == 0 || iy == 0 || ix == f.width as i64 - 1 || iy == f.height as i64 - 1 {
                self.set(c, true);
            }
        }
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.frame.index(c).map(|i| self.occupied[i]).unwrap_or(false)
    }

    /// Unknown space beyond the map edge counts as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        self.frame.index(c).map(|i| self.occupied[i]).unwrap_or(true)
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.frame
            .cells()
            .zip(self.occupied.iter())
            .filter_map(|(c, &o)| o.then_some(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    /// Restart from the first waypoint after the last one.
    Loop,
    /// Leave the world after the last waypoint.
    Once,
    /// Stay at the last waypoint.
    HoldAtEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Point,
    pub time: f64,
}

/// A disc-shaped pedestrian following timed waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentScript {
    pub id: u32,
    pub radius: f64,
    pub waypoints: Vec<Waypoint>,
    pub behavior: Behavior,
}

impl AgentScript {
    pub fn validate(&self) -> Result<(), WorldError> {
        let err = |reason: &str| WorldError::InvalidAgent {
            id: self.id,
            reason: reason.to_string(),
        };
        if self.radius <= 0.0 || !self.radius.is_finite() {
            return Err(err("radius must be positive"));
        }
        if self.waypoints.is_empty() {
            return Err(err("at least one waypoint is required"));
        }
        for w in &self.waypoints {
            if !w.position.x.is_finite() || !w.position.y.is_finite() || !w.time.is_finite() {
                return Err(err("waypoints must be finite"));
            }
        }
        if self.waypoints.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(err("arrival times must be strictly increasing"));
        }
        if self.behavior == Behavior::Loop && self.waypoints.len() < 2 {
            return Err(err("a looping script needs two waypoints"));
        }
        Ok(())
    }

    /// Scripted position at time `t`, or `None` once a `once` script is over.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        let first = self.waypoints.first()?;
        let last = self.waypoints.last()?;
        let mut t = t;
        if t >= last.time {
            match self.behavior {
                Behavior::HoldAtEnd => return Some(last.position),
                Behavior::Once => {
                    return if t == last.time { Some(last.position) } else { None };
                }
                Behavior::Loop => {
                    let period = last.time - first.time;
                    t = first.time + (t - first.time).rem_euclid(period);
                }
            }
        }
        if t <= first.time {
            return Some(first.position);
        }
        let seg = self.waypoints.windows(2).find(|w| t <= w[1].time)?;
        let (a, b) = (seg[0], seg[1]);
        let s = (t - a.time) / (b.time - a.time);
        Some(a.position + (b.position - a.position) * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        RobotLimits {
            v_max: 1.0,
            omega_max: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Point,
    /// Radians in (-π, π].
    pub heading: f64,
    /// Signed; negative drives backwards.
    pub linear_velocity: f64,
    pub angular_velocity: f64,
    pub footprint_radius: f64,
}

impl RobotState {
    pub fn at(pose: Pose, footprint_radius: f64) -> Self {
        RobotState {
            position: pose.position,
            heading: wrap_angle(pose.heading),
            linear_velocity: 0.0,
            angular_velocity: 0.0,
            footprint_radius,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            heading: self.heading,
        }
    }

    /// Applies a velocity command clamped to the limits.
    pub fn command(&mut self, cmd: VelocityCommand, limits: &RobotLimits) {
        self.linear_velocity = cmd.linear.clamp(-limits.v_max, limits.v_max);
        self.angular_velocity = cmd.angular.clamp(-limits.omega_max, limits.omega_max);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub linear: f64,
    pub angular: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand {
        linear: 0.0,
        angular: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub script: AgentScript,
    /// `None` when the agent has left the world.
    pub position: Option<Point>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub time: f64,
    pub map: Arc<StaticMap>,
    pub agents: Vec<Agent>,
    pub robot: RobotState,
    pub limits: RobotLimits,
}

impl World {
    pub fn new(map: Arc<StaticMap>, agents: Vec<AgentScript>, robot: RobotState, limits: RobotLimits) -> Self {
        let agents = agents
            .into_iter()
            .map(|script| Agent {
                position: script.position_at(0.0),
                script,
            })
            .collect();
        World {
            time: 0.0,
            map,
            agents,
            robot,
            limits,
        }
    }

    /// Advances agents along their scripts and the robot by unicycle
    /// kinematics under its current commanded velocities.
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0, "dt must be positive");
        let r = &mut self.robot;
        r.linear_velocity = r.linear_velocity.clamp(-self.limits.v_max, self.limits.v_max);
        r.angular_velocity = r.angular_velocity.clamp(-self.limits.omega_max, self.limits.omega_max);
        r.position += Vector::new(r.heading.cos(), r.heading.sin()) * (r.linear_velocity * dt);
        r.heading = wrap_angle(r.heading + r.angular_velocity * dt);

        self.time += dt;
        for a in &mut self.agents {
            a.position = a.script.position_at(self.time);
        }
    }
}

/// What a sensor return hit, recorded for offline evaluation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitSource {
    Static,
    Agent(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub beam_count: usize,
    pub max_range: f64,
    /// Standard deviation of additive range noise (m).
    pub range_noise: f64,
    /// Standard deviation of sensor-pose jitter on x and y (m).
    pub jitter_xy: f64,
    /// Standard deviation of sensor-pose jitter on heading (rad).
    pub jitter_heading: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            beam_count: 720,
            max_range: 12.0,
            range_noise: 0.01,
            jitter_xy: 0.01,
            jitter_heading: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub timestamp: f64,
    /// Pose the rays were cast from: ground truth plus jitter.
    pub sensor_pose: Pose,
    pub points: Vec<Point>,
    /// Ground truth for each entry of `points`.
    pub provenance: Vec<HitSource>,
    pub max_range: f64,
    pub beam_count: usize,
}

fn ray_disc(origin: &Point, dir: &Vector, center: &Point, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    if c <= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t > 0.0).then_some(t)
}

fn ray_static(map: &StaticMap, origin: &Point, dir: &Vector, max_range: f64) -> Option<f64> {
    let end = origin + dir * max_range;
    let mut walk = map.frame().walk(origin, &end);
    let (first, _) = walk.next()?;
    if map.is_occupied(first) {
        return None;
    }
    walk.find(|(c, _)| map.is_occupied(*c)).map(|(_, t)| t * max_range)
}

/// Casts `beam_count` beams uniformly over a full turn from the jittered
/// robot pose. Each beam returns its nearest intersection with static cells or
/// agent discs plus range noise; beams with no hit inside `max_range` return
/// nothing.
pub fn cast_scan<R: Rng>(world: &World, params: &SensorParams, rng: &mut R) -> SensorFrame {
    assert!(params.beam_count >= 1 && params.max_range > 0.0);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let jx = normal() * params.jitter_xy;
    let jy = normal() * params.jitter_xy;
    let jh = normal() * params.jitter_heading;
    let sensor_pose = Pose {
        position: world.robot.position + Vector::new(jx, jy),
        heading: wrap_angle(world.robot.heading + jh),
    };
    let origin = sensor_pose.position;

    let mut points = Vec::with_capacity(params.beam_count);
    let mut provenance = Vec::with_capacity(params.beam_count);
    for i in 0..params.beam_count {
        let noise = normal() * params.range_noise;
        let angle = sensor_pose.heading + 2.0 * PI * i as f64 / params.beam_count as f64;
        let dir = Vector::new(angle.cos(), angle.sin());

        let mut best: Option<(f64, HitSource)> =
            ray_static(&world.map, &origin, &dir, params.max_range).map(|d| (d, HitSource::Static));
        for a in &world.agents {
            if let Some(center) = a.position {
                if let Some(d) = ray_disc(&origin, &dir, &center, a.script.radius) {
                    if d <= params.max_range && best.is_none_or(|(b, _)| d < b) {
                        best = Some((d, HitSource::Agent(a.script.id)));
                    }
                }
            }
        }
        if let Some((d, src)) = best {
            let measured = d + noise;
            if measured > 0.0 && measured <= params.max_range {
                points.push(origin + dir * measured);
                provenance.push(src);
            }
        }
    }
    SensorFrame {
        timestamp: world.time,
        sensor_pose,
        points,
        provenance,
        max_range: params.max_range,
        beam_count: params.beam_count,
    }
}
