//! Conflict state machine and local motion: risk assessment against
//! predicted track paths, context saving, grid planning over the potential
//! map with optional reverse driving, and pure-pursuit plan following.

use crate::avoid::segment_escapes;
use crate::field::PotentialMap;
use crate::geometry::{point_segment_distance, wrap_angle, Cell, Point, Pose};
use crate::track::Track;
use crate::world::{RobotLimits, RobotState, VelocityCommand};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("target ({x:.3}, {y:.3}) is not a feasible cell of the map")]
    TargetInfeasible { x: f64, y: f64 },
    #[error("target is unreachable in the feasible mask")]
    NoPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotParams {
    /// Risk distance between a predicted track position and the watched route (m).
    pub d_conflict: f64,
    /// Risk prediction horizon (s).
    pub horizon: f64,
    /// Spacing of predicted track positions (s).
    pub prediction_step: f64,
    /// Risk-free time required before recovering (s).
    pub t_clear: f64,
    /// Arrival tolerance (m).
    pub arrive_tolerance: f64,
    /// Permit reverse driving instead of reorienting.
    pub allow_reverse: bool,
    /// Weight of the entered cell's potential in the planner step cost.
    pub potential_cost: f64,
    /// Pure-pursuit lookahead (m).
    pub lookahead: f64,
    /// Heading error above which the follower turns in place (rad).
    pub turn_in_place: f64,
    /// Proportional heading gain (1/s).
    pub heading_gain: f64,
    /// Linear speed per meter of remaining distance near the end of a plan (1/s).
    pub approach_gain: f64,
}

impl Default for PilotParams {
    fn default() -> Self {
        PilotParams {
            d_conflict: 0.8,
            horizon: 1.5,
            prediction_step: 0.1,
            t_clear: 1.0,
            arrive_tolerance: 0.15,
            allow_reverse: true,
            potential_cost: 0.002,
            lookahead: 0.3,
            turn_in_place: 0.6,
            heading_gain: 3.0,
            approach_gain: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Idle,
    Navigating,
    Avoiding,
    Recovering,
}

/// What the robot returns to once a conflict is over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SavedContext {
    /// Pose held when the conflict began while idle.
    Pose { pose: Pose },
    /// Navigation goal interrupted by the conflict.
    Goal { goal: Point },
}

impl SavedContext {
    pub fn target(&self) -> Point {
        match self {
            SavedContext::Pose { pose } => pose.position,
            SavedContext::Goal { goal } => *goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotState {
    pub mode: Mode,
    pub saved_context: Option<SavedContext>,
    pub clear_timer: f64,
    pub active_avoidance_point: Option<Point>,
    /// Goal pursued while Navigating.
    pub nav_goal: Option<Point>,
}

impl PilotState {
    pub fn idle() -> Self {
        PilotState {
            mode: Mode::Idle,
            saved_context: None,
            clear_timer: 0.0,
            active_avoidance_point: None,
            nav_goal: None,
        }
    }

    pub fn navigating(goal: Point) -> Self {
        PilotState {
            mode: Mode::Navigating,
            nav_goal: Some(goal),
            ..PilotState::idle()
        }
    }

    /// Context is held exactly while avoiding or recovering, and a navigation
    /// goal exactly while navigating.
    pub fn is_consistent(&self) -> bool {
        let conflict = matches!(self.mode, Mode::Avoiding | Mode::Recovering);
        conflict == self.saved_context.is_some()
            && (self.mode == Mode::Navigating) == self.nav_goal.is_some()
            && (self.mode == Mode::Avoiding || self.active_avoidance_point.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub risk: bool,
    pub offending: Vec<u64>,
}

fn distance_to_route(p: &Point, route: &[Point]) -> f64 {
    match route {
        [] => f64::INFINITY,
        [only] => (p - only).norm(),
        _ => route
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Flags every track whose current or predicted position over `horizon`
/// comes within `d_conflict` of the watched route: a single point for an
/// idle robot, the remaining planned polyline otherwise.
pub fn assess_risk(route: &[Point], tracks: &[&Track], horizon: f64, step: f64, d_conflict: f64) -> RiskAssessment {
    assert!(horizon > 0.0 && d_conflict > 0.0 && step > 0.0);
    let offending: Vec<u64> = tracks
        .iter()
        .filter(|t| {
            std::iter::once(t.position())
                .chain(t.predict_path(horizon, step))
                .any(|p| distance_to_route(&p, route) <= d_conflict)
        })
        .map(|t| t.id)
        .collect();
    RiskAssessment {
        risk: !offending.is_empty(),
        offending,
    }
}

/// Advances the state machine by one tick of length `dt`.
pub fn transition(state: &PilotState, risk: bool, robot: &RobotState, dt: f64, params: &PilotParams) -> PilotState {
    let mut next = state.clone();
    let arrived = |target: Point| (robot.position - target).norm() <= params.arrive_tolerance;
    match state.mode {
        Mode::Idle | Mode::Navigating if risk => {
            next.saved_context = Some(match state.nav_goal {
                Some(goal) if state.mode == Mode::Navigating => SavedContext::Goal { goal },
                _ => SavedContext::Pose { pose: robot.pose() },
            });
            next.mode = Mode::Avoiding;
            next.nav_goal = None;
            next.clear_timer = 0.0;
        }
        Mode::Idle => {}
        Mode::Navigating => {
            if state.nav_goal.is_none_or(arrived) {
                next.mode = Mode::Idle;
                next.nav_goal = None;
            }
        }
        Mode::Avoiding => {
            if risk {
                next.clear_timer = 0.0;
            } else {
                next.clear_timer += dt;
                if next.clear_timer >= params.t_clear - 1e-9 {
                    next.mode = Mode::Recovering;
                    next.active_avoidance_point = None;
                }
            }
        }
        Mode::Recovering => {
            if risk {
                next.mode = Mode::Avoiding;
                next.clear_timer = 0.0;
            } else if let Some(ctx) = state.saved_context {
                if arrived(ctx.target()) {
                    next.saved_context = None;
                    next.clear_timer = 0.0;
                    match ctx {
                        SavedContext::Pose { .. } => next.mode = Mode::Idle,
                        SavedContext::Goal { goal } => {
                            next.mode = Mode::Navigating;
                            next.nav_goal = Some(goal);
                        }
                    }
                }
            }
        }
    }
    if next.mode != Mode::Avoiding {
        next.active_avoidance_point = None;
    }
    next
}

/// A piecewise-linear motion plan. Segment `i` runs from `waypoints[i]` to
/// `waypoints[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPlan {
    pub waypoints: Vec<Point>,
    /// +1 forward, -1 reverse, per segment.
    pub directions: Vec<i8>,
    /// Speed bound per segment (m/s).
    pub speeds: Vec<f64>,
    /// In-place heading change before each segment (rad).
    pub turns: Vec<f64>,
}

impl LocalPlan {
    pub fn segment_count(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn target(&self) -> Point {
        *self.waypoints.last().expect("plans have at least one waypoint")
    }

    /// Time to drive the plan at its segment speeds, turning in place at
    /// `omega_max` wherever a heading change is required.
    pub fn execution_time(&self, omega_max: f64) -> f64 {
        (0..self.segment_count())
            .map(|i| {
                (self.waypoints[i + 1] - self.waypoints[i]).norm() / self.speeds[i] + self.turns[i].abs() / omega_max
            })
            .sum()
    }
}

#[derive(PartialEq)]
struct Queued(f64, usize);

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

fn step_allowed(map: &PotentialMap, from: Cell, to: Cell) -> bool {
    match (map.cell_feasible(from), map.cell_feasible(to)) {
        (_, true) => true,
        (true, false) => false,
        (false, false) => match (map.cell_clearance(from), map.cell_clearance(to)) {
            (Some(a), Some(b)) => b >= a,
            _ => false,
        },
    }
}

/// Cheapest 8-connected cell path from `start` to `goal`. Steps may not
/// enter the infeasible set from a feasible cell; inside it they may only
/// keep or gain clearance.
pub fn grid_path(map: &PotentialMap, start: Cell, goal: Cell, potential_cost: f64) -> Option<Vec<Cell>> {
    let f = &map.frame;
    let (s, g) = (f.index(start)?, f.index(goal)?);
    let mut cost = vec![f64::INFINITY; f.len()];
    let mut parent = vec![usize::MAX; f.len()];
    let mut heap = BinaryHeap::new();
    cost[s] = 0.0;
    heap.push(Queued(0.0, s));
    while let Some(Queued(c, i)) = heap.pop() {
        if c > cost[i] {
            continue;
        }
        if i == g {
            break;
        }
        let here = f.cell_at(i);
        for (dx, dy) in NEIGHBORS {
            let next = here.offset(dx, dy);
            let Some(j) = f.index(next) else { continue };
            if !step_allowed(map, here, next) {
                continue;
            }
            let len = if dx != 0 && dy != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            } * f.resolution;
            let nc = c + len + potential_cost * map.potential[j];
            if nc < cost[j] {
                cost[j] = nc;
                parent[j] = i;
                heap.push(Queued(nc, j));
            }
        }
    }
    if !cost[g].is_finite() {
        return None;
    }
    let mut path = vec![g];
    while *path.last().unwrap() != s {
        path.push(parent[*path.last().unwrap()]);
    }
    path.reverse();
    Some(path.into_iter().map(|i| f.cell_at(i)).collect())
}

fn heading_of(from: &Point, to: &Point) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// Assigns per-segment driving direction and the in-place turn each segment
/// needs, starting from `heading`.
pub fn profile(waypoints: &[Point], heading: f64, allow_reverse: bool, v_max: f64) -> (Vec<i8>, Vec<f64>, Vec<f64>) {
    let mut current = heading;
    let (mut dirs, mut speeds, mut turns) = (Vec::new(), Vec::new(), Vec::new());
    for w in waypoints.windows(2) {
        let along = heading_of(&w[0], &w[1]);
        let reverse = allow_reverse && wrap_angle(along - (current + PI)).abs() < FRAC_PI_2;
        let travel = if reverse { wrap_angle(along + PI) } else { along };
        turns.push(wrap_angle(travel - current));
        dirs.push(if reverse { -1 } else { 1 });
        speeds.push(v_max);
        current = travel;
    }
    (dirs, speeds, turns)
}

/// Plans from the robot to `target` over the feasible mask, decimates the
/// cell path to reachable waypoints, and attaches a direction profile.
pub fn plan_local(
    map: &PotentialMap,
    robot: &RobotState,
    target: &Point,
    allow_reverse: bool,
    limits: &RobotLimits,
    potential_cost: f64,
) -> Result<LocalPlan, PlanError> {
    if !map.is_feasible(target) {
        return Err(PlanError::TargetInfeasible {
            x: target.x,
            y: target.y,
        });
    }
    let f = &map.frame;
    let cells =
        grid_path(map, f.cell_of(&robot.position), f.cell_of(target), potential_cost).ok_or(PlanError::NoPath)?;
    let mut points: Vec<Point> = cells.iter().map(|c| f.center(*c)).collect();
    points[0] = robot.position;
    *points.last_mut().unwrap() = *target;

    let mut waypoints = vec![points[0]];
    let mut anchor = 0;
    while anchor + 1 < points.len() {
        let mut next = anchor + 1;
        for j in (anchor + 2..points.len()).rev() {
            if segment_escapes(map, &points[anchor], &points[j]) {
                next = j;
                break;
            }
        }
        waypoints.push(points[next]);
        anchor = next;
    }
    if waypoints.len() == 1 {
        waypoints.push(*target);
    }
    let (directions, speeds, turns) = profile(&waypoints, robot.heading, allow_reverse, limits.v_max);
    Ok(LocalPlan {
        waypoints,
        directions,
        speeds,
        turns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowOutput {
    pub command: VelocityCommand,
    pub arrived: bool,
    /// Segment being tracked.
    pub segment: usize,
}

fn project(p: &Point, a: &Point, b: &Point) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    (t, (p - (a + ab * t)).norm())
}

/// Pure pursuit along `plan` starting no earlier than segment `from_segment`.
pub fn follow(
    plan: &LocalPlan,
    robot: &RobotState,
    from_segment: usize,
    limits: &RobotLimits,
    params: &PilotParams,
) -> FollowOutput {
    let end = plan.target();
    let remaining = (end - robot.position).norm();
    let n = plan.segment_count();
    if remaining <= params.arrive_tolerance || n == 0 {
        return FollowOutput {
            command: VelocityCommand::ZERO,
            arrived: remaining <= params.arrive_tolerance,
            segment: n.saturating_sub(1),
        };
    }

    // Closest segment at or after the current one; later segments win ties.
    let first = from_segment.min(n - 1);
    let mut seg = first;
    let mut best = (f64::INFINITY, 0.0);
    for i in first..n {
        let (t, d) = project(&robot.position, &plan.waypoints[i], &plan.waypoints[i + 1]);
        if d <= best.0 + 1e-9 {
            best = (d, t);
            seg = i;
        }
    }
    let (mut i, mut t) = (seg, best.1);
    let mut budget = params.lookahead;
    let aim = loop {
        let (a, b) = (plan.waypoints[i], plan.waypoints[i + 1]);
        let rest = (b - a).norm() * (1.0 - t);
        if rest >= budget || i + 1 == n || plan.directions[i + 1] != plan.directions[seg] {
            let len = (b - a).norm();
            break if len > 0.0 {
                a + (b - a) * (t + budget.min(rest) / len)
            } else {
                b
            };
        }
        budget -= rest;
        i += 1;
        t = 0.0;
    };

    let sign = f64::from(plan.directions[seg]);
    let to = aim - robot.position;
    if to.norm() < 1e-9 {
        return FollowOutput {
            command: VelocityCommand::ZERO,
            arrived: false,
            segment: seg,
        };
    }
    let mut desired = to.y.atan2(to.x);
    if sign < 0.0 {
        desired = wrap_angle(desired + PI);
    }
    let err = wrap_angle(desired - robot.heading);
    let angular = (params.heading_gain * err).clamp(-limits.omega_max, limits.omega_max);
    let linear = if err.abs() > params.turn_in_place {
        0.0
    } else {
        sign * plan.speeds[seg].min(limits.v_max).min(params.approach_gain * remaining) * err.cos()
    };
    FollowOutput {
        command: VelocityCommand { linear, angular },
        arrived: false,
        segment: seg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_potential, FieldParams};
    use crate::geometry::GridFrame;
    use crate::track::{Cluster, TrackParams};

    fn track(id: u64, x: f64, y: f64, vx: f64, vy: f64) -> Track {
        let c = Cluster::from_points(vec![Point::new(x - 0.1, y - 0.1), Point::new(x + 0.1, y + 0.1)]).unwrap();
        let mut t = Track::spawn(id, &c, &TrackParams::default());
        t.state[2] = vx;
        t.state[3] = vy;
        t
    }

    fn open_map() -> PotentialMap {
        let w = GridFrame::new(0.1, Point::new(-4.0, -4.0), 80, 80);
        let p = FieldParams {
            alpha: 0.0,
            ..FieldParams::default()
        };
        build_potential(&w, &[], Point::origin(), &p).unwrap()
    }

    fn robot_at(x: f64, y: f64, h: f64) -> RobotState {
        RobotState::at(Pose::new(x, y, h), 0.25)
    }

    #[test]
    fn risk_examples() {
        let robot = [Point::origin()];
        let head_on = track(1, 2.0, 0.0, -1.0, 0.0);
        let r = assess_risk(&robot, &[&head_on], 1.5, 0.1, 0.8);
        assert!(r.risk);
        assert_eq!(r.offending, vec![1]);
        let parallel = track(2, -3.0, 2.0, 1.0, 0.0);
        assert!(!assess_risk(&robot, &[&parallel], 1.5, 0.1, 0.8).risk);
        assert!(!assess_risk(&robot, &[], 1.5, 0.1, 0.8).risk);
    }

    #[test]
    fn route_risk_watches_the_polyline() {
        let route = [Point::origin(), Point::new(5.0, 0.0)];
        let crossing = track(3, 3.0, 2.0, 0.0, -1.0);
        assert!(assess_risk(&route, &[&crossing], 1.5, 0.1, 0.8).risk);
        assert!(!assess_risk(&route[..1], &[&crossing], 1.5, 0.1, 0.8).risk);
    }

    #[test]
    fn stated_transitions() {
        let p = PilotParams::default();
        let robot = robot_at(1.0, 2.0, 0.3);
        let s = transition(&PilotState::idle(), true, &robot, 0.1, &p);
        assert_eq!(s.mode, Mode::Avoiding);
        assert_eq!(s.saved_context, Some(SavedContext::Pose { pose: robot.pose() }));

        let mut a = s.clone();
        for _ in 0..9 {
            a = transition(&a, false, &robot, 0.1, &p);
            assert_eq!(a.mode, Mode::Avoiding);
        }
        a = transition(&a, false, &robot, 0.1, &p);
        assert_eq!(a.mode, Mode::Recovering);

        let away = robot_at(1.5, 2.0, 0.0);
        assert_eq!(transition(&a, false, &away, 0.1, &p).mode, Mode::Recovering);
        let back = robot_at(1.1, 2.05, 0.0);
        let done = transition(&a, false, &back, 0.1, &p);
        assert_eq!(done.mode, Mode::Idle);
        assert!(done.saved_context.is_none());
        assert!(done.is_consistent());
    }

    #[test]
    fn goal_context_round_trip() {
        let p = PilotParams::default();
        let goal = Point::new(9.0, 0.0);
        let robot = robot_at(0.0, 0.0, 0.0);
        let s = transition(&PilotState::navigating(goal), true, &robot, 0.1, &p);
        assert_eq!(s.saved_context, Some(SavedContext::Goal { goal }));
        assert!(s.nav_goal.is_none() && s.is_consistent());
        let s = transition(&s, true, &robot, 0.1, &p);
        assert_eq!(s.clear_timer, 0.0);
        let mut r = s;
        for _ in 0..10 {
            r = transition(&r, false, &robot, 0.1, &p);
        }
        assert_eq!(r.mode, Mode::Recovering);
        let again = transition(&r, true, &robot, 0.1, &p);
        assert_eq!(again.mode, Mode::Avoiding);
        assert_eq!(again.saved_context, r.saved_context);
        let there = transition(&r, false, &robot_at(8.95, 0.0, 0.0), 0.1, &p);
        assert_eq!(there.mode, Mode::Navigating);
        assert_eq!(there.nav_goal, Some(goal));
        assert!(there.is_consistent());
    }

    #[test]
    fn reverse_relaxation() {
        let map = open_map();
        let robot = robot_at(0.05, 0.05, 0.0);
        let target = Point::new(-0.95, 0.05);
        let limits = RobotLimits::default();
        let relaxed = plan_local(&map, &robot, &target, true, &limits, 0.0).unwrap();
        assert_eq!(relaxed.segment_count(), 1);
        assert_eq!(relaxed.directions, vec![-1]);
        assert!(relaxed.turns[0].abs() < 1e-9);

        let strict = plan_local(&map, &robot, &target, false, &limits, 0.0).unwrap();
        assert_eq!(strict.directions, vec![1]);
        assert!((strict.turns[0].abs() - PI).abs() < 1e-9);
        assert!(relaxed.execution_time(limits.omega_max) < strict.execution_time(limits.omega_max));
    }

    #[test]
    fn open_map_path_is_near_straight() {
        let map = open_map();
        let limits = RobotLimits::default();
        for (tx, ty) in [(3.05, 1.25), (-2.55, 3.15), (0.35, -3.45), (2.95, 2.95)] {
            let robot = robot_at(0.05, 0.05, 0.0);
            let target = Point::new(tx, ty);
            let cells = grid_path(
                &map,
                map.frame.cell_of(&robot.position),
                map.frame.cell_of(&target),
                0.0,
            )
            .unwrap();
            let grid_len: f64 = cells
                .windows(2)
                .map(|w| (map.frame.center(w[1]) - map.frame.center(w[0])).norm())
                .sum();
            // Octile distance is the exact 8-connected optimum on an open grid.
            let (dx, dy) = ((tx - 0.05).abs() / 0.1, (ty - 0.05).abs() / 0.1);
            let octile = (dx.max(dy) - dx.min(dy) + std::f64::consts::SQRT_2 * dx.min(dy)) * 0.1;
            assert!((grid_len - octile).abs() < 1e-6);
            let plan = plan_local(&map, &robot, &target, true, &limits, 0.0).unwrap();
            let straight = (target - robot.position).norm();
            assert!(plan.length() <= straight * 1.08);
        }
    }

    #[test]
    fn relaxation_never_slows_plans() {
        let map = open_map();
        let limits = RobotLimits::default();
        for k in 0..24 {
            let a = k as f64 * PI / 12.0;
            let robot = robot_at(0.05, 0.05, 0.4);
            let target = Point::new(0.05 + 2.0 * a.cos(), 0.05 + 2.0 * a.sin());
            let r = plan_local(&map, &robot, &target, true, &limits, 0.0).unwrap();
            let s = plan_local(&map, &robot, &target, false, &limits, 0.0).unwrap();
            assert!(r.execution_time(limits.omega_max) <= s.execution_time(limits.omega_max) + 1e-9);
        }
    }

    #[test]
    fn follow_examples() {
        let p = PilotParams::default();
        let limits = RobotLimits::default();
        let plan = LocalPlan {
            waypoints: vec![Point::origin(), Point::new(-1.0, 0.0)],
            directions: vec![-1],
            speeds: vec![1.0],
            turns: vec![0.0],
        };
        let at_end = follow(&plan, &robot_at(-1.0, 0.0, 0.0), 0, &limits, &p);
        assert!(at_end.arrived);
        assert_eq!(at_end.command, VelocityCommand::ZERO);

        let out = follow(&plan, &robot_at(0.0, 0.1, 0.0), 0, &limits, &p);
        assert!(out.command.linear < 0.0);
        // The path lies below the tail; a counterclockwise turn swings the tail down.
        assert!(out.command.angular > 0.0);
    }

    #[test]
    fn closed_loop_corridor_tracking() {
        use crate::world::{StaticMap, World};
        use std::sync::Arc;
        let map = Arc::new(StaticMap::empty(0.1, Point::new(-1.0, -1.0), 120, 20).unwrap());
        let mut world = World::new(map, vec![], robot_at(0.0, 0.0, 0.0), RobotLimits::default());
        let plan = LocalPlan {
            waypoints: vec![Point::origin(), Point::new(5.0, 0.0), Point::new(9.0, 0.2)],
            directions: vec![1, 1],
            speeds: vec![1.0, 1.0],
            turns: vec![0.0, 0.0],
        };
        let p = PilotParams::default();
        let mut seg = 0;
        for _ in 0..300 {
            let out = follow(&plan, &world.robot, seg, &world.limits, &p);
            seg = out.segment;
            let err = distance_to_route(&world.robot.position, &plan.waypoints);
            assert!(err < 0.15, "tracking error {err}");
            if out.arrived {
                return;
            }
            world.robot.command(out.command, &world.limits);
            world.step(0.1);
        }
        panic!("never arrived");
    }
}
