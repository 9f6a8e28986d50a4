//! Closed-loop execution of a scenario: sense, detect, track, assess risk,
//! transition, plan and act once per tick, recording a trace.

use crate::avoid::{select_avoidance_point, AvoidError, AvoidanceDecision, CandidateSource};
use crate::detect::{DetectError, TsdfGrid};
use crate::field::{
    build_potential, choose_local_goal, static_obstacle, sweep_dilate, FieldError, FieldParams, InflatedObstacle,
    PotentialMap,
};
use crate::geometry::{GridFrame, Point};
use crate::metrics::compute_metrics;
use crate::pilot::{
    assess_risk, follow, plan_local, transition, LocalPlan, Mode, PilotState, PlanError, RiskAssessment, SavedContext,
};
use crate::scenario::{Params, Scenario, ScenarioError};
use crate::trace::{AgentSample, DetectionStats, RunTrace, TickRecord, TraceHeader, TRACE_VERSION};
use crate::track::{cluster_points, Track, TrackSnapshot, Tracker};
use crate::world::{cast_scan, HitSource, RobotState, StaticMap, VelocityCommand, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("detection: {0}")]
    Detect(#[from] DetectError),
    #[error("potential field: {0}")]
    Field(#[from] FieldError),
}

/// Robot-centered potential map together with the obstacles it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalField {
    pub goal: Point,
    pub obstacles: Vec<InflatedObstacle>,
    pub map: PotentialMap,
}

fn project_into(window: &GridFrame, p: &Point) -> Point {
    let lo = window.min_corner();
    let hi = window.max_corner();
    let inset = window.resolution * 0.5;
    Point::new(
        p.x.clamp(lo.x + inset, hi.x - inset),
        p.y.clamp(lo.y + inset, hi.y - inset),
    )
}

/// Attractive goal of the local map: the saved navigation goal (projected
/// onto the window when it lies outside), or a retreat point away from the
/// offending tracks when the robot was idle.
pub fn local_goal(
    context: &SavedContext,
    robot: &Point,
    tracks: &[Track],
    offending: &[u64],
    map: &StaticMap,
    window: &GridFrame,
    field: &FieldParams,
) -> Point {
    match context {
        SavedContext::Goal { goal } => project_into(window, goal),
        SavedContext::Pose { .. } => {
            let mut chosen: Vec<&Track> = tracks.iter().filter(|t| offending.contains(&t.id)).collect();
            if chosen.is_empty() {
                chosen = tracks.iter().collect();
            }
            if chosen.is_empty() {
                return *robot;
            }
            project_into(window, &choose_local_goal(robot, &chosen, map, field.r_goal))
        }
    }
}

/// Builds the local potential map the pilot plans over while avoiding.
pub fn build_local_field(
    map: &StaticMap,
    robot: &RobotState,
    tracks: &[Track],
    offending: &[u64],
    context: &SavedContext,
    params: &Params,
) -> Result<LocalField, FieldError> {
    let window = map.frame().window_around(&robot.position, params.field.window);
    let mut obstacles = vec![static_obstacle(map, &window, robot.footprint_radius)];
    for t in tracks {
        obstacles.push(sweep_dilate(
            t,
            params.field.horizon,
            params.pilot.prediction_step,
            params.field.margin,
            robot.footprint_radius,
            &window,
        ));
    }
    let goal = local_goal(context, &robot.position, tracks, offending, map, &window, &params.field);
    let potential = build_potential(&window, &obstacles, goal, &params.field)?;
    Ok(LocalField {
        goal,
        obstacles,
        map: potential,
    })
}

/// Static-only map over the whole scenario used for navigation routes.
pub fn navigation_map(map: &StaticMap, footprint_radius: f64, field: &FieldParams) -> Result<PotentialMap, FieldError> {
    let frame = *map.frame();
    let params = FieldParams { alpha: 0.0, ..*field };
    let goal = frame.center(frame.cell_at(0));
    build_potential(&frame, &[static_obstacle(map, &frame, footprint_radius)], goal, &params)
}

/// Rebuilds the local field of a recorded avoidance tick.
pub fn field_from_record(scenario: &Scenario, record: &TickRecord) -> Result<Option<LocalField>, RunError> {
    let Some(ctx) = record.saved_context else {
        return Ok(None);
    };
    if record.decision.is_none() {
        return Ok(None);
    }
    let map = scenario.build_map()?;
    let tracks = confirmed_from_snapshots(&record.tracks, scenario.params.track.confirm_hits);
    Ok(Some(build_local_field(
        &map,
        &record.robot,
        &tracks,
        &record.risk.offending,
        &ctx,
        &scenario.params,
    )?))
}

pub fn confirmed_from_snapshots(snapshots: &[TrackSnapshot], confirm_hits: u32) -> Vec<Track> {
    snapshots
        .iter()
        .filter(|s| s.hits >= confirm_hits)
        .map(TrackSnapshot::to_track)
        .collect()
}

/// One scenario execution, advanced tick by tick.
pub struct Runner {
    scenario: Scenario,
    params: Params,
    map: Arc<StaticMap>,
    nav_map: PotentialMap,
    world: World,
    sensor_rng: ChaCha8Rng,
    decision_rng: ChaCha8Rng,
    tsdf: TsdfGrid,
    tracker: Tracker,
    pilot: PilotState,
    tick: usize,
    last_field: Option<LocalField>,
}

impl Runner {
    pub fn new(scenario: Scenario) -> Result<Runner, RunError> {
        scenario.validate()?;
        let params = scenario.params;
        let map = Arc::new(scenario.build_map()?);
        let robot = RobotState::at(scenario.robot_pose(), scenario.robot.footprint_radius);
        let nav_map = navigation_map(&map, robot.footprint_radius, &params.field)?;
        let world = World::new(map.clone(), scenario.agent_scripts(), robot, params.robot);
        let sensor_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let mut decision_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        decision_rng.set_stream(1);
        let tsdf = TsdfGrid::new(*map.frame(), params.tsdf)?;
        let pilot = match scenario.robot.goal {
            Some(g) => PilotState::navigating(g),
            None => PilotState::idle(),
        };
        Ok(Runner {
            tracker: Tracker::new(params.track),
            scenario,
            params,
            map,
            nav_map,
            world,
            sensor_rng,
            decision_rng,
            tsdf,
            pilot,
            tick: 0,
            last_field: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn pilot(&self) -> &PilotState {
        &self.pilot
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn tsdf(&self) -> &TsdfGrid {
        &self.tsdf
    }

    /// Local field of the most recent avoidance tick.
    pub fn last_field(&self) -> Option<&LocalField> {
        self.last_field.as_ref()
    }

    pub fn finished(&self) -> bool {
        self.tick >= self.scenario.ticks()
    }

    fn route_to(&self, target: &Point) -> Option<LocalPlan> {
        let robot = &self.world.robot;
        match plan_local(
            &self.nav_map,
            robot,
            target,
            self.params.pilot.allow_reverse,
            &self.params.robot,
            self.params.pilot.potential_cost,
        ) {
            Ok(p) => Some(p),
            Err(PlanError::TargetInfeasible { .. }) | Err(PlanError::NoPath) => {
                let waypoints = vec![robot.position, *target];
                let (directions, speeds, turns) = crate::pilot::profile(
                    &waypoints,
                    robot.heading,
                    self.params.pilot.allow_reverse,
                    self.params.robot.v_max,
                );
                Some(LocalPlan {
                    waypoints,
                    directions,
                    speeds,
                    turns,
                })
            }
        }
    }

    fn watched_route(&self, state: &PilotState, nav_plan: Option<&LocalPlan>) -> Vec<Point> {
        let here = self.world.robot.position;
        match (state.mode, state.saved_context) {
            (Mode::Navigating, _) => nav_plan.map_or_else(|| vec![here], |p| p.waypoints.clone()),
            (_, Some(SavedContext::Goal { goal })) => self.route_to(&goal).map_or_else(|| vec![here], |p| p.waypoints),
            (_, Some(SavedContext::Pose { pose })) => vec![here, pose.position],
            _ => vec![here],
        }
    }

    /// Runs one tick and returns its record.
    pub fn step(&mut self) -> Result<TickRecord, RunError> {
        let dt = self.scenario.tick;
        let params = self.params;
        let time = self.world.time;

        let frame = cast_scan(&self.world, &params.sensor, &mut self.sensor_rng);
        let dynamic = self.tsdf.label_dynamic(&frame);
        self.tsdf.integrate_frame(&frame)?;
        self.tsdf.refresh_free_space();
        let detection = DetectionStats {
            scan_points: frame.points.len(),
            dynamic_points: dynamic.points.len(),
            dynamic_from_agents: dynamic
                .indices
                .iter()
                .filter(|&&i| matches!(frame.provenance[i], HitSource::Agent(_)))
                .count(),
            agent_points: frame
                .provenance
                .iter()
                .filter(|h| matches!(h, HitSource::Agent(_)))
                .count(),
        };

        let clusters = cluster_points(&dynamic.points, params.track.cluster_radius, params.track.min_points);
        self.tracker.step(&clusters, dt);
        let confirmed: Vec<Track> = self.tracker.confirmed().cloned().collect();

        let nav_plan = match (self.pilot.mode, self.pilot.nav_goal) {
            (Mode::Navigating, Some(goal)) => self.route_to(&goal),
            _ => None,
        };
        let risk = if self.scenario.avoidance_enabled {
            let route = self.watched_route(&self.pilot, nav_plan.as_ref());
            let refs: Vec<&Track> = confirmed.iter().collect();
            assess_risk(
                &route,
                &refs,
                params.pilot.horizon,
                params.pilot.prediction_step,
                params.pilot.d_conflict,
            )
        } else {
            RiskAssessment {
                risk: false,
                offending: Vec::new(),
            }
        };

        let mut next = transition(&self.pilot, risk.risk, &self.world.robot, dt, &params.pilot);
        let mut decision: Option<AvoidanceDecision> = None;
        let mut local_goal = None;
        let mut no_feasible = false;
        let mut plan: Option<LocalPlan> = None;

        match next.mode {
            Mode::Idle => {}
            Mode::Navigating => {
                plan = match (self.pilot.mode, next.nav_goal) {
                    (Mode::Navigating, _) => nav_plan,
                    (_, Some(goal)) => self.route_to(&goal),
                    _ => None,
                };
            }
            Mode::Avoiding => {
                let ctx = next.saved_context.expect("avoiding always holds a context");
                let field =
                    build_local_field(&self.map, &self.world.robot, &confirmed, &risk.offending, &ctx, &params)?;
                local_goal = Some(field.goal);
                let source = CandidateSource::Sampled {
                    n: params.avoid.n_samples,
                    seed: self.decision_rng.random(),
                };
                let x_start = self.world.robot.position;
                match select_avoidance_point(
                    &field.map,
                    &x_start,
                    self.pilot.active_avoidance_point.as_ref(),
                    &params.avoid.weights,
                    source,
                ) {
                    Ok(d) => {
                        next.active_avoidance_point = Some(d.selected.point);
                        plan = plan_local(
                            &field.map,
                            &self.world.robot,
                            &d.selected.point,
                            params.pilot.allow_reverse,
                            &params.robot,
                            params.pilot.potential_cost,
                        )
                        .ok();
                        decision = Some(d);
                    }
                    Err(AvoidError::NoFeasiblePoint) => {
                        no_feasible = true;
                        next.active_avoidance_point = self.pilot.active_avoidance_point;
                    }
                }
                self.last_field = Some(field);
            }
            Mode::Recovering => {
                let target = next.saved_context.expect("recovering always holds a context").target();
                plan = self.route_to(&target);
            }
        }

        let command = match &plan {
            Some(p) => follow(p, &self.world.robot, 0, &params.robot, &params.pilot).command,
            None => VelocityCommand::ZERO,
        };
        self.pilot = next;

        let record = TickRecord {
            tick: self.tick,
            time,
            robot: self.world.robot,
            agents: self
                .world
                .agents
                .iter()
                .filter_map(|a| {
                    a.position.map(|p| AgentSample {
                        id: a.script.id,
                        position: p,
                        radius: a.script.radius,
                    })
                })
                .collect(),
            detection,
            tracks: self.tracker.tracks().iter().map(TrackSnapshot::from).collect(),
            risk,
            mode: self.pilot.mode,
            saved_context: self.pilot.saved_context,
            clear_timer: self.pilot.clear_timer,
            active_avoidance_point: self.pilot.active_avoidance_point,
            nav_goal: self.pilot.nav_goal,
            local_goal,
            decision,
            no_feasible,
            plan,
            command,
        };

        self.world.robot.command(command, &params.robot);
        self.world.step(dt);
        self.tick += 1;
        Ok(record)
    }

    pub fn run(mut self) -> Result<RunTrace, RunError> {
        let mut ticks = Vec::with_capacity(self.scenario.ticks());
        while !self.finished() {
            ticks.push(self.step()?);
        }
        let header = TraceHeader {
            trace_version: TRACE_VERSION,
            scenario: self.scenario,
        };
        let metrics = compute_metrics(&header, &ticks);
        Ok(RunTrace { header, ticks, metrics })
    }
}

/// Runs a scenario to completion. With `avoidance_enabled` false the
/// conflict pipeline is bypassed.
pub fn run_scenario(scenario: &Scenario, avoidance_enabled: bool) -> Result<RunTrace, RunError> {
    let mut s = scenario.clone();
    s.avoidance_enabled = s.avoidance_enabled && avoidance_enabled;
    Runner::new(s)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY: &str = r#"
schema_version = 1
name = "empty"
duration = 2.0

[map]
resolution = 0.1
origin = [-3.0, -3.0]
width = 60
height = 60
border = true

[robot]
pose = [0.0, 0.0, 0.0]
"#;

    #[test]
    fn idle_without_agents_stays_idle() {
        let s = Scenario::from_toml_str(EMPTY, None).unwrap();
        let trace = run_scenario(&s, true).unwrap();
        assert_eq!(trace.ticks.len(), 20);
        assert!(trace.ticks.iter().all(|t| t.mode == Mode::Idle));
        assert_eq!(trace.metrics.collisions, 0);
        assert_eq!(trace.metrics.min_separation, None);
    }

    #[test]
    fn navigation_reaches_goal() {
        let text = EMPTY
            .replace("pose = [0.0, 0.0, 0.0]", "pose = [-1.5, 0.0, 0.0]\ngoal = [1.5, 1.0]")
            .replace("duration = 2.0", "duration = 8.0");
        let s = Scenario::from_toml_str(&text, None).unwrap();
        let trace = run_scenario(&s, true).unwrap();
        assert!(trace.metrics.task_time.is_some(), "{:?}", trace.metrics);
        assert_eq!(trace.ticks.last().unwrap().mode, Mode::Idle);
        assert!(!trace.metrics.deadlock);
    }

    #[test]
    fn project_keeps_inside_points() {
        let w = GridFrame::new(0.1, Point::origin(), 10, 10);
        let p = Point::new(0.33, 0.71);
        assert_eq!(project_into(&w, &p), p);
        let q = project_into(&w, &Point::new(5.0, 0.5));
        assert!(w.contains_point(&q));
        assert!((q.y - 0.5).abs() < 1e-12);
    }
}
