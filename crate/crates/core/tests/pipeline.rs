use yieldnav::geometry::Point;
use yieldnav::metrics::compute_metrics;
use yieldnav::pilot::{Mode, SavedContext};
use yieldnav::render::{mode_color, render_trajectory, Canvas};
use yieldnav::runner::run_scenario;
use yieldnav::scenario::{bundled, Scenario, ScenarioError, BUNDLED};
use yieldnav::trace::{RunTrace, TraceError};

fn run(name: &str) -> RunTrace {
    let s = bundled(name).unwrap();
    run_scenario(&s, s.avoidance_enabled).unwrap()
}

#[test]
fn bundled_scenarios_round_trip_through_toml() {
    for (name, _) in BUNDLED {
        let s = bundled(name).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml(), None).unwrap();
        assert_eq!(s, again, "{name}");
    }
}

#[test]
fn serialized_scenario_lists_every_default_parameter() {
    let text = bundled("static_only_sanity").unwrap().to_toml();
    for key in [
        "beam_count",
        "range_noise",
        "truncation_cells",
        "free_frames",
        "cluster_radius",
        "match_threshold",
        "confirm_hits",
        "alpha",
        "beta",
        "d0",
        "threshold",
        "horizon",
        "margin",
        "r_goal",
        "n_samples",
        "safety",
        "hysteresis",
        "d_conflict",
        "t_clear",
        "allow_reverse",
        "v_max",
        "omega_max",
        "no_feasible_tolerance",
        "deadlock_window",
    ] {
        assert!(text.contains(&format!("{key} = ")), "missing {key}");
    }
}

#[test]
fn unknown_parameter_is_a_schema_error() {
    let source = BUNDLED.iter().find(|(n, _)| *n == "crossing_stationary").unwrap().1;
    let text = format!("{source}\n[params.pilot]\nd_confilct = 1.0\n");
    let err = Scenario::from_toml_str(&text, None).unwrap_err();
    assert!(
        matches!(err, ScenarioError::Parse(ref m) if m.contains("d_confilct")),
        "{err}"
    );
}

#[test]
fn trace_round_trips_and_replays_to_identical_metrics() {
    let trace = run("stationary_yield");
    let text = trace.to_jsonl();
    let back = RunTrace::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back, trace);
    assert_eq!(compute_metrics(&back.header, &back.ticks), trace.metrics);
    assert_eq!(
        compute_metrics(&back.header, &back.ticks),
        compute_metrics(&back.header, &back.ticks)
    );
    assert_eq!(trace.ticks.len(), trace.header.scenario.ticks());
}

#[test]
fn trace_reader_rejects_out_of_order_ticks() {
    let trace = run("static_only_sanity");
    let text = trace.to_jsonl();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    let err = RunTrace::read_jsonl(lines.join("\n").as_bytes()).unwrap_err();
    assert!(matches!(err, TraceError::Malformed { line: 3, .. }), "{err}");
}

#[test]
fn metrics_collision_count_matches_separation() {
    for name in ["corridor_retreat", "corridor_baseline", "multi_agent_field"] {
        let trace = run(name);
        let footprint = trace.header.scenario.robot.footprint_radius;
        let radius = trace.header.scenario.agents[0].radius;
        let sep = trace.metrics.min_separation.unwrap();
        assert!(sep >= 0.0);
        assert_eq!(trace.metrics.collisions == 0, sep >= footprint + radius, "{name}");
    }
}

#[test]
fn stationary_plot_shows_excursion_and_return() {
    let trace = run("stationary_yield");
    let image = render_trajectory(&trace).unwrap();
    let map = trace.header.scenario.build_map().unwrap();
    let canvas = Canvas::of_map(&map);
    let saved = trace
        .ticks
        .iter()
        .find_map(|t| match t.saved_context {
            Some(SavedContext::Pose { pose }) => Some(pose.position),
            _ => None,
        })
        .unwrap();

    let bbox_of = |mode: Mode| -> Option<(Point, Point)> {
        let color = mode_color(mode);
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y, px) in image.enumerate_pixels() {
            if *px == color {
                let w = canvas.world(x, y);
                lo = Point::new(lo.x.min(w.x), lo.y.min(w.y));
                hi = Point::new(hi.x.max(w.x), hi.y.max(w.y));
            }
        }
        lo.x.is_finite().then_some((lo, hi))
    };
    let near = |(lo, hi): (Point, Point), p: &Point, slack: f64| {
        p.x >= lo.x - slack && p.x <= hi.x + slack && p.y >= lo.y - slack && p.y <= hi.y + slack
    };

    let out = bbox_of(Mode::Avoiding).expect("avoiding path drawn");
    let back = bbox_of(Mode::Recovering).expect("recovering path drawn");
    let excursion = (out.1.x - out.0.x).max(out.1.y - out.0.y);
    assert!(excursion >= 0.5, "excursion {excursion}");
    assert!(near(out, &saved, 0.1), "avoiding path starts at the saved pose");
    assert!(near(back, &saved, 0.2), "recovering path ends at the saved pose");
    let last = trace.ticks.last().unwrap().robot.position;
    assert!((last - saved).norm() < 0.15);
}

#[test]
fn avoidance_disabled_never_leaves_base_modes() {
    let trace = run("corridor_baseline");
    assert!(trace
        .ticks
        .iter()
        .all(|t| matches!(t.mode, Mode::Idle | Mode::Navigating)));
    assert!(trace.ticks.iter().all(|t| t.decision.is_none()));
}
