use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_yieldnav");

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn yieldnav(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf, PathBuf) {
    let trace = dir.join(format!("{name}.jsonl"));
    let metrics = dir.join(format!("{name}.txt"));
    let scenario = scenario(name);
    let mut args = vec![
        "run",
        "--scenario",
        path(&scenario),
        "--trace",
        path(&trace),
        "--metrics",
        path(&metrics),
    ];
    args.extend_from_slice(extra);
    (yieldnav(&args), trace, metrics)
}

const NARROW: &str = r#"
schema_version = 1
name = "narrow"
duration = 10.0
seed = 3

[map]
resolution = 0.1
origin = [-1.0, -0.5]
width = 100
height = 10
border = true

[robot]
pose = [0.0, 0.0, 0.0]

[[agents]]
id = 1
behavior = "hold-at-end"
waypoints = [[7.5, 0.0, 1.0], [1.2, 0.0, 7.0]]
"#;

#[test]
fn run_writes_trace_and_metrics() {
    let dir = TempDir::new().unwrap();
    let (out, trace, metrics) = run_to(dir.path(), "stationary_yield", &["--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&metrics).unwrap();
    for key in [
        "ticks",
        "min_separation",
        "human_deviation",
        "task_time",
        "recovery_error",
        "collisions",
        "deadlock",
        "max_no_feasible",
        "mode_sequence",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{key} = "))),
            "missing {key}"
        );
    }
    assert_eq!(String::from_utf8_lossy(&out.stdout), text);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 300 + 2);
}

#[test]
fn seed_override_is_recorded() {
    let dir = TempDir::new().unwrap();
    let (out, trace, _) = run_to(dir.path(), "static_only_sanity", &["--seed", "99"]);
    assert!(out.status.success());
    let t = yieldnav::trace::RunTrace::load(&trace).unwrap();
    assert_eq!(t.header.scenario.seed, 99);
}

#[test]
fn schema_errors_exit_2_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let bad_version = dir.path().join("v.toml");
    std::fs::write(&bad_version, NARROW.replace("schema_version = 1", "schema_version = 9")).unwrap();
    let unknown_param = dir.path().join("p.toml");
    std::fs::write(&unknown_param, format!("{NARROW}\n[params.field]\nthreshhold = 80.0\n")).unwrap();
    let outside = dir.path().join("o.toml");
    std::fs::write(
        &outside,
        NARROW.replace("pose = [0.0, 0.0, 0.0]", "pose = [50.0, 0.0, 0.0]"),
    )
    .unwrap();

    for (file, field) in [
        (&bad_version, "schema_version"),
        (&unknown_param, "threshhold"),
        (&outside, "robot.pose"),
    ] {
        let trace = dir.path().join("t.jsonl");
        let out = yieldnav(&["run", "--scenario", path(file), "--trace", path(&trace)]);
        assert_eq!(out.status.code(), Some(2), "{}", file.display());
        assert!(
            String::from_utf8_lossy(&out.stderr).contains(field),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn persistent_no_feasible_point_exits_3() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("narrow.toml");
    std::fs::write(&file, NARROW).unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = yieldnav(&["run", "--scenario", path(&file), "--trace", path(&trace)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(trace.exists());
}

#[test]
fn strict_mode_exits_4_on_collision() {
    let dir = TempDir::new().unwrap();
    let (lenient, ..) = run_to(dir.path(), "corridor_baseline", &[]);
    assert_eq!(lenient.status.code(), Some(0));
    let (strict, ..) = run_to(dir.path(), "corridor_baseline", &["--strict"]);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn disable_avoidance_flag_matches_baseline() {
    let dir = TempDir::new().unwrap();
    let (out, trace, _) = run_to(dir.path(), "corridor_retreat", &["--disable-avoidance"]);
    assert!(out.status.success());
    let t = yieldnav::trace::RunTrace::load(&trace).unwrap();
    assert!(!t.header.scenario.avoidance_enabled);
    assert!(t.metrics.collisions > 0 || t.metrics.deadlock);
}

#[test]
fn replay_reproduces_metrics_and_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let (_, trace, metrics) = run_to(dir.path(), "stationary_yield", &[]);
    let out = yieldnav(&["replay", "--trace", path(&trace)]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        std::fs::read_to_string(&metrics).unwrap()
    );

    let text = std::fs::read_to_string(&trace).unwrap();
    let tampered = dir.path().join("tampered.jsonl");
    std::fs::write(&tampered, text.replace("\"collisions\":0", "\"collisions\":5")).unwrap();
    let out = yieldnav(&["replay", "--trace", path(&tampered)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plot_files_are_named_and_byte_stable() {
    let dir = TempDir::new().unwrap();
    let (_, trace, _) = run_to(dir.path(), "stationary_yield", &[]);
    let (_, baseline, _) = run_to(dir.path(), "corridor_baseline", &[]);
    let (_, enabled, _) = run_to(dir.path(), "corridor_retreat", &[]);

    let first = dir.path().join("plots_a");
    let second = dir.path().join("plots_b");
    for out_dir in [&first, &second] {
        let out = yieldnav(&["plot", "--trace", path(&trace), "--out", path(out_dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["trajectory.ppm", "potential.pgm", "feasible.pgm"] {
        let a = std::fs::read(first.join(name)).unwrap();
        assert_eq!(a, std::fs::read(second.join(name)).unwrap(), "{name}");
    }

    let pair = dir.path().join("pair");
    let out = yieldnav(&[
        "plot",
        "--trace",
        path(&enabled),
        "--compare",
        path(&baseline),
        "--out",
        path(&pair),
    ]);
    assert!(out.status.success());
    assert!(pair.join("comparison.ppm").exists());
}

#[test]
fn batch_runs_a_directory() {
    let dir = TempDir::new().unwrap();
    let scenarios = dir.path().join("in");
    std::fs::create_dir(&scenarios).unwrap();
    for name in ["static_only_sanity", "stationary_yield"] {
        std::fs::copy(scenario(name), scenarios.join(format!("{name}.toml"))).unwrap();
    }
    let out_dir = dir.path().join("out");
    let out = yieldnav(&["batch", "--dir", path(&scenarios), "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["static_only_sanity", "stationary_yield"] {
        assert!(out_dir.join(format!("{name}.trace.jsonl")).exists());
        assert!(out_dir.join(format!("{name}.metrics.txt")).exists());
    }
}
