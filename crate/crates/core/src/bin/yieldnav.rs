use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use yieldnav::metrics::{compute_metrics, Metrics};
use yieldnav::render::emit_plots;
use yieldnav::runner::{run_scenario, RunError};
use yieldnav::scenario::{Scenario, ScenarioError};
use yieldnav::trace::RunTrace;

const EXIT_SCHEMA: u8 = 2;
const EXIT_NO_FEASIBLE: u8 = 3;
const EXIT_COLLISION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "yieldnav",
    version,
    about = "Run, replay and plot proactive conflict-avoidance scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace and metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Bypass risk assessment: the robot ignores tracks.
        #[arg(long)]
        disable_avoidance: bool,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Exit with status 4 when any collision occurred.
        #[arg(long)]
        strict: bool,
    },
    /// Run every `*.toml` scenario in a directory concurrently.
    Batch {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render plots from a trace.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Second trace drawn on shared axes.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Recompute metrics from a trace and check them against the recorded ones.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn fail(msg: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run_error_code(e: &RunError) -> u8 {
    match e {
        RunError::Scenario(_) => EXIT_SCHEMA,
        _ => 1,
    }
}

fn status(scenario: &Scenario, m: &Metrics, strict: bool) -> u8 {
    if m.max_no_feasible > scenario.params.run.no_feasible_tolerance {
        EXIT_NO_FEASIBLE
    } else if strict && m.collisions > 0 {
        EXIT_COLLISION
    } else {
        0
    }
}

fn write_outputs(trace: &RunTrace, trace_path: &Path, metrics_path: Option<&Path>) -> std::io::Result<()> {
    if let Some(dir) = trace_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(trace_path)?);
    trace.write_jsonl(file).map_err(std::io::Error::other)?;
    if let Some(p) = metrics_path {
        std::fs::write(p, trace.metrics.to_key_values())?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::load(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            seed,
            disable_avoidance,
            trace,
            metrics,
            strict,
        } => {
            let mut s = match load(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e, EXIT_SCHEMA),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let run = match run_scenario(&s, !disable_avoidance) {
                Ok(r) => r,
                Err(e) => return fail(&e, run_error_code(&e)),
            };
            if let Err(e) = write_outputs(&run, &trace, metrics.as_deref()) {
                return fail(e, 1);
            }
            print!("{}", run.metrics.to_key_values());
            ExitCode::from(status(&run.header.scenario, &run.metrics, strict))
        }
        Command::Batch { dir, out } => {
            let mut files: Vec<PathBuf> = match std::fs::read_dir(&dir) {
                Ok(rd) => rd
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                    .collect(),
                Err(e) => return fail(format!("{}: {e}", dir.display()), 1),
            };
            files.sort();
            if let Err(e) = std::fs::create_dir_all(&out) {
                return fail(e, 1);
            }
            let results: Vec<(PathBuf, Result<Metrics, String>, u8)> = files
                .par_iter()
                .map(|f| {
                    let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    let outcome = load(f)
                        .map_err(|e| (e.to_string(), EXIT_SCHEMA))
                        .and_then(|s| run_scenario(&s, true).map_err(|e| (e.to_string(), run_error_code(&e))))
                        .and_then(|run| {
                            write_outputs(
                                &run,
                                &out.join(format!("{stem}.trace.jsonl")),
                                Some(&out.join(format!("{stem}.metrics.txt"))),
                            )
                            .map_err(|e| (e.to_string(), 1))?;
                            let code = status(&run.header.scenario, &run.metrics, false);
                            Ok((run.metrics, code))
                        });
                    match outcome {
                        Ok((m, code)) => (f.clone(), Ok(m), code),
                        Err((msg, code)) => (f.clone(), Err(msg), code),
                    }
                })
                .collect();
            let mut worst = 0;
            for (f, r, code) in &results {
                match r {
                    Ok(m) => println!(
                        "{}: collisions={} min_separation={} task_time={}",
                        f.display(),
                        m.collisions,
                        m.min_separation.map_or("none".into(), |v| format!("{v:.3}")),
                        m.task_time.map_or("none".into(), |v| format!("{v:.1}")),
                    ),
                    Err(e) => eprintln!("{}: {e}", f.display()),
                }
                worst = worst.max(*code);
            }
            ExitCode::from(worst)
        }
        Command::Plot { trace, out, compare } => {
            let first = match RunTrace::load(&trace) {
                Ok(t) => t,
                Err(e) => return fail(e, 1),
            };
            let second = match compare.as_deref().map(RunTrace::load).transpose() {
                Ok(t) => t,
                Err(e) => return fail(e, 1),
            };
            match emit_plots(&first, &out, second.as_ref()) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e, 1),
            }
        }
        Command::Replay { trace } => {
            let t = match RunTrace::load(&trace) {
                Ok(t) => t,
                Err(e) => return fail(e, 1),
            };
            let again = compute_metrics(&t.header, &t.ticks);
            print!("{}", again.to_key_values());
            if again != t.metrics {
                return fail("recomputed metrics differ from the recorded metrics", 1);
            }
            ExitCode::SUCCESS
        }
    }
}
