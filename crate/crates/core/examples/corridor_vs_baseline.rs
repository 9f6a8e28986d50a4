//! Runs the corridor encounter with and without proactive avoidance and
//! compares the outcome, writing a shared-axes plot of both robot paths.
//!
//! `cargo run --example corridor_vs_baseline [out_dir]`

use yieldnav::render::{render_comparison, write_ppm};
use yieldnav::runner::run_scenario;
use yieldnav::scenario::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("yieldnav-corridor"), Into::into);
    let scenario = bundled("corridor_retreat")?;
    let enabled = run_scenario(&scenario, true)?;
    let baseline = run_scenario(&scenario, false)?;
    for (label, t) in [("avoidance", &enabled), ("baseline", &baseline)] {
        let m = &t.metrics;
        println!(
            "{label:<10} collisions {:>3}  deadlock {:<5}  min_separation {:.2} m  task_time {}",
            m.collisions,
            m.deadlock,
            m.min_separation.unwrap_or(f64::NAN),
            m.task_time.map_or("none".into(), |v| format!("{v:.1} s"))
        );
    }
    std::fs::create_dir_all(&out)?;
    let path = out.join("comparison.ppm");
    write_ppm(&path, &render_comparison(&enabled, &baseline)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
