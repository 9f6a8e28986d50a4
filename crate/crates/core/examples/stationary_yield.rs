//! An idle robot steps aside for a pedestrian and returns to where it stood.
//!
//! `cargo run --example stationary_yield`

use yieldnav::pilot::Mode;
use yieldnav::runner::run_scenario;
use yieldnav::scenario::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("stationary_yield")?;
    let trace = run_scenario(&scenario, true)?;
    let mut last = None;
    for t in &trace.ticks {
        if last != Some(t.mode) {
            println!(
                "{:>5.1} s  {:<10}  robot ({:.2}, {:.2})",
                t.time,
                format!("{:?}", t.mode),
                t.robot.position.x,
                t.robot.position.y
            );
            last = Some(t.mode);
        }
        if t.mode == Mode::Avoiding && t.tick % 10 == 0 {
            if let Some(d) = &t.decision {
                println!(
                    "         avoidance point ({:.2}, {:.2})",
                    d.selected.point.x, d.selected.point.y
                );
            }
        }
    }
    print!("{}", trace.metrics.to_key_values());
    Ok(())
}
