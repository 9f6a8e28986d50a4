//! Streams a pedestrian crossing through the TSDF detector and reports, once
//! per simulated second, how many returns were labeled dynamic and how many of
//! those really came from the pedestrian.
//!
//! `cargo run --example detect_dynamic`

use yieldnav::runner::Runner;
use yieldnav::scenario::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut runner = Runner::new(bundled("crossing_stationary")?)?;
    println!("time  scan  agent  dynamic  from_agent  precision  recall");
    while !runner.finished() {
        let rec = runner.step()?;
        if rec.tick % 10 != 0 {
            continue;
        }
        let d = rec.detection;
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}", v));
        println!(
            "{:>4.1}  {:>4}  {:>5}  {:>7}  {:>10}  {:>9}  {:>6}",
            rec.time,
            d.scan_points,
            d.agent_points,
            d.dynamic_points,
            d.dynamic_from_agents,
            pct(d.precision()),
            pct(d.recall())
        );
    }
    let free = runner.tsdf().cells().iter().filter(|c| c.high_conf_free).count();
    println!("high-confidence free cells at the end: {free}");
    Ok(())
}
