//! Runs a bundled scenario and writes its plot set.
//!
//! `cargo run --example plots [scenario] [out_dir]`

use yieldnav::render::emit_plots;
use yieldnav::runner::run_scenario;
use yieldnav::scenario::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "multi_agent_field".into());
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join(format!("yieldnav-{name}")), Into::into);
    let scenario = bundled(&name)?;
    let trace = run_scenario(&scenario, scenario.avoidance_enabled)?;
    for f in emit_plots(&trace, &out, None)? {
        println!("{}", f.display());
    }
    Ok(())
}
