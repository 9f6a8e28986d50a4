//! Tracks a pedestrian crossing in front of a moving robot and prints the
//! confirmed track next to the scripted ground truth.
//!
//! `cargo run --example track_crossing`

use yieldnav::runner::Runner;
use yieldnav::scenario::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("crossing_moving")?;
    let script = scenario.agent_scripts().remove(0);
    let confirm = scenario.params.track.confirm_hits;
    let mut runner = Runner::new(scenario)?;
    println!("time  id  estimate          truth             velocity");
    while !runner.finished() {
        let rec = runner.step()?;
        if rec.tick % 5 != 0 {
            continue;
        }
        let Some(truth) = script.position_at(rec.time) else {
            continue;
        };
        for t in rec.tracks.iter().filter(|t| t.hits >= confirm) {
            println!(
                "{:>4.1}  {:>2}  ({:>6.2}, {:>5.2})  ({:>6.2}, {:>5.2})  ({:>5.2}, {:>5.2})",
                rec.time, t.id, t.position.x, t.position.y, truth.x, truth.y, t.velocity.x, t.velocity.y
            );
        }
    }
    Ok(())
}
