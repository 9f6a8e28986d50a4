//! Plans to a point behind the robot with and without reverse driving.
//!
//! `cargo run --example relaxed_reverse`

use yieldnav::field::{build_potential, FieldParams};
use yieldnav::geometry::{GridFrame, Point, Pose};
use yieldnav::pilot::plan_local;
use yieldnav::world::{RobotLimits, RobotState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frame = GridFrame::new(0.1, Point::new(-3.0, -3.0), 60, 60);
    let params = FieldParams {
        alpha: 0.0,
        ..FieldParams::default()
    };
    let map = build_potential(&frame, &[], Point::origin(), &params)?;
    let robot = RobotState::at(Pose::new(0.05, 0.05, 0.0), 0.25);
    let limits = RobotLimits::default();
    for target in [Point::new(-0.95, 0.05), Point::new(-1.45, 0.75)] {
        for reverse in [true, false] {
            let plan = plan_local(&map, &robot, &target, reverse, &limits, 0.002)?;
            println!(
                "target ({:.2}, {:.2}) reverse {:<5}: {} segments, directions {:?}, turns {:?} rad, {:.2} s",
                target.x,
                target.y,
                reverse,
                plan.segment_count(),
                plan.directions,
                plan.turns
                    .iter()
                    .map(|t| (t * 100.0).round() / 100.0)
                    .collect::<Vec<_>>(),
                plan.execution_time(limits.omega_max)
            );
        }
    }
    Ok(())
}
