//! Selects an avoidance point on a potential map with sampled and with
//! exhaustive candidates and shows the scoring terms of each winner.
//!
//! `cargo run --example avoidance_point`

use std::collections::BTreeSet;
use yieldnav::avoid::{select_avoidance_point, CandidateSource, ScoreWeights};
use yieldnav::field::{build_potential, FieldParams, InflatedObstacle, ObstacleKind, ObstacleSource};
use yieldnav::geometry::{Cell, GridFrame, Point};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frame = GridFrame::new(0.1, Point::new(-2.0, -2.0), 40, 40);
    let blocked: BTreeSet<Cell> = frame
        .cells()
        .filter(|c| {
            let p = frame.center(*c);
            (p.x - 0.8).abs() < 0.5 && p.y.abs() < 1.2
        })
        .collect();
    let obstacle = InflatedObstacle {
        source: ObstacleSource::Track(1),
        kind: ObstacleKind::DynamicSwept,
        cells: blocked,
    };
    let map = build_potential(&frame, &[obstacle], Point::new(-1.5, 0.0), &FieldParams::default())?;
    let start = Point::origin();
    let weights = ScoreWeights::default();

    for source in [
        CandidateSource::Sampled { n: 200, seed: 7 },
        CandidateSource::Exhaustive,
    ] {
        let d = select_avoidance_point(&map, &start, None, &weights, source)?;
        let s = &d.selected;
        println!(
            "{source:?}: {} candidates, selected ({:.2}, {:.2}) Q {:.3} [S {:.2} D {:.2} U {:.2}]",
            d.candidates.len(),
            s.point.x,
            s.point.y,
            s.q_score,
            s.terms.safety,
            s.terms.distance,
            s.terms.potential
        );
    }

    let first = select_avoidance_point(&map, &start, None, &weights, CandidateSource::Exhaustive)?;
    let moved = Point::new(-0.3, 0.4);
    let sticky = ScoreWeights {
        hysteresis: 2.0,
        ..weights
    };
    let again = select_avoidance_point(
        &map,
        &moved,
        Some(&first.selected.point),
        &sticky,
        CandidateSource::Exhaustive,
    )?;
    println!(
        "after moving with strong hysteresis: ({:.2}, {:.2}), {:.2} m from the previous point",
        again.selected.point.x, again.selected.point.y, again.selected.terms.hysteresis
    );
    Ok(())
}
