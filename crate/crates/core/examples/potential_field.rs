//! Builds a local potential map from a wall and one approaching pedestrian,
//! prints a coarse text view and writes the potential and feasibility images.
//!
//! `cargo run --example potential_field [out_dir]`

use yieldnav::field::{build_potential, static_obstacle, sweep_dilate, FieldParams};
use yieldnav::geometry::Point;
use yieldnav::render::{render_field, write_pgm};
use yieldnav::runner::LocalField;
use yieldnav::track::{Cluster, Track, TrackParams};
use yieldnav::world::StaticMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("yieldnav-potential"), Into::into);
    let mut map = StaticMap::empty(0.1, Point::new(-5.0, -5.0), 100, 100)?;
    map.add_border();
    map.fill_rect(Point::new(-5.0, 1.5), Point::new(5.0, 1.8));

    let outline: Vec<Point> = (0..16)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 16.0;
            Point::new(2.5 + 0.25 * a.cos(), 0.25 * a.sin())
        })
        .collect();
    let mut walker = Track::spawn(
        1,
        &Cluster::from_points(outline).expect("points"),
        &TrackParams::default(),
    );
    walker.state[2] = -1.0;

    let params = FieldParams::default();
    let robot = Point::origin();
    let window = map.frame().window_around(&robot, params.window);
    let obstacles = vec![
        static_obstacle(&map, &window, 0.25),
        sweep_dilate(&walker, params.horizon, 0.1, params.margin, 0.25, &window),
    ];
    let goal = Point::new(-1.5, 0.0);
    let field = LocalField {
        goal,
        map: build_potential(&window, &obstacles, goal, &params)?,
        obstacles,
    };

    for row in (0..field.map.frame.height).step_by(4).rev() {
        let line: String = (0..field.map.frame.width)
            .step_by(2)
            .map(|col| {
                let c = field.map.frame.cell_at(row * field.map.frame.width + col);
                match field.map.cell_feasible(c) {
                    true => '.',
                    false => '#',
                }
            })
            .collect();
        println!("{line}");
    }
    let feasible = field.map.feasible.iter().filter(|f| **f).count();
    println!("feasible cells: {feasible} of {}", field.map.feasible.len());

    std::fs::create_dir_all(&out)?;
    let (potential, mask) = render_field(&field);
    write_pgm(&out.join("potential.pgm"), &potential)?;
    write_pgm(&out.join("feasible.pgm"), &mask)?;
    println!("wrote {}", out.display());
    Ok(())
}
