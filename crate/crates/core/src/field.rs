//! Local potential map: static occupancy fused with motion-swept dynamic
//! obstacles, an attractive well at a local goal, and a repulsive barrier
//! around every claimed cell. Thresholding the potential yields the feasible
//! domain the avoidance search samples from.

use crate::geometry::{BBox, Cell, GridFrame, Point, Vector};
use crate::track::Track;
use crate::world::StaticMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("goal ({x:.3}, {y:.3}) lies outside the potential map")]
    GoalOutOfBounds { x: f64, y: f64 },
    #[error("query ({x:.3}, {y:.3}) lies outside the potential map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid field parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    /// Attractive gain (1/m²).
    pub alpha: f64,
    /// Repulsive gain.
    pub beta: f64,
    /// Repulsive influence distance (m).
    pub d0: f64,
    /// Cells with potential above this are infeasible.
    pub threshold: f64,
    /// Potential assigned inside claimed cells, where the repulsive term diverges.
    pub u_cap: f64,
    /// Prediction horizon of the motion sweep (s).
    pub horizon: f64,
    /// Safety margin added around swept bounding boxes (m).
    pub margin: f64,
    /// Distance of the retreat goal from the robot (m).
    pub r_goal: f64,
    /// Side of the robot-centered square window (m).
    pub window: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams {
            alpha: 1.0,
            beta: 25.0,
            d0: 1.0,
            threshold: 90.0,
            u_cap: 1000.0,
            horizon: 1.5,
            margin: 0.1,
            r_goal: 1.5,
            window: 8.0,
        }
    }
}

impl FieldParams {
    /// Repulsive term as a function of the distance to the nearest claimed cell.
    pub fn repulsive(&self, d: f64) -> f64 {
        if d <= 0.0 {
            self.u_cap
        } else if d >= self.d0 {
            0.0
        } else {
            let k = 1.0 / d - 1.0 / self.d0;
            (0.5 * self.beta * k * k).min(self.u_cap)
        }
    }

    pub fn attractive(&self, x: &Point, goal: &Point) -> f64 {
        0.5 * self.alpha * (x - goal).norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObstacleSource {
    Static,
    Track(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObstacleKind {
    Static,
    DynamicSwept,
}

/// A set of lattice cells claimed by one obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct InflatedObstacle {
    pub source: ObstacleSource,
    pub kind: ObstacleKind,
    pub cells: BTreeSet<Cell>,
}

fn cells_in_box(lattice: &GridFrame, b: &BBox, out: &mut BTreeSet<Cell>) {
    let lo = lattice.cell_of(&b.min);
    let hi = lattice.cell_of(&b.max);
    for y in lo.y - 1..=hi.y + 1 {
        for x in lo.x - 1..=hi.x + 1 {
            let c = Cell::new(x, y);
            if b.contains(&lattice.center(c)) {
                out.insert(c);
            }
        }
    }
}

/// Sweeps a track's bounding box along its predicted path over `horizon`,
/// inflated by `margin + footprint_radius`, and claims every lattice cell
/// whose center falls inside any swept copy.
pub fn sweep_dilate(
    track: &Track,
    horizon: f64,
    step: f64,
    margin: f64,
    footprint_radius: f64,
    lattice: &GridFrame,
) -> InflatedObstacle {
    assert!(horizon > 0.0 && margin >= 0.0);
    let base = track.bbox.inflate(margin + footprint_radius);
    let here = track.position();
    let mut cells = BTreeSet::new();
    cells_in_box(lattice, &base, &mut cells);
    for p in track.predict_path(horizon, step) {
        let moved = base.translate(&(p - here));
        cells_in_box(lattice, &moved, &mut cells);
    }
    InflatedObstacle {
        source: ObstacleSource::Track(track.id),
        kind: ObstacleKind::DynamicSwept,
        cells,
    }
}

/// Claims the window cells that are occupied, off the map, or whose centers
/// lie within `inflation` of an occupied cell center.
pub fn static_obstacle(map: &StaticMap, window: &GridFrame, inflation: f64) -> InflatedObstacle {
    let pad = (inflation / window.resolution).ceil() as usize + 1;
    let wide = window.padded(pad);
    let sites: Vec<bool> = wide.cells().map(|c| map.is_blocked(c)).collect();
    let dist = distance_transform(wide.width, wide.height, &sites);
    let limit = inflation / window.resolution + 1e-9;
    let cells = window
        .cells()
        .filter(|c| dist[wide.index(*c).expect("window inside padded window")] <= limit)
        .collect();
    InflatedObstacle {
        source: ObstacleSource::Static,
        kind: ObstacleKind::Static,
        cells,
    }
}

const FAR: f64 = 1e20;

fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
            }
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance transform in cell units (Felzenszwalb-Huttenlocher).
///
/// Returns, for every cell of a row-major `width x height` grid, the distance
/// between its center and the nearest site center; infinite with no sites.
pub fn distance_transform(width: usize, height: usize, sites: &[bool]) -> Vec<f64> {
    assert_eq!(sites.len(), width * height);
    let mut grid: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    let n = width.max(height);
    let (mut f, mut d) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        row.copy_from_slice(&d[..width]);
    }
    grid.into_iter()
        .map(|g| if g >= FAR * 0.5 { f64::INFINITY } else { g.sqrt() })
        .collect()
}

/// Distance from `p` to the nearest blocked cell center of the static map,
/// counting the map edge as blocked.
pub fn static_clearance(map: &StaticMap, p: &Point) -> f64 {
    let f = map.frame();
    let lo = f.min_corner();
    let hi = f.max_corner();
    let edge = (p.x - lo.x).min(hi.x - p.x).min(p.y - lo.y).min(hi.y - p.y).max(0.0);
    map.occupied_cells()
        .map(|c| (f.center(c) - p).norm())
        .fold(edge, f64::min)
}

/// Retreat goal for a robot with no task: `r_goal` away from the robot,
/// opposite the inverse-distance-weighted mean direction towards the
/// offending tracks. When that mean vanishes the goal is placed on the
/// perpendicular side with more static clearance.
pub fn choose_local_goal(robot: &Point, tracks: &[&Track], map: &StaticMap, r_goal: f64) -> Point {
    assert!(!tracks.is_empty(), "at least one offending track is required");
    let mut sum = Vector::zeros();
    let mut total = 0.0;
    let mut lead: Option<(f64, Vector)> = None;
    for t in tracks {
        let to = t.position() - robot;
        let dist = to.norm().max(1e-6);
        let w = 1.0 / dist;
        let u = to / dist;
        sum += u * w;
        total += w;
        if lead.is_none_or(|(d, _)| dist < d) {
            lead = Some((dist, u));
        }
    }
    if sum.norm() > 1e-6 * total {
        return robot - sum.normalize() * r_goal;
    }
    let (_, u) = lead.expect("nonempty");
    let left = robot + Vector::new(-u.y, u.x) * r_goal;
    let right = robot + Vector::new(u.y, -u.x) * r_goal;
    if static_clearance(map, &right) > static_clearance(map, &left) {
        right
    } else {
        left
    }
}

/// Scalar potential and feasibility over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMap {
    pub frame: GridFrame,
    pub goal: Point,
    pub params: FieldParams,
    /// U = U_att + U_rep per cell.
    pub potential: Vec<f64>,
    pub feasible: Vec<bool>,
    pub claimed: Vec<bool>,
    /// Distance (m) from each cell center to the nearest claimed cell center.
    pub distance: Vec<f64>,
    /// Signed clearance (m): `distance` outside claimed cells, minus the
    /// distance to the nearest unclaimed cell inside them.
    pub clearance: Vec<f64>,
}

/// Builds the potential map over `window` from the claimed cells of every
/// obstacle. The result does not depend on obstacle order.
pub fn build_potential(
    window: &GridFrame,
    obstacles: &[InflatedObstacle],
    goal: Point,
    params: &FieldParams,
) -> Result<PotentialMap, FieldError> {
    if params.alpha < 0.0 || params.beta < 0.0 {
        return Err(FieldError::InvalidParams("alpha and beta must be nonnegative"));
    }
    if params.d0.is_nan() || params.d0 <= 0.0 {
        return Err(FieldError::InvalidParams("d0 must be positive"));
    }
    if !window.contains_point(&goal) {
        return Err(FieldError::GoalOutOfBounds { x: goal.x, y: goal.y });
    }
    let mut claimed = vec![false; window.len()];
    for o in obstacles {
        for c in &o.cells {
            if let Some(i) = window.index(*c) {
                claimed[i] = true;
            }
        }
    }
    let res = window.resolution;
    let outside = distance_transform(window.width, window.height, &claimed);
    let free: Vec<bool> = claimed.iter().map(|c| !c).collect();
    let inside = distance_transform(window.width, window.height, &free);

    let n = window.len();
    let mut potential = Vec::with_capacity(n);
    let mut feasible = Vec::with_capacity(n);
    let mut distance = Vec::with_capacity(n);
    let mut clearance = Vec::with_capacity(n);
    for i in 0..n {
        let x = window.center(window.cell_at(i));
        let d = outside[i] * res;
        let u = params.attractive(&x, &goal) + params.repulsive(d);
        potential.push(u);
        feasible.push(u <= params.threshold);
        distance.push(d);
        clearance.push(if claimed[i] { -inside[i] * res } else { d });
    }
    Ok(PotentialMap {
        frame: *window,
        goal,
        params: *params,
        potential,
        feasible,
        claimed,
        distance,
        clearance,
    })
}

impl PotentialMap {
    fn index_of(&self, x: &Point) -> Result<usize, FieldError> {
        self.frame
            .index(self.frame.cell_of(x))
            .ok_or(FieldError::OutOfBounds { x: x.x, y: x.y })
    }

    /// Distance from the center of the cell containing `x` to the nearest
    /// claimed cell center; zero inside obstacles.
    pub fn distance_to_obstacles(&self, x: &Point) -> Result<f64, FieldError> {
        self.index_of(x).map(|i| self.distance[i])
    }

    pub fn potential_at(&self, x: &Point) -> Result<f64, FieldError> {
        self.index_of(x).map(|i| self.potential[i])
    }

    pub fn is_feasible(&self, x: &Point) -> bool {
        self.index_of(x).map(|i| self.feasible[i]).unwrap_or(false)
    }

    pub fn cell_feasible(&self, c: Cell) -> bool {
        self.frame.index(c).map(|i| self.feasible[i]).unwrap_or(false)
    }

    pub fn cell_clearance(&self, c: Cell) -> Option<f64> {
        self.frame.index(c).map(|i| self.clearance[i])
    }

    /// Grayscale rendering of the potential (black low, white at or above
    /// the threshold). Rows run top to bottom.
    pub fn potential_gray(&self) -> Vec<u8> {
        self.rows_top_down(|i| {
            let u = (self.potential[i] / self.params.threshold).min(1.0);
            (u * 255.0).round() as u8
        })
    }

    /// Feasible cells white, infeasible black.
    pub fn feasible_gray(&self) -> Vec<u8> {
        self.rows_top_down(|i| if self.feasible[i] { 255 } else { 0 })
    }

    fn rows_top_down(&self, f: impl Fn(usize) -> u8) -> Vec<u8> {
        let w = self.frame.width;
        (0..self.frame.height)
            .rev()
            .flat_map(|row| (0..w).map(move |col| row * w + col))
            .map(f)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{Cluster, TrackParams};
    use proptest::prelude::*;

    fn unit_window(n: usize) -> GridFrame {
        // Cell centers sit on integer multiples of the resolution.
        GridFrame::new(0.1, Point::new(-0.05, -0.05), n, n)
    }

    fn obstacle(cells: &[Cell]) -> InflatedObstacle {
        InflatedObstacle {
            source: ObstacleSource::Static,
            kind: ObstacleKind::Static,
            cells: cells.iter().copied().collect(),
        }
    }

    fn brute_distance(w: &GridFrame, claimed: &[Cell], c: Cell) -> f64 {
        claimed
            .iter()
            .map(|o| (w.center(*o) - w.center(c)).norm())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn three_four_five() {
        let w = unit_window(10);
        let m = build_potential(
            &w,
            &[obstacle(&[Cell::new(0, 0)])],
            Point::new(0.0, 0.0),
            &FieldParams::default(),
        )
        .unwrap();
        let d = m.distance_to_obstacles(&Point::new(0.3, 0.4)).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
        assert_eq!(m.distance_to_obstacles(&Point::new(0.0, 0.0)).unwrap(), 0.0);
        assert!(m.distance_to_obstacles(&Point::new(5.0, 0.0)).is_err());
    }

    #[test]
    fn potential_examples() {
        let w = unit_window(30);
        let params = FieldParams {
            alpha: 2.0,
            ..FieldParams::default()
        };
        let m = build_potential(&w, &[], Point::new(0.0, 0.0), &params).unwrap();
        assert!(m.potential_at(&Point::new(0.0, 0.0)).unwrap().abs() < 1e-9);
        assert!((m.potential_at(&Point::new(1.0, 0.0)).unwrap() - 1.0).abs() < 1e-9);

        let p = FieldParams::default();
        assert_eq!(p.repulsive(p.d0), 0.0);
        assert_eq!(p.repulsive(2.0 * p.d0), 0.0);
        assert_eq!(p.repulsive(0.0), p.u_cap);

        let inside = build_potential(&w, &[obstacle(&[Cell::new(5, 5)])], Point::new(0.0, 0.0), &p).unwrap();
        let c = Point::new(0.5, 0.5);
        assert!(inside.potential_at(&c).unwrap() >= p.threshold);
        assert!(!inside.is_feasible(&c));
    }

    #[test]
    fn goal_outside_window_is_rejected() {
        let w = unit_window(10);
        let r = build_potential(&w, &[], Point::new(9.0, 0.0), &FieldParams::default());
        assert!(matches!(r, Err(FieldError::GoalOutOfBounds { .. })));
    }

    #[test]
    fn repulsion_is_monotone() {
        let p = FieldParams::default();
        let mut prev = f64::INFINITY;
        for k in 1..=200 {
            let d = k as f64 * p.d0 / 200.0;
            let u = p.repulsive(d);
            assert!(u <= prev);
            prev = u;
        }
        assert_eq!(prev, 0.0);
    }

    proptest! {
        #[test]
        fn transform_matches_brute_force(
            w in 1usize..14, h in 1usize..14,
            mask in prop::collection::vec(prop::bool::weighted(0.15), 196),
        ) {
            let frame = GridFrame::new(1.0, Point::origin(), w, h);
            let sites: Vec<bool> = mask[..w * h].to_vec();
            let claimed: Vec<Cell> = frame.cells().filter(|c| sites[frame.index(*c).unwrap()]).collect();
            let d = distance_transform(w, h, &sites);
            for c in frame.cells() {
                let expect = brute_distance(&frame, &claimed, c);
                let got = d[frame.index(c).unwrap()];
                if expect.is_infinite() {
                    prop_assert!(got.is_infinite());
                } else {
                    prop_assert!((got - expect).abs() < 1e-9, "{} vs {}", got, expect);
                }
            }
        }

        #[test]
        fn deleting_an_obstacle_never_raises_potential(
            a in prop::collection::btree_set((0i64..12, 0i64..12), 1..8),
            b in prop::collection::btree_set((0i64..12, 0i64..12), 1..8),
        ) {
            let w = unit_window(12);
            let oa = obstacle(&a.iter().map(|&(x, y)| Cell::new(x, y)).collect::<Vec<_>>());
            let ob = obstacle(&b.iter().map(|&(x, y)| Cell::new(x, y)).collect::<Vec<_>>());
            let g = Point::new(0.6, 0.6);
            let p = FieldParams::default();
            let both = build_potential(&w, &[oa.clone(), ob.clone()], g, &p).unwrap();
            let reversed = build_potential(&w, &[ob, oa.clone()], g, &p).unwrap();
            let one = build_potential(&w, &[oa], g, &p).unwrap();
            prop_assert_eq!(&both, &reversed);
            for i in 0..w.len() {
                prop_assert!(one.potential[i] <= both.potential[i]);
                if both.claimed[i] {
                    prop_assert!(!both.feasible[i]);
                }
            }
        }
    }

    fn track(x: f64, y: f64, vx: f64, vy: f64, half: f64) -> Track {
        let c = Cluster::from_points(vec![Point::new(x - half, y - half), Point::new(x + half, y + half)]).unwrap();
        let mut t = Track::spawn(7, &c, &TrackParams::default());
        t.state[2] = vx;
        t.state[3] = vy;
        t
    }

    #[test]
    fn stationary_sweep_is_inflated_box() {
        let lattice = unit_window(1);
        let t = track(0.0, 0.0, 0.0, 0.0, 0.2);
        let o = sweep_dilate(&t, 1.5, 0.1, 0.1, 0.2, &lattice);
        // 0.4 + 2 * 0.3 = 1.0 m per side -> centers from -0.5 to 0.5.
        let xs: BTreeSet<i64> = o.cells.iter().map(|c| c.x).collect();
        let ys: BTreeSet<i64> = o.cells.iter().map(|c| c.y).collect();
        assert_eq!(xs.first().copied(), Some(-5));
        assert_eq!(xs.last().copied(), Some(5));
        assert_eq!(ys.len(), 11);
        assert_eq!(o.cells.len(), 121);
    }

    #[test]
    fn moving_sweep_extends_forward() {
        let lattice = unit_window(1);
        let t = track(0.0, 0.0, 1.0, 0.0, 0.2);
        let o = sweep_dilate(&t, 1.0, 0.1, 0.1, 0.2, &lattice);
        let max_x = o.cells.iter().map(|c| c.x).max().unwrap();
        let min_x = o.cells.iter().map(|c| c.x).min().unwrap();
        assert_eq!(max_x, 15);
        assert_eq!(min_x, -5);
    }

    #[test]
    fn sweep_matches_enumeration_and_short_horizon_limit() {
        let lattice = unit_window(1);
        let t = track(0.33, -0.21, 0.7, -0.4, 0.17);
        let (horizon, step, margin, fp) = (1.5, 0.1, 0.1, 0.25);
        let o = sweep_dilate(&t, horizon, step, margin, fp, &lattice);
        let boxes: Vec<_> = std::iter::once(t.position())
            .chain(t.predict_path(horizon, step))
            .map(|p| t.bbox.inflate(margin + fp).translate(&(p - t.position())))
            .collect();
        let mut expect = BTreeSet::new();
        for y in -60..60 {
            for x in -60..60 {
                let c = Cell::new(x, y);
                if boxes.iter().any(|b| b.contains(&lattice.center(c))) {
                    expect.insert(c);
                }
            }
        }
        assert_eq!(o.cells, expect);

        let short = sweep_dilate(&t, 0.05, step, margin, fp, &lattice);
        let still = sweep_dilate(&track(0.33, -0.21, 0.0, 0.0, 0.17), 1.5, step, margin, fp, &lattice);
        assert_eq!(short.cells, still.cells);
    }

    #[test]
    fn local_goal_opposes_single_approacher() {
        let map = StaticMap::empty(0.1, Point::new(-5.0, -5.0), 100, 100).unwrap();
        let t = track(3.0, 0.0, -1.0, 0.0, 0.2);
        let g = choose_local_goal(&Point::origin(), &[&t], &map, 1.5);
        assert!((g - Point::new(-1.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn symmetric_approachers_fall_back_to_clearer_side() {
        let mut map = StaticMap::empty(0.1, Point::new(-5.0, -5.0), 100, 100).unwrap();
        // Wall just above the robot.
        map.fill_rect(Point::new(-5.0, 1.0), Point::new(5.0, 1.2));
        let a = track(3.0, 0.0, -1.0, 0.0, 0.2);
        let b = track(-3.0, 0.0, 1.0, 0.0, 0.2);
        let g = choose_local_goal(&Point::origin(), &[&a, &b], &map, 1.5);

        // Oracle: clearance of both perpendicular candidates from a distance
        // transform over the static map.
        let f = *map.frame();
        let sites: Vec<bool> = f.cells().map(|c| map.is_occupied(c)).collect();
        let dt = distance_transform(f.width, f.height, &sites);
        let clear = |p: Point| dt[f.index(f.cell_of(&p)).unwrap()] * f.resolution;
        let up = Point::new(0.0, 1.5);
        let down = Point::new(0.0, -1.5);
        let expect = if clear(up) > clear(down) { up } else { down };
        assert!((g - expect).norm() < 1e-9);
        assert!(g.y < 0.0);
    }

    #[test]
    fn static_inflation_claims_disc() {
        let mut map = StaticMap::empty(0.1, Point::new(-0.05, -0.05), 20, 20).unwrap();
        map.set(Cell::new(10, 10), true);
        let window = *map.frame();
        let o = static_obstacle(&map, &window, 0.2);
        assert!(o.cells.contains(&Cell::new(12, 10)));
        assert!(!o.cells.contains(&Cell::new(12, 12)));
        assert!(
            o.cells.contains(&Cell::new(0, 0)),
            "near the map edge counts as blocked"
        );
    }
}
