//! Planar primitives shared by every stage: points, grid lattices, and
//! exact cell traversal along segments.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point = nalgebra::Point2<f64>;
pub type Vector = nalgebra::Vector2<f64>;

/// Relative tolerance on the segment parameter used to decide that a segment
/// crosses a cell corner exactly.
const CORNER_EPS: f64 = 1e-9;

/// Wraps an angle into (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            position: Point::new(x, y),
            heading: wrap_angle(heading),
        }
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Integer cell index on an infinite lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const fn new(x: i64, y: i64) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i64, dy: i64) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }
}

/// A finite rectangular window onto a square lattice.
///
/// The lattice is fixed by `resolution` and `anchor` (world position of the
/// lower-left corner of lattice cell (0, 0)). The window covers the cells
/// `min.x .. min.x + width` by `min.y .. min.y + height`. Windows that share a
/// lattice address the same world cell with the same [`Cell`] index, which is
/// what lets static maps, TSDF grids and local potential maps exchange cell
/// sets directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub resolution: f64,
    pub anchor: Point,
    pub min: Cell,
    pub width: usize,
    pub height: usize,
}

impl GridFrame {
    /// Window whose cell (0, 0) has its lower-left corner at `origin`.
    pub fn new(resolution: f64, origin: Point, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        assert!(width >= 1 && height >= 1, "grid must be at least 1x1");
        GridFrame {
            resolution,
            anchor: origin,
            min: Cell::new(0, 0),
            width,
            height,
        }
    }

    /// Square window of `size` meters on the same lattice, centered as closely
    /// as the lattice allows on `center`.
    pub fn window_around(&self, center: &Point, size: f64) -> GridFrame {
        let cells = ((size / self.resolution).round() as usize).max(1);
        let c = self.cell_of(center);
        let half = (cells / 2) as i64;
        GridFrame {
            resolution: self.resolution,
            anchor: self.anchor,
            min: Cell::new(c.x - half, c.y - half),
            width: cells,
            height: cells,
        }
    }

    /// Grows the window by `pad` cells on every side.
    pub fn padded(&self, pad: usize) -> GridFrame {
        GridFrame {
            min: self.min.offset(-(pad as i64), -(pad as i64)),
            width: self.width + 2 * pad,
            height: self.height + 2 * pad,
            ..*self
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, p: &Point) -> Cell {
        Cell::new(
            ((p.x - self.anchor.x) / self.resolution).floor() as i64,
            ((p.y - self.anchor.y) / self.resolution).floor() as i64,
        )
    }

    pub fn center(&self, c: Cell) -> Point {
        Point::new(
            self.anchor.x + (c.x as f64 + 0.5) * self.resolution,
            self.anchor.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        c.x >= self.min.x
            && c.y >= self.min.y
            && c.x < self.min.x + self.width as i64
            && c.y < self.min.y + self.height as i64
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        p.x >= lo.x && p.y >= lo.y && p.x < hi.x && p.y < hi.y
    }

    pub fn index(&self, c: Cell) -> Option<usize> {
        if self.contains_cell(c) {
            Some((c.y - self.min.y) as usize * self.width + (c.x - self.min.x) as usize)
        } else {
            None
        }
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(
            self.min.x + (index % self.width) as i64,
            self.min.y + (index / self.width) as i64,
        )
    }

    pub fn min_corner(&self) -> Point {
        Point::new(
            self.anchor.x + self.min.x as f64 * self.resolution,
            self.anchor.y + self.min.y as f64 * self.resolution,
        )
    }

    pub fn max_corner(&self) -> Point {
        Point::new(
            self.anchor.x + (self.min.x + self.width as i64) as f64 * self.resolution,
            self.anchor.y + (self.min.y + self.height as i64) as f64 * self.resolution,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |i| self.cell_at(i))
    }

    /// Cells the segment `a`-`b` passes through, in order from `a`.
    ///
    /// A cell counts when the segment overlaps it with positive length; cells
    /// touched only at a corner point are skipped.
    pub fn segment_cells(&self, a: &Point, b: &Point) -> Vec<Cell> {
        self.walk(a, b).map(|(c, _)| c).collect()
    }

    /// Lazily walks the cells crossed by `a`-`b`, yielding each cell together
    /// with the segment parameter in [0, 1] at which it is entered.
    pub fn walk(&self, a: &Point, b: &Point) -> GridWalk {
        GridWalk::new(self.resolution, self.anchor, *a, *b)
    }
}

/// Amanatides-Woo traversal of lattice cells along a segment.
#[derive(Debug, Clone)]
pub struct GridWalk {
    cell: Cell,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t_enter: f64,
    started: bool,
    done: bool,
}

impl GridWalk {
    fn new(resolution: f64, anchor: Point, a: Point, b: Point) -> Self {
        let cell = Cell::new(
            ((a.x - anchor.x) / resolution).floor() as i64,
            ((a.y - anchor.y) / resolution).floor() as i64,
        );
        let d = b - a;
        let axis = |delta: f64, start: f64, origin: f64, idx: i64| -> (i64, f64, f64) {
            if delta > 0.0 {
                let boundary = origin + (idx + 1) as f64 * resolution;
                (1, (boundary - start) / delta, resolution / delta)
            } else if delta < 0.0 {
                let boundary = origin + idx as f64 * resolution;
                (-1, (boundary - start) / delta, -resolution / delta)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, t_max_x, t_delta_x) = axis(d.x, a.x, anchor.x, cell.x);
        let (step_y, t_max_y, t_delta_y) = axis(d.y, a.y, anchor.y, cell.y);
        GridWalk {
            cell,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t_enter: 0.0,
            started: false,
            done: false,
        }
    }
}

impl Iterator for GridWalk {
    type Item = (Cell, f64);

    fn next(&mut self) -> Option<(Cell, f64)> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some((self.cell, 0.0));
        }
        let t = self.t_max_x.min(self.t_max_y);
        if t >= 1.0 - CORNER_EPS {
            self.done = true;
            return None;
        }
        if (self.t_max_x - self.t_max_y).abs() <= CORNER_EPS {
            // Exact corner crossing: move diagonally.
            self.cell = self.cell.offset(self.step_x, self.step_y);
            self.t_max_x += self.t_delta_x;
            self.t_max_y += self.t_delta_y;
        } else if self.t_max_x < self.t_max_y {
            self.cell = self.cell.offset(self.step_x, 0);
            self.t_max_x += self.t_delta_x;
        } else {
            self.cell = self.cell.offset(0, self.step_y);
            self.t_max_y += self.t_delta_y;
        }
        self.t_enter = t;
        Some((self.cell, t))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = BBox { min: first, max: first };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn inflate(&self, by: f64) -> BBox {
        BBox {
            min: Point::new(self.min.x - by, self.min.y - by),
            max: Point::new(self.max.x + by, self.max.y + by),
        }
    }

    pub fn translate(&self, v: &Vector) -> BBox {
        BBox {
            min: self.min + v,
            max: self.max + v,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_frame() -> GridFrame {
        GridFrame::new(1.0, Point::origin(), 10, 10)
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn cell_index_round_trip() {
        let f = GridFrame::new(0.1, Point::new(-1.0, -2.0), 7, 5);
        for i in 0..f.len() {
            let c = f.cell_at(i);
            assert_eq!(f.index(c), Some(i));
            assert_eq!(f.cell_of(&f.center(c)), c);
        }
        assert_eq!(f.index(Cell::new(7, 0)), None);
    }

    #[test]
    fn window_shares_lattice() {
        let f = GridFrame::new(0.1, Point::new(-1.0, -2.0), 100, 100);
        let w = f.window_around(&Point::new(2.0, 1.0), 8.0);
        assert_eq!(w.width, 80);
        let c = w.cell_at(123);
        assert_eq!(f.center(c), w.center(c));
    }

    #[test]
    fn horizontal_walk() {
        let f = unit_frame();
        let cells = f.segment_cells(&Point::new(0.5, 0.5), &Point::new(3.5, 0.5));
        assert_eq!(
            cells,
            vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0), Cell::new(3, 0)]
        );
    }

    #[test]
    fn diagonal_walk_skips_corner_touches() {
        let f = unit_frame();
        let cells = f.segment_cells(&Point::new(0.5, 0.5), &Point::new(2.5, 2.5));
        assert_eq!(cells, vec![Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2)]);
    }

    #[test]
    fn walk_reports_entry_parameter() {
        let f = unit_frame();
        let v: Vec<_> = f.walk(&Point::new(0.5, 0.5), &Point::new(2.5, 0.5)).collect();
        assert_eq!(v.len(), 3);
        assert!((v[1].1 - 0.25).abs() < 1e-12);
        assert!((v[2].1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn degenerate_segment() {
        let f = unit_frame();
        let p = Point::new(4.2, 3.3);
        assert_eq!(f.segment_cells(&p, &p), vec![Cell::new(4, 3)]);
    }

    #[test]
    fn point_segment() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(2.0, 0.0);
        assert!((point_segment_distance(&Point::new(1.0, 1.0), &a, &b) - 1.0).abs() < 1e-12);
        assert!((point_segment_distance(&Point::new(3.0, 0.0), &a, &b) - 1.0).abs() < 1e-12);
    }
}
