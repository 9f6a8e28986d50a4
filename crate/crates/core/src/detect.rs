//! Incremental TSDF mapping and free-space intrusion labeling of dynamic
//! points.
//!
//! Each frame is integrated by walking every beam from the sensor to a
//! truncation distance past its return. Cells strictly before the return
//! cell count as observed free, the return cell as observed occupied. Cells
//! that stay free for enough consecutive frames and sit in a surface-free,
//! fully observed neighborhood are promoted to high-confidence free; a later
//! return inside such a cell is a moving object.

use crate::geometry::{Cell, GridFrame, Point};
use crate::world::SensorFrame;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("sensor pose ({x:.3}, {y:.3}) lies outside the TSDF grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("truncation distance {tau} must exceed the resolution {resolution}")]
    TruncationTooSmall { tau: f64, resolution: f64 },
}

/// Clamps a signed distance to the band [-tau, tau].
pub fn truncate_sdf(sdf: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0);
    if sdf.abs() <= tau {
        sdf
    } else {
        sdf.signum() * tau
    }
}

/// Weighted running average of a cell's TSDF value.
///
/// Returns the fused value and the accumulated weight.
pub fn fuse_cell(tsdf: f64, weight: f64, tsdf_new: f64, weight_new: f64) -> (f64, f64) {
    debug_assert!(weight >= 0.0 && weight_new > 0.0);
    let total = weight + weight_new;
    ((tsdf * weight + tsdf_new * weight_new) / total, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsdfParams {
    /// Truncation distance as a multiple of the map resolution.
    pub truncation_cells: f64,
    /// Weight of a single observation.
    pub weight_new: f64,
    /// Ceiling on the accumulated weight of a cell.
    pub weight_max: f64,
    /// Consecutive free frames before a cell can become high-confidence free.
    pub free_frames: u32,
    /// Consecutive occupied frames that revoke a high-confidence free label.
    pub occupied_clear_frames: u32,
}

impl Default for TsdfParams {
    fn default() -> Self {
        TsdfParams {
            truncation_cells: 3.0,
            weight_new: 1.0,
            weight_max: 100.0,
            free_frames: 5,
            occupied_clear_frames: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsdfCell {
    pub tsdf: f64,
    pub weight: f64,
    pub free_streak: u32,
    pub occupied_streak: u32,
    pub high_conf_free: bool,
    /// Set when the most recent frame put a return in this cell.
    pub occupied_now: bool,
}

impl TsdfCell {
    pub fn observed(&self) -> bool {
        self.weight > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seen {
    Unseen,
    Free,
    Occupied,
}

#[derive(Debug, Clone)]
pub struct TsdfGrid {
    frame: GridFrame,
    tau: f64,
    params: TsdfParams,
    cells: Vec<TsdfCell>,
    seen: Vec<Seen>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicPointSet {
    pub timestamp: f64,
    pub points: Vec<Point>,
    /// Index of each dynamic point in the originating frame.
    pub indices: Vec<usize>,
}

impl TsdfGrid {
    pub fn new(frame: GridFrame, params: TsdfParams) -> Result<Self, DetectError> {
        let tau = params.truncation_cells * frame.resolution;
        if tau.is_nan() || tau <= frame.resolution {
            return Err(DetectError::TruncationTooSmall {
                tau,
                resolution: frame.resolution,
            });
        }
        Ok(TsdfGrid {
            tau,
            params,
            cells: vec![TsdfCell::default(); frame.len()],
            seen: vec![Seen::Unseen; frame.len()],
            frame,
        })
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn params(&self) -> &TsdfParams {
        &self.params
    }

    pub fn cell(&self, c: Cell) -> Option<&TsdfCell> {
        self.frame.index(c).map(|i| &self.cells[i])
    }

    pub fn cells(&self) -> &[TsdfCell] {
        &self.cells
    }

    fn fuse_at(&mut self, idx: usize, sdf: f64) {
        let cell = &mut self.cells[idx];
        let (v, w) = fuse_cell(
            cell.tsdf,
            cell.weight,
            truncate_sdf(sdf, self.tau),
            self.params.weight_new,
        );
        cell.tsdf = v;
        cell.weight = w.min(self.params.weight_max).max(cell.weight);
    }

    /// Fuses one sensor frame, expressed in the frame's own (jittered) pose.
    pub fn integrate_frame(&mut self, frame: &SensorFrame) -> Result<(), DetectError> {
        let origin = frame.sensor_pose.position;
        if !self.frame.contains_point(&origin) {
            return Err(DetectError::OutOfBounds {
                x: origin.x,
                y: origin.y,
            });
        }
        self.seen.iter_mut().for_each(|s| *s = Seen::Unseen);

        for hit in &frame.points {
            let ray = hit - origin;
            let range = ray.norm();
            if range <= 0.0 {
                continue;
            }
            let dir = ray / range;
            let hit_cell = self.frame.cell_of(hit);
            let end = origin + dir * (range + self.tau);
            let mut before_hit = true;
            for (cell, _) in self.frame.walk(&origin, &end) {
                let Some(idx) = self.frame.index(cell) else {
                    break;
                };
                let sdf = range - (self.frame.center(cell) - origin).dot(&dir);
                if cell == hit_cell {
                    before_hit = false;
                    self.seen[idx] = Seen::Occupied;
                } else if before_hit {
                    if self.seen[idx] == Seen::Unseen {
                        self.seen[idx] = Seen::Free;
                    }
                } else if sdf < -self.tau {
                    break;
                }
                self.fuse_at(idx, sdf);
            }
            // A return can land in a cell the walk never entered when it sits
            // exactly on a cell boundary.
            if before_hit {
                if let Some(idx) = self.frame.index(hit_cell) {
                    self.seen[idx] = Seen::Occupied;
                    self.fuse_at(idx, 0.0);
                }
            }
        }

        for (cell, seen) in self.cells.iter_mut().zip(&self.seen) {
            cell.occupied_now = *seen == Seen::Occupied;
            match seen {
                Seen::Occupied => {
                    cell.free_streak = 0;
                    cell.occupied_streak = cell.occupied_streak.saturating_add(1);
                }
                Seen::Free => {
                    cell.free_streak = cell.free_streak.saturating_add(1);
                    cell.occupied_streak = 0;
                }
                Seen::Unseen => {}
            }
        }
        Ok(())
    }

    fn neighborhood_clear(&self, c: Cell) -> bool {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                match self.cell(c.offset(dx, dy)) {
                    Some(n) if n.observed() && n.tsdf >= 0.0 => {}
                    _ => return false,
                }
            }
        }
        true
    }

    /// Promotes consistently free cells to high-confidence free and revokes
    /// the label from cells held occupied for `occupied_clear_frames`.
    pub fn refresh_free_space(&mut self) {
        let mut promote = Vec::new();
        for i in 0..self.cells.len() {
            let cell = self.cells[i];
            if cell.high_conf_free {
                if cell.occupied_now && cell.occupied_streak >= self.params.occupied_clear_frames {
                    self.cells[i].high_conf_free = false;
                }
            } else if cell.free_streak >= self.params.free_frames && self.neighborhood_clear(self.frame.cell_at(i)) {
                promote.push(i);
            }
        }
        for i in promote {
            self.cells[i].high_conf_free = true;
        }
    }

    /// Returns the frame points that fall inside high-confidence free cells.
    pub fn label_dynamic(&self, frame: &SensorFrame) -> DynamicPointSet {
        let mut out = DynamicPointSet {
            timestamp: frame.timestamp,
            ..Default::default()
        };
        for (i, p) in frame.points.iter().enumerate() {
            let free = self
                .cell(self.frame.cell_of(p))
                .map(|c| c.high_conf_free)
                .unwrap_or(false);
            if free {
                out.points.push(*p);
                out.indices.push(i);
            }
        }
        out
    }

    /// Grayscale rendering for debugging: black at -tau, white at +tau,
    /// mid-gray for unobserved cells. Rows run top to bottom.
    pub fn to_gray(&self) -> Vec<u8> {
        let f = &self.frame;
        let mut out = Vec::with_capacity(f.len());
        for row in (0..f.height).rev() {
            for col in 0..f.width {
                let c = &self.cells[row * f.width + col];
                out.push(if c.observed() {
                    (((c.tsdf / self.tau) * 0.5 + 0.5) * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    128
                });
            }
        }
        out
    }
}
