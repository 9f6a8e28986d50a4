//! Top-down plots of traces as portable pixmaps and graymaps.
//!
//! Files written by [`emit_plots`]:
//! - `trajectory.ppm`: static map, agent paths, robot path colored by mode,
//!   selected avoidance points and the first saved pose.
//! - `potential.pgm` and `feasible.pgm`: the local potential map and its
//!   feasible mask at the first avoidance decision, when there is one.
//! - `comparison.ppm`: two runs of the same map on shared axes.

use crate::geometry::{GridFrame, Point};
use crate::pilot::{Mode, SavedContext};
use crate::runner::{field_from_record, LocalField, RunError};
use crate::trace::RunTrace;
use crate::world::StaticMap;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, Rgb, RgbImage};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Pixels per map cell.
pub const SCALE: u32 = 4;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("plot I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("plot encoding: {0}")]
    Encode(#[from] image::ImageError),
    #[error(transparent)]
    Run(#[from] RunError),
}

pub const FREE: Rgb<u8> = Rgb([255, 255, 255]);
pub const OCCUPIED: Rgb<u8> = Rgb([60, 60, 60]);
pub const AGENT: Rgb<u8> = Rgb([70, 110, 230]);
pub const AVOIDANCE_POINT: Rgb<u8> = Rgb([200, 0, 200]);
pub const SAVED_POSE: Rgb<u8> = Rgb([0, 170, 170]);
pub const FIRST_RUN: Rgb<u8> = Rgb([220, 40, 40]);
pub const SECOND_RUN: Rgb<u8> = Rgb([30, 160, 60]);

pub fn mode_color(mode: Mode) -> Rgb<u8> {
    match mode {
        Mode::Idle => Rgb([0, 0, 0]),
        Mode::Navigating => Rgb([30, 160, 60]),
        Mode::Avoiding => Rgb([220, 40, 40]),
        Mode::Recovering => Rgb([240, 150, 20]),
    }
}

/// A pixmap aligned with a map frame.
pub struct Canvas {
    frame: GridFrame,
    pub image: RgbImage,
}

impl Canvas {
    pub fn of_map(map: &StaticMap) -> Canvas {
        let frame = *map.frame();
        let mut image = RgbImage::from_pixel(frame.width as u32 * SCALE, frame.height as u32 * SCALE, FREE);
        for c in map.occupied_cells() {
            let (px, py) = (
                (c.x - frame.min.x) as u32 * SCALE,
                (frame.height as i64 - 1 - (c.y - frame.min.y)) as u32 * SCALE,
            );
            for dy in 0..SCALE {
                for dx in 0..SCALE {
                    image.put_pixel(px + dx, py + dy, OCCUPIED);
                }
            }
        }
        Canvas { frame, image }
    }

    /// Pixel coordinates of a world point; y grows downward.
    pub fn pixel(&self, p: &Point) -> (i64, i64) {
        let lo = self.frame.min_corner();
        let s = SCALE as f64 / self.frame.resolution;
        (
            ((p.x - lo.x) * s).floor() as i64,
            (self.image.height() as f64 - (p.y - lo.y) * s).floor() as i64,
        )
    }

    /// World point of a pixel center.
    pub fn world(&self, px: u32, py: u32) -> Point {
        let lo = self.frame.min_corner();
        let s = self.frame.resolution / SCALE as f64;
        Point::new(
            lo.x + (px as f64 + 0.5) * s,
            lo.y + (self.image.height() as f64 - py as f64 - 0.5) * s,
        )
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < self.image.width() && (y as u32) < self.image.height() {
            self.image.put_pixel(x as u32, y as u32, c);
        }
    }

    pub fn line(&mut self, a: &Point, b: &Point, c: Rgb<u8>) {
        let (mut x0, mut y0) = self.pixel(a);
        let (x1, y1) = self.pixel(b);
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    pub fn cross(&mut self, p: &Point, half: i64, c: Rgb<u8>) {
        let (x, y) = self.pixel(p);
        for k in -half..=half {
            self.put(x + k, y + k, c);
            self.put(x + k, y - k, c);
        }
    }

    pub fn square(&mut self, p: &Point, half: i64, c: Rgb<u8>) {
        let (x, y) = self.pixel(p);
        for k in -half..=half {
            self.put(x + k, y - half, c);
            self.put(x + k, y + half, c);
            self.put(x - half, y + k, c);
            self.put(x + half, y + k, c);
        }
    }
}

fn draw_agents(canvas: &mut Canvas, trace: &RunTrace) {
    for w in trace.ticks.windows(2) {
        for a in &w[0].agents {
            if let Some(b) = w[1].agents.iter().find(|b| b.id == a.id) {
                canvas.line(&a.position, &b.position, AGENT);
            }
        }
    }
}

fn draw_robot(canvas: &mut Canvas, trace: &RunTrace, color: Option<Rgb<u8>>) {
    for w in trace.ticks.windows(2) {
        let c = color.unwrap_or_else(|| mode_color(w[0].mode));
        canvas.line(&w[0].robot.position, &w[1].robot.position, c);
    }
}

pub fn render_trajectory(trace: &RunTrace) -> Result<RgbImage, RenderError> {
    let map = trace.header.scenario.build_map().map_err(RunError::from)?;
    let mut canvas = Canvas::of_map(&map);
    draw_agents(&mut canvas, trace);
    draw_robot(&mut canvas, trace, None);
    for t in &trace.ticks {
        if let Some(d) = &t.decision {
            canvas.cross(&d.selected.point, 2, AVOIDANCE_POINT);
        }
    }
    if let Some(SavedContext::Pose { pose }) = trace.ticks.iter().find_map(|t| t.saved_context) {
        canvas.square(&pose.position, 3, SAVED_POSE);
    }
    Ok(canvas.image)
}

/// Both runs over the first run's map, robot paths in fixed colors.
pub fn render_comparison(first: &RunTrace, second: &RunTrace) -> Result<RgbImage, RenderError> {
    let map = first.header.scenario.build_map().map_err(RunError::from)?;
    let mut canvas = Canvas::of_map(&map);
    draw_agents(&mut canvas, first);
    draw_robot(&mut canvas, first, Some(FIRST_RUN));
    draw_robot(&mut canvas, second, Some(SECOND_RUN));
    Ok(canvas.image)
}

fn scaled_gray(frame: &GridFrame, rows_top_down: &[u8]) -> GrayImage {
    GrayImage::from_fn(frame.width as u32 * SCALE, frame.height as u32 * SCALE, |x, y| {
        let i = (y / SCALE) as usize * frame.width + (x / SCALE) as usize;
        image::Luma([rows_top_down[i]])
    })
}

/// Potential and feasibility images of a local field.
pub fn render_field(field: &LocalField) -> (GrayImage, GrayImage) {
    let f = &field.map.frame;
    (
        scaled_gray(f, &field.map.potential_gray()),
        scaled_gray(f, &field.map.feasible_gray()),
    )
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), RenderError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)?;
    Ok(())
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<(), RenderError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)?;
    Ok(())
}

/// Writes the plot set for `trace` into `out_dir`, plus a comparison when a
/// second trace is given. Returns the written paths.
pub fn emit_plots(trace: &RunTrace, out_dir: &Path, compare: Option<&RunTrace>) -> Result<Vec<PathBuf>, RenderError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let path = out_dir.join("trajectory.ppm");
    write_ppm(&path, &render_trajectory(trace)?)?;
    written.push(path);

    if let Some(rec) = trace.ticks.iter().find(|t| t.decision.is_some()) {
        if let Some(field) = field_from_record(&trace.header.scenario, rec)? {
            let (potential, feasible) = render_field(&field);
            for (name, img) in [("potential.pgm", potential), ("feasible.pgm", feasible)] {
                let path = out_dir.join(name);
                write_pgm(&path, &img)?;
                written.push(path);
            }
        }
    }
    if let Some(other) = compare {
        let path = out_dir.join("comparison.ppm");
        write_ppm(&path, &render_comparison(trace, other)?)?;
        written.push(path);
    }
    Ok(written)
}
