//! Scanpath overlay figures: simulated path in red, human path in green,
//! a square at each starting fixation and an arrow per saccade.

use std::path::Path;

use anyhow::{Context, Result};
use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_circle_mut, draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use gazelab_core::{Image, Scanpath};

pub const SIMULATED: Rgb<u8> = Rgb([230, 30, 30]);
pub const HUMAN: Rgb<u8> = Rgb([30, 200, 60]);

const START_HALF: i32 = 5;
const FIXATION_RADIUS: i32 = 3;
const HEAD_LEN: f32 = 7.0;
const HEAD_ANGLE: f32 = 0.45;

/// Marks drawn on a figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub squares: usize,
    pub arrows: usize,
}

/// Dimmed grayscale copy of the stimulus, so colored marks stand out.
fn backdrop(img: &Image) -> RgbImage {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let data = img.data();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = (y as usize * w + x as usize) * c;
        let v = if c == 3 {
            0.299 * data[i] + 0.587 * data[i + 1] + 0.114 * data[i + 2]
        } else {
            data[i]
        };
        let g = (40.0 + 140.0 * v).round() as u8;
        Rgb([g, g, g])
    })
}

fn arrow(canvas: &mut RgbImage, from: (f32, f32), to: (f32, f32), color: Rgb<u8>) {
    draw_line_segment_mut(canvas, from, to, color);
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    if dx.hypot(dy) < 1e-3 {
        return;
    }
    let back = dy.atan2(dx) + std::f32::consts::PI;
    for side in [-HEAD_ANGLE, HEAD_ANGLE] {
        let a = back + side;
        draw_line_segment_mut(canvas, to, (to.0 + HEAD_LEN * a.cos(), to.1 + HEAD_LEN * a.sin()), color);
    }
}

fn draw_path(canvas: &mut RgbImage, sp: &Scanpath, color: Rgb<u8>, stats: &mut RenderStats) {
    let pts: Vec<(f32, f32)> = sp.fixations.iter().map(|f| (f.x as f32, f.y as f32)).collect();
    let Some(&first) = pts.first() else { return };
    for pair in pts.windows(2) {
        arrow(canvas, pair[0], pair[1], color);
        stats.arrows += 1;
    }
    for &(x, y) in &pts[1..] {
        draw_hollow_circle_mut(canvas, (x.round() as i32, y.round() as i32), FIXATION_RADIUS, color);
    }
    let side = (2 * START_HALF + 1) as u32;
    let corner = (first.0.round() as i32 - START_HALF, first.1.round() as i32 - START_HALF);
    draw_hollow_rect_mut(canvas, Rect::at(corner.0, corner.1).of_size(side, side), color);
    stats.squares += 1;
}

/// Draws the simulated scanpath and, if given, a human one on the stimulus.
pub fn scanpath_figure(img: &Image, simulated: &Scanpath, human: Option<&Scanpath>) -> (RgbImage, RenderStats) {
    let mut canvas = backdrop(img);
    let mut stats = RenderStats::default();
    if let Some(h) = human {
        draw_path(&mut canvas, h, HUMAN, &mut stats);
    }
    draw_path(&mut canvas, simulated, SIMULATED, &mut stats);
    (canvas, stats)
}

pub fn save_png(canvas: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    canvas
        .save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("cannot write {}", path.display()))
}
