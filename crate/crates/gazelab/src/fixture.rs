//! Small synthetic dataset in the standard layout, used by the tests and
//! handy for trying the tool without downloading anything.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use gazelab_core::field::{gaussian_blur, minmax_normalize};
use gazelab_core::pgm::{quantize_unit, write_pgm16};
use gazelab_core::scanpath::save_scanpath_csv;
use gazelab_core::{Fixation, ScalarField, Scanpath};

pub const WIDTH: usize = 160;
pub const HEIGHT: usize = 120;
/// Downsampling factor of the stored top-down maps.
pub const CF_STRIDE: usize = 8;
pub const OBSERVERS: usize = 4;
pub const FIXMAP_SIGMA: f64 = 8.0;

struct Scene {
    stem: &'static str,
    tint: [f64; 3],
    blobs: &'static [(f64, f64)],
}

const SCENES: [Scene; 3] = [
    Scene {
        stem: "blob_ne",
        tint: [1.0, 0.8, 0.6],
        blobs: &[(120.0, 35.0)],
    },
    Scene {
        stem: "blob_sw",
        tint: [0.6, 0.9, 1.0],
        blobs: &[(40.0, 85.0)],
    },
    Scene {
        stem: "two_blobs",
        tint: [1.0, 1.0, 1.0],
        blobs: &[(35.0, 30.0), (125.0, 90.0)],
    },
];

fn blob_field(blobs: &[(f64, f64)], sigma: f64, scale: f64, w: usize, h: usize) -> ScalarField {
    ScalarField::from_fn(w, h, |x, y| {
        let (px, py) = (x as f64 * scale, y as f64 * scale);
        blobs
            .iter()
            .map(|&(bx, by)| (-((px - bx).powi(2) + (py - by).powi(2)) / (2.0 * sigma * sigma)).exp())
            .fold(0.0, f64::max)
    })
}

fn stimulus(scene: &Scene) -> image::RgbImage {
    let f = blob_field(scene.blobs, 14.0, 1.0, WIDTH, HEIGHT);
    image::RgbImage::from_fn(WIDTH as u32, HEIGHT as u32, |x, y| {
        let v = 0.2 + 0.75 * f.get(x as usize, y as usize);
        image::Rgb(scene.tint.map(|t| (255.0 * (v * t).clamp(0.0, 1.0)).round() as u8))
    })
}

fn observer(scene: &Scene, rng: &mut ChaCha8Rng, index: usize) -> Scanpath {
    let noise = Normal::new(0.0, 6.0).expect("valid sigma");
    let n = 5 + index % 3;
    let (w, h) = (WIDTH as f64, HEIGHT as f64);
    let fixations = (0..n)
        .map(|i| {
            let (cx, cy) = if i == 0 {
                (w / 2.0, h / 2.0)
            } else {
                scene.blobs[(i + index) % scene.blobs.len()]
            };
            Fixation {
                t_start: 0.05 + 0.3 * i as f64,
                duration: 0.25,
                x: (cx + noise.sample(rng)).clamp(0.0, w - 1.0),
                y: (cy + noise.sample(rng)).clamp(0.0, h - 1.0),
            }
        })
        .collect();
    Scanpath::new(fixations, WIDTH, HEIGHT)
}

fn fixmap(paths: &[Scanpath]) -> ScalarField {
    let mut v = vec![0.0; WIDTH * HEIGHT];
    for f in paths.iter().flat_map(|p| &p.fixations) {
        let (x, y) = (f.x.round() as usize, f.y.round() as usize);
        v[y.min(HEIGHT - 1) * WIDTH + x.min(WIDTH - 1)] += 1.0;
    }
    let raw = ScalarField::new(WIDTH, HEIGHT, v).expect("fixmap size");
    minmax_normalize(&gaussian_blur(&raw, FIXMAP_SIGMA))
}

fn write_map(path: &Path, f: &ScalarField) -> Result<()> {
    write_pgm16(path, f.width(), f.height(), &quantize_unit(f.values()))?;
    Ok(())
}

/// Writes three stimuli with observers, fixation maps and top-down maps.
/// Output depends only on `seed`.
pub fn make_fixture(root: &Path, seed: u64) -> Result<()> {
    for sub in ["stimuli", "scanpaths", "fixmaps", "cfmaps"] {
        fs::create_dir_all(root.join(sub)).with_context(|| format!("cannot create {}/{sub}", root.display()))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for scene in &SCENES {
        let png = root.join("stimuli").join(format!("{}.png", scene.stem));
        stimulus(scene)
            .save_with_format(&png, image::ImageFormat::Png)
            .with_context(|| format!("cannot write {}", png.display()))?;

        let dir = root.join("scanpaths").join(scene.stem);
        fs::create_dir_all(&dir)?;
        let paths: Vec<Scanpath> = (0..OBSERVERS).map(|i| observer(scene, &mut rng, i)).collect();
        for (i, sp) in paths.iter().enumerate() {
            let name = format!("obs{}", i + 1);
            save_scanpath_csv(&dir.join(format!("{name}.csv")), &name, sp)?;
        }

        write_map(&root.join("fixmaps").join(format!("{}.pgm", scene.stem)), &fixmap(&paths))?;
        let cf = blob_field(
            scene.blobs,
            16.0,
            CF_STRIDE as f64,
            WIDTH / CF_STRIDE,
            HEIGHT / CF_STRIDE,
        );
        write_map(&root.join("cfmaps").join(format!("{}.pgm", scene.stem)), &minmax_normalize(&cf))?;
    }
    Ok(())
}
