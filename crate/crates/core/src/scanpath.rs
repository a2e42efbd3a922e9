//! Fixation sequences: detection from gaze samples, CSV interchange and
//! baseline generators.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub t_start: f64,
    pub duration: f64,
    pub x: f64,
    pub y: f64,
}

impl Fixation {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    pub fixations: Vec<Fixation>,
    pub width: usize,
    pub height: usize,
}

impl Scanpath {
    pub fn new(fixations: Vec<Fixation>, width: usize, height: usize) -> Self {
        Self {
            fixations,
            width,
            height,
        }
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.fixations.iter().map(Fixation::pos).collect()
    }

    /// Checks ordering, non-overlap and finiteness.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (i, f) in self.fixations.iter().enumerate() {
            if !(f.x.is_finite() && f.y.is_finite() && f.t_start.is_finite()) {
                return Err(format!("fixation {i}: non-finite field"));
            }
            if !(f.duration >= 0.0) {
                return Err(format!("fixation {i}: negative duration {}", f.duration));
            }
        }
        for (i, w) in self.fixations.windows(2).enumerate() {
            if !(w[1].t_start > w[0].t_start) {
                return Err(format!(
                    "fixation {}: t_start {} not after {}",
                    i + 1,
                    w[1].t_start,
                    w[0].t_start
                ));
            }
            // allow microsecond rounding of CSV values
            if w[0].t_start + w[0].duration > w[1].t_start + 1e-6 {
                return Err(format!("fixations {i} and {} overlap in time", i + 1));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationDetectorParams {
    /// Maximum distance from the anchor sample, px.
    pub maxdist: f64,
    /// Minimum fixation duration, s.
    pub mindur: f64,
}

impl Default for FixationDetectorParams {
    fn default() -> Self {
        Self {
            maxdist: 25.0,
            mindur: 0.050,
        }
    }
}

/// Dispersion-from-anchor fixation detection.
///
/// A fixation opens at an anchor sample and absorbs following samples while
/// they stay within `maxdist` of the anchor. The first sample outside closes
/// it and becomes the next anchor. Fixations shorter than `mindur` are
/// dropped; the reported position is the centroid of the members.
pub fn detect_fixations(
    samples: &[(f64, Vec2)],
    params: &FixationDetectorParams,
    dims: (usize, usize),
) -> Result<Scanpath> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let mut fixations = Vec::new();
    let mut start = 0;
    while start < samples.len() {
        let anchor = samples[start].1;
        let mut end = start + 1;
        while end < samples.len() && samples[end].1.distance(anchor) <= params.maxdist {
            end += 1;
        }
        let members = &samples[start..end];
        let t0 = members[0].0;
        let duration = members[members.len() - 1].0 - t0;
        if duration >= params.mindur {
            let n = members.len() as f64;
            let (sx, sy) = members
                .iter()
                .fold((0.0, 0.0), |(ax, ay), (_, p)| (ax + p.x, ay + p.y));
            fixations.push(Fixation {
                t_start: t0,
                duration,
                x: sx / n,
                y: sy / n,
            });
        }
        start = end;
    }
    Ok(Scanpath::new(fixations, dims.0, dims.1))
}

pub fn scanpath_from_trajectory(tr: &Trajectory, params: &FixationDetectorParams) -> Result<Scanpath> {
    let samples: Vec<(f64, Vec2)> = tr.points().collect();
    detect_fixations(&samples, params, (tr.width, tr.height))
}

pub const CSV_HEADER: &str = "observer,t_start,duration,x,y";

pub fn write_scanpath_csv<W: Write>(mut w: W, observer: &str, sp: &Scanpath) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for f in &sp.fixations {
        writeln!(
            w,
            "{observer},{:.6},{:.6},{:.6},{:.6}",
            f.t_start, f.duration, f.x, f.y
        )?;
    }
    Ok(())
}

pub fn save_scanpath_csv(path: &Path, observer: &str, sp: &Scanpath) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_scanpath_csv(&mut w, observer, sp)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses a scanpath CSV, grouping rows by observer (ordered by name).
pub fn read_scanpath_csv<R: BufRead>(
    r: R,
    path: &Path,
    dims: (usize, usize),
) -> Result<BTreeMap<String, Scanpath>> {
    let mut out: BTreeMap<String, Scanpath> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 {
            if line != CSV_HEADER {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    reason: format!("expected header '{CSV_HEADER}', got '{line}'"),
                });
            }
            continue;
        }
        let bad = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad(format!("expected 5 columns, got {}", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
        let fix = Fixation {
            t_start: num(cols[1])?,
            duration: num(cols[2])?,
            x: num(cols[3])?,
            y: num(cols[4])?,
        };
        out.entry(cols[0].to_string())
            .or_insert_with(|| Scanpath::new(Vec::new(), dims.0, dims.1))
            .fixations
            .push(fix);
    }
    Ok(out)
}

pub fn load_scanpath_csv(path: &Path, dims: (usize, usize)) -> Result<BTreeMap<String, Scanpath>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scanpath_csv(BufReader::new(f), path, dims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Fixations uniform over the image.
    Random,
    /// Fixations Gaussian around the image center.
    Center,
}

/// Spread of the center baseline as a fraction of `(width, height)`.
pub const CENTER_SIGMA_FRAC: f64 = 1.0 / 6.0;

pub fn baseline_scanpath(kind: BaselineKind, n_fix: usize, dims: (usize, usize), seed: u64) -> Scanpath {
    baseline_scanpath_with_sigma(kind, n_fix, dims, seed, CENTER_SIGMA_FRAC)
}

/// As [`baseline_scanpath`] with an explicit center spread.
pub fn baseline_scanpath_with_sigma(
    kind: BaselineKind,
    n_fix: usize,
    (w, h): (usize, usize),
    seed: u64,
    sigma_frac: f64,
) -> Scanpath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (w as f64, h as f64);
    let (cx, cy) = (wf / 2.0, hf / 2.0);
    let fixations = (0..n_fix.max(1))
        .map(|i| {
            let (x, y) = match kind {
                BaselineKind::Random => (rng.random_range(0.0..wf), rng.random_range(0.0..hf)),
                BaselineKind::Center => {
                    let nx = Normal::new(0.0, 1.0).expect("unit normal");
                    let (zx, zy): (f64, f64) = (nx.sample(&mut rng), nx.sample(&mut rng));
                    (
                        (cx + sigma_frac * wf * zx).clamp(0.0, wf),
                        (cy + sigma_frac * hf * zy).clamp(0.0, hf),
                    )
                }
            };
            Fixation {
                t_start: 0.3 * i as f64,
                duration: 0.25,
                x,
                y,
            }
        })
        .collect();
    Scanpath::new(fixations, w, h)
}
