//! Saliency maps built from simulated gaze occupancy, and the map
//! optimizations applied before scoring.

use std::path::{Path, PathBuf};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::field::{gaussian_blur, Image, ScalarField};
use crate::geom::Vec2;
use crate::pgm;
use crate::scanpath::Scanpath;

/// Nonnegative density over pixels, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    density: Vec<f64>,
}

impl SaliencyMap {
    /// Normalizes `values` to unit sum. Fails on negative, non-finite or
    /// all-zero input.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParams(
                "saliency values must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParams("saliency map has zero mass".into()));
        }
        Ok(Self {
            width,
            height,
            density: values.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn uniform(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            density: vec![1.0 / n as f64; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.density[y * self.width + x]
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField::new(self.width, self.height, self.density.clone())
            .expect("saliency density is finite")
    }

    fn renormalized(width: usize, height: usize, values: Vec<f64>) -> Self {
        let total: f64 = values.iter().sum();
        Self {
            width,
            height,
            density: values.into_iter().map(|v| v / total).collect(),
        }
    }
}

/// Pixel containing a continuous point, or `None` off the image.
pub fn pixel_of(p: Vec2, (w, h): (usize, usize)) -> Option<(usize, usize)> {
    let (fx, fy) = ((p.x + 0.5).floor(), (p.y + 0.5).floor());
    (fx >= 0.0 && fy >= 0.0 && fx < w as f64 && fy < h as f64).then_some((fx as usize, fy as usize))
}

/// Unnormalized time-weighted occupancy histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    width: usize,
    height: usize,
    mass: Vec<f64>,
    in_retina: usize,
}

impl Occupancy {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mass: vec![0.0; width * height],
            in_retina: 0,
        }
    }

    /// Deposits `dt` per sample into its pixel; off-image samples are skipped.
    pub fn add_trajectory(&mut self, tr: &Trajectory) {
        for s in &tr.samples {
            if let Some((x, y)) = pixel_of(s.x, (self.width, self.height)) {
                self.mass[y * self.width + x] += tr.dt;
                self.in_retina += 1;
            }
        }
    }

    /// Deposits one unit per fixation.
    pub fn add_fixations(&mut self, sp: &Scanpath) {
        for f in &sp.fixations {
            if let Some((x, y)) = pixel_of(f.pos(), (self.width, self.height)) {
                self.mass[y * self.width + x] += 1.0;
                self.in_retina += 1;
            }
        }
    }

    pub fn merge(mut self, other: &Occupancy) -> Self {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        self.in_retina += other.in_retina;
        self
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn in_retina_samples(&self) -> usize {
        self.in_retina
    }

    pub fn into_map(self) -> Result<SaliencyMap> {
        if self.in_retina == 0 {
            return Err(Error::NoInRetinaSamples);
        }
        SaliencyMap::from_values(self.width, self.height, self.mass)
    }
}

/// Time-weighted occupancy of all trajectories, normalized.
pub fn accumulate(trajectories: &[Trajectory], dims: (usize, usize)) -> Result<SaliencyMap> {
    let mut occ = Occupancy::new(dims.0, dims.1);
    for tr in trajectories {
        if (tr.width, tr.height) != dims {
            return Err(Error::DimensionMismatch(format!(
                "trajectory on {}x{}, map is {}x{}",
                tr.width, tr.height, dims.0, dims.1
            )));
        }
        occ.add_trajectory(tr);
    }
    occ.into_map()
}

/// Fixation-count map, the alternative to time weighting.
pub fn accumulate_fixations(scanpaths: &[Scanpath], dims: (usize, usize)) -> Result<SaliencyMap> {
    let mut occ = Occupancy::new(dims.0, dims.1);
    for sp in scanpaths {
        occ.add_fixations(sp);
    }
    occ.into_map()
}

pub fn default_blur_sigma(width: usize) -> f64 {
    width as f64 / 32.0
}

pub fn blur_map(s: &SaliencyMap, sigma: f64) -> SaliencyMap {
    let blurred = gaussian_blur(&s.to_field(), sigma);
    SaliencyMap::renormalized(s.width, s.height, blurred.into_values())
}

/// Isotropic-per-axis Gaussian prior at the image center, `sigma = (w/4, h/4)`.
pub fn center_prior(width: usize, height: usize) -> Vec<f64> {
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let (sx, sy) = (width as f64 / 4.0, height as f64 / 4.0);
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = (y as f64 - cy) / sy;
        for x in 0..width {
            let dx = (x as f64 - cx) / sx;
            out.push((-0.5 * (dx * dx + dy * dy)).exp());
        }
    }
    out
}

pub fn center_bias(s: &SaliencyMap) -> SaliencyMap {
    let prior = center_prior(s.width, s.height);
    let values: Vec<f64> = s.density.iter().zip(&prior).map(|(a, b)| a * b).collect();
    if values.iter().sum::<f64>() > 0.0 {
        SaliencyMap::renormalized(s.width, s.height, values)
    } else {
        // all mass sat where the prior underflows
        s.clone()
    }
}

/// Monotone histogram specification onto `target`'s value distribution.
///
/// Pixels of `s` are ranked by value (ties by index) and receive the target
/// value of matching rank. Pixels tied in `s` share the mean target value
/// over their rank range, so rank order is preserved and ties stay tied.
pub fn histogram_match(s: &SaliencyMap, target: &SaliencyMap) -> Result<SaliencyMap> {
    if s.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "map {}x{} vs target {}x{}",
            s.width, s.height, target.width, target.height
        )));
    }
    let mut order: Vec<usize> = (0..s.density.len()).collect();
    order.sort_by(|&a, &b| s.density[a].total_cmp(&s.density[b]).then(a.cmp(&b)));
    let mut sorted_target = target.density.clone();
    sorted_target.sort_by(f64::total_cmp);

    let mut out = vec![0.0; s.density.len()];
    let mut start = 0;
    while start < order.len() {
        let v = s.density[order[start]];
        let mut end = start + 1;
        while end < order.len() && s.density[order[end]] == v {
            end += 1;
        }
        let group = &sorted_target[start..end];
        let value = if group[0] == group[group.len() - 1] {
            group[0]
        } else {
            group.iter().sum::<f64>() / group.len() as f64
        };
        for &idx in &order[start..end] {
            out[idx] = value;
        }
        start = end;
    }
    SaliencyMap::from_values(s.width, s.height, out)
}

/// Optimization applied to accumulated maps before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    None,
    Blur,
    CenterBias,
    CenterBiasHistMatch,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::None => "none",
            Pipeline::Blur => "blur",
            Pipeline::CenterBias => "center_bias",
            Pipeline::CenterBiasHistMatch => "center_bias+histmatch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Pipeline::None),
            "blur" => Some(Pipeline::Blur),
            "center_bias" => Some(Pipeline::CenterBias),
            "center_bias+histmatch" => Some(Pipeline::CenterBiasHistMatch),
            _ => None,
        }
    }

    /// Applies the pipeline; `target` is required for histogram matching.
    pub fn apply(
        self,
        s: &SaliencyMap,
        blur_sigma: f64,
        target: Option<&SaliencyMap>,
    ) -> Result<SaliencyMap> {
        match self {
            Pipeline::None => Ok(s.clone()),
            Pipeline::Blur => Ok(blur_map(s, blur_sigma)),
            Pipeline::CenterBias => Ok(center_bias(s)),
            Pipeline::CenterBiasHistMatch => {
                let target = target.ok_or_else(|| {
                    Error::InvalidParams("histogram matching needs a target map".into())
                })?;
                histogram_match(&center_bias(s), target)
            }
        }
    }
}

fn sidecar_path(pgm_path: &Path) -> PathBuf {
    pgm_path.with_extension("scale.txt")
}

/// Writes the map as a min-max scaled 16-bit PGM plus a sidecar holding the
/// scale so densities can be recovered.
pub fn save_map(s: &SaliencyMap, pgm_path: &Path) -> Result<()> {
    let lo = s.density.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let unit: Vec<f64> = if span > 0.0 {
        s.density.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.0; s.density.len()]
    };
    pgm::write_pgm16(pgm_path, s.width, s.height, &pgm::quantize_unit(&unit))?;
    let side = sidecar_path(pgm_path);
    let text = format!(
        "# value = min + (sample / 65535) * (max - min)\nwidth={}\nheight={}\nmin={:e}\nmax={:e}\n",
        s.width, s.height, lo, hi
    );
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

/// Reads a map written by [`save_map`]; without a sidecar the PGM samples
/// are used as relative densities.
pub fn load_map(pgm_path: &Path) -> Result<SaliencyMap> {
    let img = pgm::read_pgm(pgm_path)?;
    let unit = img.to_unit();
    let side = sidecar_path(pgm_path);
    let values = if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let mut lo = None;
        let mut hi = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |v: &str| {
                v.parse::<f64>().map_err(|e| Error::Parse {
                    path: side.clone(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            };
            match line.split_once('=') {
                Some(("min", v)) => lo = Some(parse(v)?),
                Some(("max", v)) => hi = Some(parse(v)?),
                _ => {}
            }
        }
        let (lo, hi) = lo.zip(hi).ok_or_else(|| Error::Parse {
            path: side.clone(),
            line: 0,
            reason: "missing min/max".into(),
        })?;
        unit.iter().map(|u| lo + u * (hi - lo)).collect()
    } else {
        unit
    };
    SaliencyMap::from_values(img.width, img.height, values)
}

/// Linear segments through viridis anchor colors.
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

pub fn colormap(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (v.floor() as usize).min(VIRIDIS.len() - 2);
    let t = v - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Map colored by [`colormap`] and alpha-blended over the stimulus
/// (opacity grows with the max-normalized density).
pub fn heatmap_image(s: &SaliencyMap, img: &Image) -> Result<image::RgbImage> {
    if (img.width(), img.height()) != s.dims() {
        return Err(Error::DimensionMismatch(format!(
            "stimulus {}x{} vs map {}x{}",
            img.width(),
            img.height(),
            s.width,
            s.height
        )));
    }
    let peak = s.density.iter().copied().fold(0.0, f64::max);
    let mut out = image::RgbImage::new(s.width as u32, s.height as u32);
    let data = img.data();
    for (i, px) in out.pixels_mut().enumerate() {
        let base = if img.channels() == 3 {
            [data[3 * i], data[3 * i + 1], data[3 * i + 2]]
        } else {
            [data[i]; 3]
        };
        let v = if peak > 0.0 { s.density[i] / peak } else { 0.0 };
        let alpha = 0.7 * v.sqrt();
        let c = colormap(v);
        for ch in 0..3 {
            let blended = (1.0 - alpha) * base[ch] * 255.0 + alpha * c[ch];
            px.0[ch] = blended.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

pub fn render_heatmap(s: &SaliencyMap, img: &Image, out: &Path) -> Result<()> {
    let rgb = heatmap_image(s, img)?;
    rgb.save_with_format(out, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(out, io),
            other => Error::Decode {
                path: out.to_path_buf(),
                reason: other.to_string(),
            },
        })
}
