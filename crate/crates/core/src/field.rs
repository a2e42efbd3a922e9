//! Image-derived scalar and vector fields sampled by the dynamics.
//!
//! Coordinates are in pixels with pixel `(i, j)` centered at `x = (i, j)`;
//! rasters are row-major.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::pgm;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Minimum stimulus side length.
pub const MIN_SIDE: usize = 8;

/// Stimulus raster with intensities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "{channels} channels; expected 1 or 3"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "raster has {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-channel image from a function of pixel coordinates.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    /// Decodes PNG, JPEG or PNM. Grayscale sources keep one channel.
    pub fn open(path: &Path) -> Result<Self> {
        let dynimg = image::open(path).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_dynamic(&dynimg)
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            let rgb = img.to_rgb32f();
            let data = rgb
                .into_raw()
                .into_iter()
                .map(|v| f64::from(v).clamp(0.0, 1.0))
                .collect();
            Self::new(w, h, 3, data)
        } else {
            let luma = img.to_luma32f();
            let data = luma
                .into_raw()
                .into_iter()
                .map(|v| f64::from(v).clamp(0.0, 1.0))
                .collect();
            Self::new(w, h, 1, data)
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// One real value per pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} field",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite field value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation at a continuous point; points outside the
    /// pixel-center rectangle are clamped to it first.
    pub fn sample(&self, p: Vec2) -> f64 {
        let (i0, i1, fx) = bilinear_axis(p.x, self.width);
        let (j0, j1, fy) = bilinear_axis(p.y, self.height);
        let row0 = j0 * self.width;
        let row1 = j1 * self.width;
        let top = lerp(self.values[row0 + i0], self.values[row0 + i1], fx);
        let bottom = lerp(self.values[row1 + i0], self.values[row1 + i1], fx);
        lerp(top, bottom, fy)
    }
}

/// One gradient vector per pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    values: Vec<Vec2>,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![Vec2::ZERO; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> Vec2 {
        self.values[y * self.width + x]
    }

    pub fn sample(&self, p: Vec2) -> Vec2 {
        let (i0, i1, fx) = bilinear_axis(p.x, self.width);
        let (j0, j1, fy) = bilinear_axis(p.y, self.height);
        let row0 = j0 * self.width;
        let row1 = j1 * self.width;
        let (a, b) = (self.values[row0 + i0], self.values[row0 + i1]);
        let (c, d) = (self.values[row1 + i0], self.values[row1 + i1]);
        let top = Vec2::new(lerp(a.x, b.x, fx), lerp(a.y, b.y, fx));
        let bottom = Vec2::new(lerp(c.x, d.x, fx), lerp(c.y, d.y, fx));
        Vec2::new(lerp(top.x, bottom.x, fy), lerp(top.y, bottom.y, fy))
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Returns the two neighbouring indices and the fractional weight of the
/// upper one, after clamping `x` into `[0, n-1]`.
#[inline]
fn bilinear_axis(x: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let max = (n - 1) as f64;
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max) };
    let i0 = (x.floor() as usize).min(n - 2);
    (i0, i0 + 1, x - i0 as f64)
}

pub fn to_brightness(img: &Image) -> ScalarField {
    let values = match img.channels {
        1 => img.data.clone(),
        _ => img
            .data
            .chunks_exact(3)
            .map(|px| (LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2]).clamp(0.0, 1.0))
            .collect(),
    };
    ScalarField {
        width: img.width,
        height: img.height,
        values,
    }
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive, got {sigma}");
    let radius = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable Gaussian convolution with clamp-to-border edges.
pub fn gaussian_blur(f: &ScalarField, sigma: f64) -> ScalarField {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (f.width as i64, f.height as i64);

    let mut tmp = vec![0.0; f.values.len()];
    for y in 0..h {
        let row = &f.values[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, tap) in kernel.iter().enumerate() {
                let xx = (x + k as i64 - r).clamp(0, w - 1);
                acc += tap * row[xx as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }

    let mut out = vec![0.0; f.values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, tap) in kernel.iter().enumerate() {
                let yy = (y + k as i64 - r).clamp(0, h - 1);
                acc += tap * tmp[(yy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    ScalarField {
        width: f.width,
        height: f.height,
        values: out,
    }
}

/// Derivative along one axis: central differences inside, one-sided at the
/// two borders.
#[inline]
fn diff(at: impl Fn(usize) -> f64, i: usize, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 {
        at(1) - at(0)
    } else if i == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        0.5 * (at(i + 1) - at(i - 1))
    }
}

pub fn field_gradient(f: &ScalarField) -> VectorField {
    let (w, h) = (f.width, f.height);
    let v = &f.values;
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = diff(|i| v[y * w + i], x, w);
            let dy = diff(|j| v[j * w + x], y, h);
            values.push(Vec2::new(dx, dy));
        }
    }
    VectorField {
        width: w,
        height: h,
        values,
    }
}

pub fn squared_gradient_magnitude(f: &ScalarField) -> ScalarField {
    let grad = field_gradient(f);
    ScalarField {
        width: f.width,
        height: f.height,
        values: grad.values.iter().map(|g| g.norm_sq()).collect(),
    }
}

/// Catmull-Rom cubic convolution weight (a = -0.5).
fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Bicubic resize with corner-aligned sampling: the four corner pixel
/// centers of the source map onto those of the target.
pub fn resize_bicubic(f: &ScalarField, width: usize, height: usize) -> ScalarField {
    let axis_map = |dst: usize, src_n: usize, dst_n: usize| -> f64 {
        if dst_n <= 1 {
            0.0
        } else {
            dst as f64 * (src_n - 1) as f64 / (dst_n - 1) as f64
        }
    };
    let (sw, sh) = (f.width as i64, f.height as i64);
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let sy = axis_map(y, f.height, height);
        let y0 = sy.floor() as i64;
        let wy: Vec<(i64, f64)> = (-1..=2)
            .map(|d| ((y0 + d).clamp(0, sh - 1), cubic_weight(sy - (y0 + d) as f64)))
            .collect();
        for x in 0..width {
            let sx = axis_map(x, f.width, width);
            let x0 = sx.floor() as i64;
            let mut acc = 0.0;
            for &(yy, wgt_y) in &wy {
                if wgt_y == 0.0 {
                    continue;
                }
                for d in -1..=2 {
                    let xx = (x0 + d).clamp(0, sw - 1);
                    let wgt_x = cubic_weight(sx - (x0 + d) as f64);
                    acc += wgt_y * wgt_x * f.values[(yy * sw + xx) as usize];
                }
            }
            values.push(acc);
        }
    }
    ScalarField {
        width,
        height,
        values,
    }
}

/// Rescales to [0,1] by min-max; a constant field (up to round-off
/// relative to its magnitude) becomes all zeros.
pub fn minmax_normalize(f: &ScalarField) -> ScalarField {
    let (lo, hi) = (f.min(), f.max());
    let span = hi - lo;
    let values = if span > 1e-12 * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
        f.values.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.0; f.values.len()]
    };
    ScalarField {
        width: f.width,
        height: f.height,
        values,
    }
}

/// Reads a 16-bit top-down map (binary PGM or grayscale PNG) into [0,1],
/// resized to `target` and renormalized.
pub fn load_topdown_map(path: &Path, target: (usize, usize)) -> Result<ScalarField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = if bytes.starts_with(b"P5") {
        let img = pgm::decode_pgm(&bytes).map_err(|reason| Error::Decode {
            path: path.to_path_buf(),
            reason,
        })?;
        ScalarField::new(img.width, img.height, img.to_unit())?
    } else if bytes.starts_with(b"\x89PNG") {
        let dynimg = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        let luma = match dynimg {
            image::DynamicImage::ImageLuma16(buf) => buf,
            other => {
                return Err(Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                    reason: format!("PNG color type {:?}; expected 16-bit grayscale", other.color()),
                })
            }
        };
        let (w, h) = (luma.width() as usize, luma.height() as usize);
        if w == 0 || h == 0 {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "zero-area map".into(),
            });
        }
        let values = luma.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
        ScalarField::new(w, h, values)?
    } else {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "not a binary PGM (P5) or PNG file".into(),
        });
    };
    Ok(prepare_topdown(&raw, target))
}

/// Resize (when needed), clamp bicubic overshoot into [0,1], renormalize.
pub fn prepare_topdown(raw: &ScalarField, (width, height): (usize, usize)) -> ScalarField {
    let mut resized = if (raw.width, raw.height) == (width, height) {
        raw.clone()
    } else {
        resize_bicubic(raw, width, height)
    };
    resized.values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    minmax_normalize(&resized)
}

/// Immutable set of fields the dynamics samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    brightness: ScalarField,
    peripheral: ScalarField,
    g_b: ScalarField,
    g_p: ScalarField,
    grad_g_b: VectorField,
    grad_g_p: VectorField,
    topdown: Option<(ScalarField, VectorField)>,
}

/// Default peripheral blur: one sixteenth of the shorter side.
pub fn default_peripheral_sigma(width: usize, height: usize) -> f64 {
    width.min(height) as f64 / 16.0
}

impl FieldSet {
    /// Builds every field from the stimulus; `topdown` must already be at
    /// stimulus resolution with values in [0,1].
    pub fn build(
        img: &Image,
        topdown: Option<ScalarField>,
        peripheral_sigma: Option<f64>,
    ) -> Result<Self> {
        let sigma = peripheral_sigma
            .unwrap_or_else(|| default_peripheral_sigma(img.width, img.height));
        if !(sigma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "peripheral blur sigma must be positive, got {sigma}"
            )));
        }
        let brightness = to_brightness(img);
        let peripheral = gaussian_blur(&brightness, sigma);
        let g_b = squared_gradient_magnitude(&brightness);
        let g_p = squared_gradient_magnitude(&peripheral);
        let grad_g_b = field_gradient(&g_b);
        let grad_g_p = field_gradient(&g_p);
        let topdown = match topdown {
            Some(m) => {
                if (m.width, m.height) != (img.width, img.height) {
                    return Err(Error::DimensionMismatch(format!(
                        "top-down map is {}x{}, stimulus is {}x{}",
                        m.width, m.height, img.width, img.height
                    )));
                }
                if m.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidParams("top-down map outside [0,1]".into()));
                }
                let grad = field_gradient(&m);
                Some((m, grad))
            }
            None => None,
        };
        Ok(Self {
            brightness,
            peripheral,
            g_b,
            g_p,
            grad_g_b,
            grad_g_p,
            topdown,
        })
    }

    /// Same field set without the top-down map.
    pub fn without_topdown(&self) -> Self {
        Self {
            topdown: None,
            ..self.clone()
        }
    }

    pub fn brightness(&self) -> &ScalarField {
        &self.brightness
    }

    pub fn peripheral(&self) -> &ScalarField {
        &self.peripheral
    }

    pub fn g_b(&self) -> &ScalarField {
        &self.g_b
    }

    pub fn g_p(&self) -> &ScalarField {
        &self.g_p
    }

    pub fn grad_g_b(&self) -> &VectorField {
        &self.grad_g_b
    }

    pub fn grad_g_p(&self) -> &VectorField {
        &self.grad_g_p
    }

    pub fn topdown_map(&self) -> Option<&ScalarField> {
        self.topdown.as_ref().map(|(m, _)| m)
    }

    pub fn grad_topdown(&self) -> Option<&VectorField> {
        self.topdown.as_ref().map(|(_, g)| g)
    }

    /// Retina extent `(l1, l2)` = `(width, height)`.
    pub fn retina(&self) -> (f64, f64) {
        (self.brightness.width as f64, self.brightness.height as f64)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.brightness.width, self.brightness.height)
    }
}

/// Builds the field set, loading the top-down map from disk when given.
pub fn build_fieldset(
    img: &Image,
    topdown_path: Option<&Path>,
    peripheral_sigma: Option<f64>,
) -> Result<FieldSet> {
    let topdown = topdown_path
        .map(|p| load_topdown_map(p, (img.width, img.height)))
        .transpose()?;
    FieldSet::build(img, topdown, peripheral_sigma)
}
