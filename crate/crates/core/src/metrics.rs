//! Saliency scores (AUC-Judd, NSS), scanpath similarity (string edit,
//! scaled time-delay embedding) and dataset aggregation.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::saliency::SaliencyMap;
use crate::scanpath::Scanpath;

/// Fixations pooled across observers for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    points: Vec<Vec2>,
    width: usize,
    height: usize,
}

impl FixationSet {
    /// Points must be finite and lie in `[0, w] x [0, h]`.
    pub fn new(points: Vec<Vec2>, (width, height): (usize, usize)) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyFixations);
        }
        if let Some(p) = points.iter().find(|p| {
            !p.is_finite() || p.x < 0.0 || p.y < 0.0 || p.x > width as f64 || p.y > height as f64
        }) {
            return Err(Error::InvalidParams(format!(
                "fixation ({}, {}) outside {width}x{height} image",
                p.x, p.y
            )));
        }
        Ok(Self {
            points,
            width,
            height,
        })
    }

    pub fn from_scanpaths<'a>(
        scanpaths: impl IntoIterator<Item = &'a Scanpath>,
        dims: (usize, usize),
    ) -> Result<Self> {
        let pts = scanpaths
            .into_iter()
            .flat_map(|sp| sp.fixations.iter().map(|f| f.pos()))
            .collect();
        Self::new(pts, dims)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Linear index of the pixel nearest each fixation.
    pub fn pixel_indices(&self) -> Vec<usize> {
        self.points
            .iter()
            .map(|p| {
                let x = (p.x.round() as usize).min(self.width - 1);
                let y = (p.y.round() as usize).min(self.height - 1);
                y * self.width + x
            })
            .collect()
    }
}

fn check_dims(s: &SaliencyMap, f: &FixationSet) -> Result<()> {
    if s.dims() != f.dims() {
        return Err(Error::DimensionMismatch(format!(
            "map {:?} vs fixations {:?}",
            s.dims(),
            f.dims()
        )));
    }
    Ok(())
}

/// ROC area with fixated pixels as positives and every other pixel as a
/// negative; thresholds sweep the distinct positive values.
pub fn auc_judd(s: &SaliencyMap, f: &FixationSet) -> Result<f64> {
    check_dims(s, f)?;
    let density = s.density();
    let idx = f.pixel_indices();
    let mut fixated = vec![false; density.len()];
    for &i in &idx {
        fixated[i] = true;
    }
    let mut pos: Vec<f64> = idx.iter().map(|&i| density[i]).collect();
    let mut neg: Vec<f64> = density
        .iter()
        .zip(&fixated)
        .filter(|(_, &fx)| !fx)
        .map(|(&v, _)| v)
        .collect();
    if neg.is_empty() {
        return Err(Error::InvalidParams(
            "every pixel is fixated; AUC needs negatives".into(),
        ));
    }
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    let (np, nn) = (pos.len() as f64, neg.len() as f64);

    let mut area = 0.0;
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let (mut ip, mut ineg) = (0usize, 0usize);
    while ip < pos.len() {
        let thr = pos[ip];
        while ip < pos.len() && pos[ip] >= thr {
            ip += 1;
        }
        while ineg < neg.len() && neg[ineg] >= thr {
            ineg += 1;
        }
        let (tpr, fpr) = (ip as f64 / np, ineg as f64 / nn);
        area += 0.5 * (tpr + prev_tpr) * (fpr - prev_fpr);
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    area += 0.5 * (1.0 + prev_tpr) * (1.0 - prev_fpr);
    Ok(area)
}

/// Mean population z-score of the map at fixated pixels.
pub fn nss(s: &SaliencyMap, f: &FixationSet) -> Result<f64> {
    check_dims(s, f)?;
    let d = s.density();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // round-off leaves a tiny spread on constant maps
    if !(std > 1e-12 * mean.abs()) {
        return Err(Error::ZeroVariance);
    }
    let idx = f.pixel_indices();
    let total: f64 = idx.iter().map(|&i| (d[i] - mean) / std).sum();
    Ok(total / idx.len() as f64)
}

/// Unit-cost Levenshtein distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Row-major `n x n` grid label of each fixation.
pub fn grid_labels(sp: &Scanpath, n_grid: usize, collapse_repeats: bool) -> Vec<u32> {
    let cell = |v: f64, extent: usize| -> u32 {
        let c = (v / extent as f64 * n_grid as f64).floor();
        c.clamp(0.0, (n_grid - 1) as f64) as u32
    };
    let mut labels: Vec<u32> = sp
        .fixations
        .iter()
        .map(|f| cell(f.y, sp.height) * n_grid as u32 + cell(f.x, sp.width))
        .collect();
    if collapse_repeats {
        labels.dedup();
    }
    labels
}

pub fn string_edit_distance(
    a: &Scanpath,
    b: &Scanpath,
    n_grid: usize,
    collapse_repeats: bool,
) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyScanpath);
    }
    if n_grid < 2 {
        return Err(Error::InvalidParams(format!("n_grid must be >= 2, got {n_grid}")));
    }
    Ok(levenshtein(
        &grid_labels(a, n_grid, collapse_repeats),
        &grid_labels(b, n_grid, collapse_repeats),
    ))
}

/// Similarity transform applied to the symmetrized embedding distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TdeVariant {
    /// `1 - D`, clamped to [0,1].
    Linear,
    /// `exp(-D)`.
    Exp,
}

impl TdeVariant {
    pub fn name(self) -> &'static str {
        match self {
            TdeVariant::Linear => "linear",
            TdeVariant::Exp => "exp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(TdeVariant::Linear),
            "exp" => Some(TdeVariant::Exp),
            _ => None,
        }
    }
}

/// Directed distance: for each window length, the mean over `p`'s windows
/// of the closest `q` window (mean point distance, scaled by `diag`),
/// then averaged over window lengths.
pub fn tde_directed(p: &[Vec2], q: &[Vec2], diag: f64) -> f64 {
    let kmax = p.len().min(q.len());
    let mut total = 0.0;
    for k in 1..=kmax {
        let mut sum = 0.0;
        for pw in p.windows(k) {
            let best = q
                .windows(k)
                .map(|qw| pw.iter().zip(qw).map(|(a, b)| a.distance(*b)).sum::<f64>() / k as f64)
                .fold(f64::INFINITY, f64::min);
            sum += best / diag;
        }
        total += sum / (p.len() - k + 1) as f64;
    }
    total / kmax as f64
}

pub fn tde_similarity(a: &Scanpath, b: &Scanpath, variant: TdeVariant) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyScanpath);
    }
    let diag = (a.width as f64).hypot(a.height as f64);
    let (pa, pb) = (a.positions(), b.positions());
    let d = 0.5 * (tde_directed(&pa, &pb, diag) + tde_directed(&pb, &pa, diag));
    Ok(match variant {
        TdeVariant::Linear => (1.0 - d).clamp(0.0, 1.0),
        TdeVariant::Exp => (-d).exp(),
    })
}

/// Whether lower or higher scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Lower,
    Higher,
}

/// Mean with standard error (sample std / sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, stderr, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table4Aggregate {
    pub average: Summary,
    pub best: Summary,
}

/// Average over every pooled score and best-per-image, with standard
/// errors taken across images.
pub fn aggregate_table4(per_image: &[Vec<f64>], better: Better) -> Option<Table4Aggregate> {
    let images: Vec<&Vec<f64>> = per_image.iter().filter(|v| !v.is_empty()).collect();
    if images.is_empty() {
        return None;
    }
    let pooled: Vec<f64> = images.iter().flat_map(|v| v.iter().copied()).collect();
    let image_means: Vec<f64> = images
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let bests: Vec<f64> = images
        .iter()
        .map(|v| {
            let it = v.iter().copied();
            match better {
                Better::Lower => it.fold(f64::INFINITY, f64::min),
                Better::Higher => it.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let mean_se = Summary::of(&image_means)?;
    Some(Table4Aggregate {
        average: Summary {
            mean: pooled.iter().sum::<f64>() / pooled.len() as f64,
            stderr: mean_se.stderr,
            n: images.len(),
        },
        best: Summary::of(&bests)?,
    })
}

/// Raw scores for one (image, model variant) pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageScores {
    pub image: String,
    pub variant: String,
    pub auc: Option<f64>,
    pub nss: Option<f64>,
    /// One entry per (simulated scanpath, human observer) pair.
    pub string_edit: Vec<f64>,
    pub tde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub image: String,
    pub variant: String,
    pub auc: Option<f64>,
    pub nss: Option<f64>,
    pub string_edit_avg: Option<f64>,
    pub string_edit_best: Option<f64>,
    pub tde_avg: Option<f64>,
    pub tde_best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantAggregate {
    pub variant: String,
    pub images: usize,
    pub auc: Option<Summary>,
    pub nss: Option<Summary>,
    pub string_edit: Option<Table4Aggregate>,
    pub tde: Option<Table4Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub records: Vec<ImageRecord>,
    pub aggregates: Vec<VariantAggregate>,
    /// Images left out for lack of human data.
    pub excluded: Vec<String>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricReport {
    /// Builds records and per-variant aggregates; variants keep their
    /// first-seen order.
    pub fn build(scores: &[ImageScores], excluded: Vec<String>) -> Self {
        let records = scores
            .iter()
            .map(|s| ImageRecord {
                image: s.image.clone(),
                variant: s.variant.clone(),
                auc: s.auc,
                nss: s.nss,
                string_edit_avg: mean(&s.string_edit),
                string_edit_best: s.string_edit.iter().copied().reduce(f64::min),
                tde_avg: mean(&s.tde),
                tde_best: s.tde.iter().copied().reduce(f64::max),
            })
            .collect();
        let mut variants: Vec<&str> = Vec::new();
        for s in scores {
            if !variants.contains(&s.variant.as_str()) {
                variants.push(&s.variant);
            }
        }
        let aggregates = variants
            .into_iter()
            .map(|v| {
                let rows: Vec<&ImageScores> = scores.iter().filter(|s| s.variant == v).collect();
                let aucs: Vec<f64> = rows.iter().filter_map(|s| s.auc).collect();
                let nsss: Vec<f64> = rows.iter().filter_map(|s| s.nss).collect();
                let se: Vec<Vec<f64>> = rows.iter().map(|s| s.string_edit.clone()).collect();
                let tde: Vec<Vec<f64>> = rows.iter().map(|s| s.tde.clone()).collect();
                VariantAggregate {
                    variant: v.to_string(),
                    images: rows.len(),
                    auc: Summary::of(&aucs),
                    nss: Summary::of(&nsss),
                    string_edit: aggregate_table4(&se, Better::Lower),
                    tde: aggregate_table4(&tde, Better::Higher),
                }
            })
            .collect();
        Self {
            records,
            aggregates,
            excluded,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("image,variant,auc,nss,string_edit_avg,string_edit_best,tde_avg,tde_best\n");
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.9}"));
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.image,
                r.variant,
                f(r.auc),
                f(r.nss),
                f(r.string_edit_avg),
                f(r.string_edit_best),
                f(r.tde_avg),
                f(r.tde_best)
            );
        }
        out
    }

    /// Aligned table: mean with standard error in brackets.
    pub fn to_text(&self) -> String {
        let cell = |s: Option<Summary>| {
            s.map_or("-".to_string(), |s| format!("{:.3} ({:.3})", s.mean, s.stderr))
        };
        let headers = [
            "variant", "images", "AUC", "NSS", "SED avg", "SED best", "TDE avg", "TDE best",
        ];
        let rows: Vec<[String; 8]> = self
            .aggregates
            .iter()
            .map(|a| {
                [
                    a.variant.clone(),
                    a.images.to_string(),
                    cell(a.auc),
                    cell(a.nss),
                    cell(a.string_edit.map(|t| t.average)),
                    cell(a.string_edit.map(|t| t.best)),
                    cell(a.tde.map(|t| t.average)),
                    cell(a.tde.map(|t| t.best)),
                ]
            })
            .collect();
        let mut widths = headers.map(str::len);
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |cells: Vec<&str>, out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(headers.to_vec(), &mut out);
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for r in &rows {
            line(r.iter().map(String::as_str).collect(), &mut out);
        }
        if !self.excluded.is_empty() {
            let _ = writeln!(out, "\nexcluded (no human data): {}", self.excluded.join(", "));
        }
        out
    }
}
