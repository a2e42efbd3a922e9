//! Batch commands over a dataset: simulate, saliency, evaluate.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use gazelab_core::dynamics::run_seed;
use gazelab_core::field::load_topdown_map;
use gazelab_core::metrics::{string_edit_distance, tde_similarity, ImageScores};
use gazelab_core::params::resolve_couplings;
use gazelab_core::saliency::{
    accumulate, accumulate_fixations, center_prior, default_blur_sigma, load_map, render_heatmap, save_map,
};
use gazelab_core::scanpath::{
    baseline_scanpath, load_scanpath_csv, save_scanpath_csv, scanpath_from_trajectory, BaselineKind,
};
use gazelab_core::{
    build_fieldset, simulate_run, EymolParams, FieldSet, FixationSet, Image, MetricReport, SaliencyMap, Scanpath,
    Trajectory, Vec2,
};

use crate::config::{ConfigError, Deposit, HistTarget, RunConfig};
use crate::dataset::{DatasetLayout, Stimulus};

/// What a command did, image by image.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub command: String,
    pub processed: Vec<String>,
    pub failed: Vec<ImageFailure>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageFailure {
    pub image: String,
    pub error: String,
}

impl Outcome {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    fn absorb(&mut self, results: Vec<(String, Result<()>)>) {
        for (image, r) in results {
            match r {
                Ok(()) => self.processed.push(image),
                Err(e) => {
                    warn!("{image}: {e:#}");
                    self.failed.push(ImageFailure {
                        image,
                        error: format!("{e:#}"),
                    });
                }
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Everything simulated for one stimulus.
pub struct ImageRuns {
    pub params: EymolParams,
    pub topdown: bool,
    pub trajectories: Vec<Trajectory>,
}

pub struct Session {
    cfg: RunConfig,
    dataset: DatasetLayout,
    stimuli: Vec<Stimulus>,
    pool: rayon::ThreadPool,
    warnings: Mutex<Vec<String>>,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn run_name(i: usize) -> String {
    format!("run_{i:03}")
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))
}

/// Recreates `p` empty so stale runs never leak into later commands.
fn fresh_dir(p: &Path) -> Result<()> {
    if p.exists() {
        fs::remove_dir_all(p).with_context(|| format!("cannot clear {}", p.display()))?;
    }
    create_dir(p)
}

fn sorted_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("csv"))
        .collect();
    v.sort();
    Ok(v)
}

impl Session {
    /// Validates the config, indexes the dataset and applies the filter.
    /// Config problems come back as [`ConfigError`].
    pub fn new(cfg: RunConfig, dataset_root: &Path, filter: Option<&str>) -> Result<Self> {
        cfg.validate()?;
        let dataset = DatasetLayout::open(dataset_root)?;
        let stimuli = dataset.select(filter)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .context("cannot start worker pool")?;
        Ok(Self {
            cfg,
            dataset,
            stimuli,
            pool,
            warnings: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.stimuli
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out
    }

    fn warn(&self, msg: String) {
        warn!("{msg}");
        self.warnings.lock().expect("warning list").push(msg);
    }

    fn take_warnings(&self) -> Vec<String> {
        std::mem::take(&mut *self.warnings.lock().expect("warning list"))
    }

    fn write_effective_config(&self) -> Result<()> {
        create_dir(&self.cfg.out)?;
        let path = self.cfg.out.join("config.effective.txt");
        fs::write(&path, self.cfg.to_text()).with_context(|| format!("cannot write {}", path.display()))
    }

    fn for_each_image(&self, command: &str, f: impl Fn(&Stimulus) -> Result<()> + Sync) -> Result<Outcome> {
        self.write_effective_config()?;
        if command == "simulate" && self.cfg.wants_topdown() && !self.dataset.has_cfmaps() {
            self.warn("gamma > 0 but the dataset has no cfmaps/ directory; running without the top-down term".into());
        }
        let results: Vec<(String, Result<()>)> = self.pool.install(|| {
            self.stimuli
                .par_iter()
                .map(|s| (s.stem.clone(), f(s)))
                .collect()
        });
        let mut outcome = Outcome::new(command);
        outcome.absorb(results);
        outcome.warnings = self.take_warnings();
        info!(
            "{command}: {} ok, {} failed",
            outcome.processed.len(),
            outcome.failed.len()
        );
        Ok(outcome)
    }

    /// Model label used in reports.
    pub fn model_variant(&self) -> &'static str {
        if self.cfg.wants_topdown() && self.dataset.has_cfmaps() {
            "cf-eymol"
        } else {
            "eymol"
        }
    }

    /// Field set and resolved constants for one stimulus.
    fn prepare_image(&self, stim: &Stimulus) -> Result<(FieldSet, EymolParams, bool)> {
        let img = Image::open(&stim.path)?;
        let cf = if self.cfg.wants_topdown() && self.dataset.has_cfmaps() {
            let p = self.dataset.cfmap_path(&stim.stem);
            if p.is_none() {
                self.warn(format!("{}: no top-down map, running without it", stim.stem));
            }
            p
        } else {
            None
        };
        let fields = build_fieldset(&img, cf.as_deref(), self.cfg.peripheral_sigma)?;
        let params = resolve_couplings(&self.cfg.params, &self.cfg.couplings, &self.cfg.auto, &fields);
        params.check_stability(&fields)?;
        Ok((fields, params, cf.is_some()))
    }

    /// Runs every simulation for one stimulus, in run order.
    pub fn simulate_image(&self, stim: &Stimulus) -> Result<ImageRuns> {
        let (fields, params, topdown) = self.prepare_image(stim)?;
        let trajectories = (0..params.n_runs)
            .into_par_iter()
            .map(|i| simulate_run(&fields, &params, i as u64))
            .collect::<gazelab_core::Result<Vec<_>>>()?;
        Ok(ImageRuns {
            params,
            topdown,
            trajectories,
        })
    }

    fn signature(p: &EymolParams, topdown: bool) -> String {
        format!(
            "m = {:?}\nk = {:?}\neta = {:?}\nlambda = {:?}\ngamma = {:?}\nomega = {:?}\ndt = {:?}\n\
             duration = {:?}\ninit_pos_sigma = {:?}\ninit_vel_sigma = {:?}\nn_runs = {}\nseed = {}\n\
             topdown = {}\n",
            p.m,
            p.k,
            p.eta,
            p.lambda,
            p.gamma,
            p.omega,
            p.dt,
            p.duration,
            p.init_pos_sigma,
            p.init_vel_sigma,
            p.n_runs,
            p.seed,
            topdown
        )
    }

    fn simulate_one(&self, stim: &Stimulus) -> Result<()> {
        let runs = self.simulate_image(stim)?;
        let sig = Self::signature(&runs.params, runs.topdown);
        let traj_dir = self.cfg.out.join("trajectories").join(&stim.stem);
        let sp_dir = self.cfg.out.join("scanpaths").join(&stim.stem);
        fresh_dir(&sp_dir)?;
        if self.cfg.save_trajectories {
            fresh_dir(&traj_dir)?;
        }
        runs.trajectories
            .par_iter()
            .enumerate()
            .try_for_each(|(i, tr)| -> Result<()> {
                let name = run_name(i);
                if self.cfg.save_trajectories {
                    tr.save_csv(&traj_dir.join(format!("{name}.csv")))?;
                }
                let sp = scanpath_from_trajectory(tr, &self.cfg.detector)?;
                save_scanpath_csv(&sp_dir.join(format!("{name}.csv")), &name, &sp)?;
                Ok(())
            })?;
        fs::write(sp_dir.join("run.txt"), &sig)?;
        if self.cfg.save_trajectories {
            fs::write(traj_dir.join("run.txt"), &sig)?;
        }
        Ok(())
    }

    pub fn simulate(&self) -> Result<Outcome> {
        self.for_each_image("simulate", |s| self.simulate_one(s))
    }

    /// Trajectories from a previous `simulate` when they match the current
    /// config, otherwise simulated in place.
    fn trajectories_for(&self, stim: &Stimulus) -> Result<Vec<Trajectory>> {
        let dir = self.cfg.out.join("trajectories").join(&stim.stem);
        let (fields, params, topdown) = self.prepare_image(stim)?;
        let stored = fs::read_to_string(dir.join("run.txt")).ok();
        if stored.as_deref() == Some(Self::signature(&params, topdown).as_str()) {
            let files = sorted_csvs(&dir)?;
            if files.len() == params.n_runs {
                let (w, h) = fields.dims();
                return files
                    .par_iter()
                    .map(|f| Trajectory::load_csv(f, w, h).map_err(Into::into))
                    .collect();
            }
        }
        (0..params.n_runs)
            .into_par_iter()
            .map(|i| simulate_run(&fields, &params, i as u64).map_err(Into::into))
            .collect()
    }

    fn histmatch_target(&self, dims: (usize, usize)) -> Result<SaliencyMap> {
        Ok(match &self.cfg.histmatch_target {
            HistTarget::CenterPrior => SaliencyMap::from_values(dims.0, dims.1, center_prior(dims.0, dims.1))?,
            HistTarget::File(p) => {
                let m = load_topdown_map(p, dims)?;
                SaliencyMap::from_values(dims.0, dims.1, m.into_values())?
            }
        })
    }

    /// Accumulated map and the map after the configured pipeline.
    pub fn saliency_maps(&self, stim: &Stimulus) -> Result<(SaliencyMap, SaliencyMap)> {
        let trajectories = self.trajectories_for(stim)?;
        let dims = (trajectories[0].width, trajectories[0].height);
        let raw = match self.cfg.deposit {
            Deposit::Time => accumulate(&trajectories, dims)?,
            Deposit::Fixation => {
                let sps = trajectories
                    .iter()
                    .map(|t| scanpath_from_trajectory(t, &self.cfg.detector))
                    .collect::<gazelab_core::Result<Vec<_>>>()?;
                accumulate_fixations(&sps, dims)?
            }
        };
        let sigma = self.cfg.map_blur_sigma.unwrap_or_else(|| default_blur_sigma(dims.0));
        let target = match self.cfg.pipeline {
            gazelab_core::Pipeline::CenterBiasHistMatch => Some(self.histmatch_target(dims)?),
            _ => None,
        };
        let processed = self.cfg.pipeline.apply(&raw, sigma, target.as_ref())?;
        Ok((raw, processed))
    }

    fn saliency_one(&self, stim: &Stimulus) -> Result<()> {
        let (_, map) = self.saliency_maps(stim)?;
        let dir = self.cfg.out.join("saliency");
        create_dir(&dir)?;
        save_map(&map, &dir.join(format!("{}.pgm", stim.stem)))?;
        if self.cfg.heatmaps {
            let dir = self.cfg.out.join("heatmaps");
            create_dir(&dir)?;
            let img = Image::open(&stim.path)?;
            render_heatmap(&map, &img, &dir.join(format!("{}.png", stim.stem)))?;
        }
        Ok(())
    }

    pub fn saliency(&self) -> Result<Outcome> {
        self.for_each_image("saliency", |s| self.saliency_one(s))
    }

    fn simulated_scanpaths(&self, stem: &str, dims: (usize, usize)) -> Result<Vec<Scanpath>> {
        let mut out = Vec::new();
        for f in sorted_csvs(&self.cfg.out.join("scanpaths").join(stem))? {
            out.extend(load_scanpath_csv(&f, dims)?.into_values());
        }
        Ok(out)
    }

    fn random_map(&self, dims: (usize, usize), seed: u64) -> Result<SaliencyMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..dims.0 * dims.1).map(|_| rng.random::<f64>()).collect();
        Ok(SaliencyMap::from_values(dims.0, dims.1, values)?)
    }

    fn pair_scores(&self, models: &[Scanpath], humans: &[&Scanpath], scores: &mut ImageScores) -> Result<()> {
        for m in models.iter().filter(|s| !s.is_empty()) {
            for h in humans {
                scores
                    .string_edit
                    .push(string_edit_distance(m, h, self.cfg.n_grid, self.cfg.collapse_repeats)? as f64);
                scores.tde.push(tde_similarity(m, h, self.cfg.tde_variant)?);
            }
        }
        Ok(())
    }

    /// Score rows for one image, or `None` when it has no human data.
    pub fn evaluate_image(&self, stim: &Stimulus) -> Result<Option<Vec<ImageScores>>> {
        let (w, h) = image::image_dimensions(&stim.path)
            .with_context(|| format!("cannot read {}", stim.path.display()))?;
        let dims = (w as usize, h as usize);
        let humans = self.dataset.human_scanpaths(&stim.stem, dims)?;
        let inside = |p: &Vec2| p.x >= 0.0 && p.y >= 0.0 && p.x <= dims.0 as f64 && p.y <= dims.1 as f64;
        let all: Vec<Vec2> = humans.values().flat_map(|s| s.positions()).collect();
        let points: Vec<Vec2> = all.iter().copied().filter(inside).collect();
        if points.len() < all.len() {
            self.warn(format!(
                "{}: {} human fixations outside the image ignored",
                stim.stem,
                all.len() - points.len()
            ));
        }
        if points.is_empty() {
            return Ok(None);
        }
        let fixations = FixationSet::new(points, dims)?;
        let human_paths: Vec<&Scanpath> = humans.values().filter(|s| !s.is_empty()).collect();
        let mean_len = human_paths.iter().map(|s| s.len()).sum::<usize>() as f64 / human_paths.len().max(1) as f64;
        let n_fix = (mean_len.round() as usize).max(1);

        let row = |variant: &str, map: Option<&SaliencyMap>| -> Result<ImageScores> {
            let (auc, nss) = match map {
                Some(m) => (
                    Some(gazelab_core::metrics::auc_judd(m, &fixations)?),
                    Some(gazelab_core::metrics::nss(m, &fixations)?),
                ),
                None => (None, None),
            };
            Ok(ImageScores {
                image: stim.stem.clone(),
                variant: variant.to_string(),
                auc,
                nss,
                ..ImageScores::default()
            })
        };

        let map_path = self.cfg.out.join("saliency").join(format!("{}.pgm", stim.stem));
        let model_map = if map_path.is_file() {
            Some(load_map(&map_path)?)
        } else {
            self.warn(format!("{}: no saliency map, AUC/NSS left empty", stim.stem));
            None
        };
        let mut model = row(self.model_variant(), model_map.as_ref())?;
        let simulated = self.simulated_scanpaths(&stim.stem, dims)?;
        self.pair_scores(&simulated, &human_paths, &mut model)?;

        let base_seed = self.cfg.params.seed ^ fnv1a(&stim.stem);
        let n_base = if simulated.is_empty() { self.cfg.params.n_runs } else { simulated.len() };
        let mut rows = vec![model];
        for (kind, name, map) in [
            (BaselineKind::Random, "random", self.random_map(dims, run_seed(base_seed, u64::MAX))?),
            (
                BaselineKind::Center,
                "center",
                SaliencyMap::from_values(dims.0, dims.1, center_prior(dims.0, dims.1))?,
            ),
        ] {
            let tag = if kind == BaselineKind::Random { 1 } else { 2 };
            let paths: Vec<Scanpath> = (0..n_base)
                .map(|i| baseline_scanpath(kind, n_fix, dims, run_seed(base_seed ^ tag, i as u64)))
                .collect();
            let mut r = row(name, Some(&map))?;
            self.pair_scores(&paths, &human_paths, &mut r)?;
            rows.push(r);
        }
        if let Some(p) = self.dataset.fixmap_path(&stim.stem) {
            let m = load_topdown_map(&p, dims)?;
            let m = SaliencyMap::from_values(dims.0, dims.1, m.into_values())?;
            rows.push(row("human", Some(&m))?);
        }
        Ok(Some(rows))
    }

    /// Scores every selected image and writes `reports/report.{txt,csv,json}`.
    pub fn evaluate(&self) -> Result<(Outcome, MetricReport)> {
        self.write_effective_config()?;
        let results: Vec<(String, Result<Option<Vec<ImageScores>>>)> = self.pool.install(|| {
            self.stimuli
                .par_iter()
                .map(|s| (s.stem.clone(), self.evaluate_image(s)))
                .collect()
        });
        let mut scores = Vec::new();
        let mut excluded = Vec::new();
        let mut status = Vec::new();
        for (stem, r) in results {
            match r {
                Ok(Some(rows)) => {
                    scores.extend(rows);
                    status.push((stem, Ok(())));
                }
                Ok(None) => excluded.push(stem),
                Err(e) => status.push((stem, Err(e))),
            }
        }
        let mut outcome = Outcome::new("evaluate");
        outcome.absorb(status);
        if !excluded.is_empty() {
            self.warn(format!("excluded for lack of human data: {}", excluded.join(", ")));
        }
        outcome.warnings = self.take_warnings();
        let report = MetricReport::build(&scores, excluded);
        let dir = self.cfg.out.join("reports");
        create_dir(&dir)?;
        fs::write(dir.join("report.txt"), report.to_text())?;
        fs::write(dir.join("report.csv"), report.to_csv())?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        Ok((outcome, report))
    }

    /// `simulate`, `saliency` and `evaluate` in sequence.
    pub fn run_all(&self) -> Result<(Outcome, MetricReport)> {
        let sim = self.simulate()?;
        let sal = self.saliency()?;
        let (mut eval, report) = self.evaluate()?;
        for o in [sim, sal] {
            eval.failed.extend(o.failed);
            eval.warnings.extend(o.warnings);
        }
        eval.command = "run".into();
        Ok((eval, report))
    }
}

/// True when `err` stems from a bad configuration.
pub fn is_config_error(err: &anyhow::Error) -> bool {
    err.downcast_ref::<ConfigError>().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn exit_code_reflects_failures() {
        let mut o = Outcome::new("x");
        assert_eq!(o.exit_code(), 0);
        o.absorb(vec![("a".into(), Ok(())), ("b".into(), Err(anyhow::anyhow!("boom")))]);
        assert_eq!(o.exit_code(), 1);
        assert_eq!(o.processed, ["a"]);
    }

    #[test]
    fn missing_stimuli_dir_is_reported() {
        let d = tempfile::tempdir().unwrap();
        let err = Session::new(RunConfig::default(), d.path(), None).err().unwrap();
        assert!(!is_config_error(&err));
        let mut cfg = RunConfig::default();
        cfg.set("dt", "0").unwrap();
        assert!(is_config_error(&Session::new(cfg, d.path(), None).err().unwrap()));
    }
}
