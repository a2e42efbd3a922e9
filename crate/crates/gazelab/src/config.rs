//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gazelab_core::metrics::TdeVariant;
use gazelab_core::params::{AutoScale, Coupling, Couplings};
use gazelab_core::{EymolParams, FixationDetectorParams, Pipeline};

/// Configuration problems; the CLI maps these to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {reason}")]
    Syntax {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': '{value}' ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Where saliency mass is deposited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deposit {
    /// Every trajectory sample, weighted by dt.
    Time,
    /// One unit per detected fixation.
    Fixation,
}

/// Target distribution for histogram matching.
#[derive(Debug, Clone, PartialEq)]
pub enum HistTarget {
    CenterPrior,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Model constants; `eta`, `lambda` and `gamma` here are ignored in
    /// favour of `couplings`.
    pub params: EymolParams,
    pub couplings: Couplings,
    pub auto: AutoScale,
    pub peripheral_sigma: Option<f64>,
    pub detector: FixationDetectorParams,
    pub n_grid: usize,
    pub tde_variant: TdeVariant,
    pub collapse_repeats: bool,
    pub deposit: Deposit,
    pub pipeline: Pipeline,
    pub map_blur_sigma: Option<f64>,
    pub histmatch_target: HistTarget,
    pub heatmaps: bool,
    pub save_trajectories: bool,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: EymolParams::default(),
            couplings: Couplings::default(),
            auto: AutoScale::default(),
            peripheral_sigma: None,
            detector: FixationDetectorParams::default(),
            n_grid: 5,
            tde_variant: TdeVariant::Linear,
            collapse_repeats: false,
            deposit: Deposit::Time,
            pipeline: Pipeline::Blur,
            map_blur_sigma: None,
            histmatch_target: HistTarget::CenterPrior,
            heatmaps: false,
            save_trajectories: true,
            out: PathBuf::from("out"),
            jobs: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "m",
    "k",
    "eta",
    "lambda",
    "gamma",
    "omega",
    "dt",
    "duration",
    "init_pos_sigma",
    "init_vel_sigma",
    "n_runs",
    "seed",
    "a_max",
    "lambda_frac",
    "peripheral_sigma",
    "maxdist",
    "mindur",
    "n_grid",
    "tde_variant",
    "collapse_repeats",
    "deposit",
    "pipeline",
    "map_blur_sigma",
    "histmatch_target",
    "heatmaps",
    "save_trajectories",
    "out",
    "jobs",
];

/// Accepts `n_runs` and `n-runs` alike.
pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn float(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|e| bad(key, value, e))?;
    if !v.is_finite() {
        return Err(bad(key, value, "not finite"));
    }
    Ok(v)
}

fn int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn coupling(key: &str, value: &str) -> Result<Coupling, ConfigError> {
    if value == "auto" {
        Ok(Coupling::Auto)
    } else {
        float(key, value).map(Coupling::Fixed)
    }
}

fn auto_float(key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value == "auto" {
        Ok(None)
    } else {
        float(key, value).map(Some)
    }
}

fn show_coupling(c: Coupling) -> String {
    match c {
        Coupling::Auto => "auto".into(),
        Coupling::Fixed(v) => format!("{v:?}"),
    }
}

fn show_auto(v: Option<f64>) -> String {
    v.map_or("auto".into(), |v| format!("{v:?}"))
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = normalize_key(key);
        let value = value.trim();
        let p = &mut self.params;
        match key.as_str() {
            "m" => p.m = float(&key, value)?,
            "k" => p.k = float(&key, value)?,
            "eta" => self.couplings.eta = coupling(&key, value)?,
            "lambda" => self.couplings.lambda = coupling(&key, value)?,
            "gamma" => self.couplings.gamma = coupling(&key, value)?,
            "omega" => p.omega = float(&key, value)?,
            "dt" => p.dt = float(&key, value)?,
            "duration" => p.duration = float(&key, value)?,
            "init_pos_sigma" => p.init_pos_sigma = float(&key, value)?,
            "init_vel_sigma" => p.init_vel_sigma = float(&key, value)?,
            "n_runs" => p.n_runs = int(&key, value)?,
            "seed" => p.seed = int(&key, value)?,
            "a_max" => self.auto.a_max = float(&key, value)?,
            "lambda_frac" => self.auto.lambda_frac = float(&key, value)?,
            "peripheral_sigma" => self.peripheral_sigma = auto_float(&key, value)?,
            "maxdist" => self.detector.maxdist = float(&key, value)?,
            "mindur" => self.detector.mindur = float(&key, value)?,
            "n_grid" => self.n_grid = int(&key, value)?,
            "tde_variant" => {
                self.tde_variant =
                    TdeVariant::parse(value).ok_or_else(|| bad(&key, value, "expected linear or exp"))?
            }
            "collapse_repeats" => self.collapse_repeats = boolean(&key, value)?,
            "deposit" => {
                self.deposit = match value {
                    "time" => Deposit::Time,
                    "fixation" => Deposit::Fixation,
                    _ => return Err(bad(&key, value, "expected time or fixation")),
                }
            }
            "pipeline" => {
                self.pipeline = Pipeline::parse(value).ok_or_else(|| {
                    bad(&key, value, "expected none, blur, center_bias or center_bias+histmatch")
                })?
            }
            "map_blur_sigma" => self.map_blur_sigma = auto_float(&key, value)?,
            "histmatch_target" => {
                self.histmatch_target = match value {
                    "center_prior" => HistTarget::CenterPrior,
                    "" => return Err(bad(&key, value, "empty path")),
                    path => HistTarget::File(PathBuf::from(path)),
                }
            }
            "heatmaps" => self.heatmaps = boolean(&key, value)?,
            "save_trajectories" => self.save_trajectories = boolean(&key, value)?,
            "out" => {
                if value.is_empty() {
                    return Err(bad(&key, value, "empty path"));
                }
                self.out = PathBuf::from(value)
            }
            "jobs" => self.jobs = int(&key, value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: origin.to_string(),
                line: i + 1,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks everything that can be checked without a stimulus.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let mut probe = self.params;
        for (name, c) in [
            ("eta", self.couplings.eta),
            ("lambda", self.couplings.lambda),
            ("gamma", self.couplings.gamma),
        ] {
            if let Coupling::Fixed(v) = c {
                if v < 0.0 {
                    return invalid(format!("{name} must be >= 0"));
                }
            }
        }
        probe.eta = 0.0;
        probe.lambda = 0.0;
        probe.gamma = 0.0;
        probe
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.auto.a_max > 0.0) {
            return invalid("a_max must be > 0".into());
        }
        if !(self.auto.lambda_frac >= 0.0 && self.auto.lambda_frac <= 1.0) {
            return invalid("lambda_frac must lie in [0, 1]".into());
        }
        if self.peripheral_sigma.is_some_and(|s| s <= 0.0) {
            return invalid("peripheral_sigma must be > 0".into());
        }
        if self.map_blur_sigma.is_some_and(|s| s <= 0.0) {
            return invalid("map_blur_sigma must be > 0".into());
        }
        if !(self.detector.maxdist > 0.0 && self.detector.mindur >= 0.0) {
            return invalid("maxdist must be > 0 and mindur >= 0".into());
        }
        if self.params.n_runs == 0 {
            return invalid("n_runs must be >= 1".into());
        }
        if self.n_grid == 0 {
            return invalid("n_grid must be >= 1".into());
        }
        Ok(())
    }

    /// Canonical text form; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let tde = self.tde_variant.name();
        let deposit = match self.deposit {
            Deposit::Time => "time",
            Deposit::Fixation => "fixation",
        };
        let hist = match &self.histmatch_target {
            HistTarget::CenterPrior => "center_prior".to_string(),
            HistTarget::File(p) => p.display().to_string(),
        };
        let entries: Vec<(&str, String)> = vec![
            ("m", format!("{:?}", p.m)),
            ("k", format!("{:?}", p.k)),
            ("eta", show_coupling(self.couplings.eta)),
            ("lambda", show_coupling(self.couplings.lambda)),
            ("gamma", show_coupling(self.couplings.gamma)),
            ("omega", format!("{:?}", p.omega)),
            ("dt", format!("{:?}", p.dt)),
            ("duration", format!("{:?}", p.duration)),
            ("init_pos_sigma", format!("{:?}", p.init_pos_sigma)),
            ("init_vel_sigma", format!("{:?}", p.init_vel_sigma)),
            ("n_runs", p.n_runs.to_string()),
            ("seed", p.seed.to_string()),
            ("a_max", format!("{:?}", self.auto.a_max)),
            ("lambda_frac", format!("{:?}", self.auto.lambda_frac)),
            ("peripheral_sigma", show_auto(self.peripheral_sigma)),
            ("maxdist", format!("{:?}", self.detector.maxdist)),
            ("mindur", format!("{:?}", self.detector.mindur)),
            ("n_grid", self.n_grid.to_string()),
            ("tde_variant", tde.to_string()),
            ("collapse_repeats", self.collapse_repeats.to_string()),
            ("deposit", deposit.to_string()),
            ("pipeline", self.pipeline.name().to_string()),
            ("map_blur_sigma", show_auto(self.map_blur_sigma)),
            ("histmatch_target", hist),
            ("heatmaps", self.heatmaps.to_string()),
            ("save_trajectories", self.save_trajectories.to_string()),
            ("out", self.out.display().to_string()),
            ("jobs", self.jobs.to_string()),
        ];
        debug_assert_eq!(entries.len(), KEYS.len());
        let mut s = String::from("# effective gazelab configuration\n");
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// True when the config asks for a top-down term at all.
    pub fn wants_topdown(&self) -> bool {
        self.couplings.gamma != Coupling::Fixed(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_overrides() {
        let cfg = RunConfig::parse(
            "# header\n\nn_runs = 10  # fewer\neta=auto\nlambda = 0.01\npipeline = center_bias\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.params.n_runs, 10);
        assert_eq!(cfg.couplings.eta, Coupling::Auto);
        assert_eq!(cfg.couplings.lambda, Coupling::Fixed(0.01));
        assert_eq!(cfg.pipeline, Pipeline::CenterBias);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(
            RunConfig::parse("n_run = 3", "t"),
            Err(ConfigError::UnknownKey(k)) if k == "n_run"
        ));
        assert!(matches!(
            RunConfig::parse("just words", "t"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(RunConfig::parse("dt = nan", "t").is_err());
        assert!(RunConfig::parse("tde_variant = cosine", "t").is_err());
    }

    #[test]
    fn dashed_keys_are_accepted() {
        let mut cfg = RunConfig::default();
        cfg.set("n-runs", "7").unwrap();
        assert_eq!(cfg.params.n_runs, 7);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("omega", "3.3").unwrap();
        cfg.set("gamma", "0.125").unwrap();
        cfg.set("map_blur_sigma", "2.5").unwrap();
        cfg.set("histmatch_target", "maps/target.pgm").unwrap();
        cfg.set("deposit", "fixation").unwrap();
        cfg.set("tde_variant", "exp").unwrap();
        for c in [RunConfig::default(), cfg] {
            let back = RunConfig::parse(&c.to_text(), "echo").unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_text(), c.to_text());
        }
    }

    #[test]
    fn validation_catches_bad_numbers() {
        let mut cfg = RunConfig::default();
        cfg.set("dt", "-1").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.set("eta", "-2").unwrap();
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
