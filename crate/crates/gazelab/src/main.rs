use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gazelab::config::{normalize_key, KEYS};
use gazelab::render::{save_png, scanpath_figure};
use gazelab::session::is_config_error;
use gazelab::validate::validate_dataset;
use gazelab::{ConfigError, DatasetLayout, RunConfig, Session};
use gazelab_core::scanpath::load_scanpath_csv;
use gazelab_core::Image;

/// Gaze dynamics simulation and saliency evaluation.
///
/// Any configuration key can also be given as `--key=value`, e.g.
/// `--n_runs=10 --pipeline=center_bias`.
#[derive(Parser)]
#[command(name = "gazelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and extract scanpaths.
    Simulate(Common),
    /// Accumulate saliency maps and apply the map pipeline.
    Saliency(Common),
    /// Score maps and scanpaths against human data.
    Evaluate(Common),
    /// simulate, saliency and evaluate in one go.
    Run(Common),
    /// Draw a simulated and a human scanpath over the stimulus.
    Render(RenderArgs),
    /// Check a dataset directory for consistency.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a small synthetic dataset.
    MakeFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Glob over stimulus stems or file names.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Print a machine-readable summary on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory of a previous `simulate`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Stimulus stem.
    #[arg(long)]
    image: String,
    #[arg(long, default_value_t = 0)]
    run: usize,
    /// Human observer to overlay; none if omitted.
    #[arg(long)]
    observer: Option<String>,
    /// Figure path; defaults to `<out>/figures/<image>_run_NNN[_<observer>].png`.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Pulls `--key=value` config overrides out of argv.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let dedicated = ["out", "seed", "jobs"];
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        if let Some((k, v)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            let key = normalize_key(k);
            if KEYS.contains(&key.as_str()) && !dedicated.contains(&key.as_str()) {
                overrides.push((key, v.to_string()));
                continue;
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}

fn build_config(c: &Common, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.params.seed = seed;
    }
    if let Some(jobs) = c.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn batch(name: &str, c: Common, overrides: &[(String, String)]) -> Result<i32> {
    let cfg = build_config(&c, overrides)?;
    let session = Session::new(cfg, &c.dataset, c.filter.as_deref())?;
    let (outcome, report) = match name {
        "simulate" => (session.simulate()?, None),
        "saliency" => (session.saliency()?, None),
        "evaluate" => {
            let (o, r) = session.evaluate()?;
            (o, Some(r))
        }
        _ => {
            let (o, r) = session.run_all()?;
            (o, Some(r))
        }
    };
    if c.json {
        print_json(&outcome)?;
    } else {
        if let Some(r) = &report {
            print!("{}", r.to_text());
        }
        eprintln!(
            "{name}: {} image(s) done, {} failed; output in {}",
            outcome.processed.len(),
            outcome.failed.len(),
            session.out_dir().display()
        );
    }
    Ok(outcome.exit_code())
}

fn image_dims(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok((w as usize, h as usize))
}

fn render(a: RenderArgs) -> Result<i32> {
    let ds = DatasetLayout::open(&a.dataset)?;
    let stim = ds
        .stimuli()
        .iter()
        .find(|s| s.stem == a.image)
        .ok_or_else(|| anyhow!("no stimulus named '{}'", a.image))?;
    let dims = image_dims(&stim.path)?;
    let run = format!("run_{:03}", a.run);
    let sim_path = a.out.join("scanpaths").join(&a.image).join(format!("{run}.csv"));
    let sim = load_scanpath_csv(&sim_path, dims)?
        .into_values()
        .next()
        .ok_or_else(|| anyhow!("{} is empty", sim_path.display()))?;
    let human = match &a.observer {
        Some(obs) => Some(
            ds.human_scanpaths(&a.image, dims)?
                .remove(obs)
                .ok_or_else(|| anyhow!("no observer '{obs}' for {}", a.image))?,
        ),
        None => None,
    };
    let img = Image::open(&stim.path)?;
    let (canvas, stats) = scanpath_figure(&img, &sim, human.as_ref());
    let output = a.output.unwrap_or_else(|| {
        let suffix = a.observer.as_ref().map_or(String::new(), |o| format!("_{o}"));
        a.out.join("figures").join(format!("{}_{run}{suffix}.png", a.image))
    });
    save_png(&canvas, &output)?;
    eprintln!(
        "wrote {} ({} start squares, {} arrows)",
        output.display(),
        stats.squares,
        stats.arrows
    );
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Simulate(c) => batch("simulate", c, &overrides),
        Command::Saliency(c) => batch("saliency", c, &overrides),
        Command::Evaluate(c) => batch("evaluate", c, &overrides),
        Command::Run(c) => batch("run", c, &overrides),
        other if !overrides.is_empty() => {
            let _ = other;
            Err(anyhow!(ConfigError::Invalid(
                "config overrides only apply to simulate, saliency, evaluate and run".into()
            )))
        }
        Command::Render(a) => render(a),
        Command::Validate { dataset, json } => validate_dataset(&dataset).and_then(|rep| {
            if json {
                print_json(&rep)?;
            } else {
                for p in &rep.problems {
                    println!("{p}");
                }
                eprintln!(
                    "{} stimuli, {} scanpath files ({} observers), {} maps, {} problem(s)",
                    rep.stimuli,
                    rep.scanpath_files,
                    rep.observers,
                    rep.maps,
                    rep.problems.len()
                );
            }
            Ok(if rep.is_ok() { 0 } else { 1 })
        }),
        Command::MakeFixture { out, seed } => gazelab::fixture::make_fixture(&out, seed).map(|_| {
            eprintln!("wrote synthetic dataset to {}", out.display());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
