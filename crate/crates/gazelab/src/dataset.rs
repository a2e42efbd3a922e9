//! Stem-keyed dataset directory:
//!
//! ```text
//! root/
//!   stimuli/<stem>.{png,jpg,jpeg,pgm,ppm}
//!   scanpaths/<stem>/<observer>.csv
//!   fixmaps/<stem>.pgm      (optional)
//!   cfmaps/<stem>.pgm       (optional)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gazelab_core::scanpath::load_scanpath_csv;
use gazelab_core::Scanpath;

pub const STIMULUS_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "pgm", "ppm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub stem: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct DatasetLayout {
    root: PathBuf,
    stimuli: Vec<Stimulus>,
}

fn stem_of(path: &Path) -> Option<String> {
    path.file_stem().and_then(|s| s.to_str()).map(str::to_string)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    out.sort();
    Ok(out)
}

impl DatasetLayout {
    /// Indexes `root/stimuli`; other directories are read lazily.
    pub fn open(root: &Path) -> Result<Self> {
        let dir = root.join("stimuli");
        if !dir.is_dir() {
            bail!("{} has no stimuli/ directory", root.display());
        }
        let mut stimuli: Vec<Stimulus> = Vec::new();
        for path in sorted_entries(&dir)? {
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            if !path.is_file() || !ext.is_some_and(|e| STIMULUS_EXTENSIONS.contains(&e.as_str())) {
                continue;
            }
            let Some(stem) = stem_of(&path) else { continue };
            if let Some(prev) = stimuli.iter().find(|s| s.stem == stem) {
                bail!(
                    "stimuli {} and {} share the stem '{stem}'",
                    prev.path.display(),
                    path.display()
                );
            }
            stimuli.push(Stimulus { stem, path });
        }
        Ok(Self {
            root: root.to_path_buf(),
            stimuli,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.stimuli
    }

    /// Stimuli whose stem or file name matches `pattern`; `None` keeps all.
    pub fn select(&self, pattern: Option<&str>) -> Result<Vec<Stimulus>> {
        let Some(pattern) = pattern else {
            return Ok(self.stimuli.clone());
        };
        let glob = glob::Pattern::new(pattern).with_context(|| format!("bad filter '{pattern}'"))?;
        let picked: Vec<Stimulus> = self
            .stimuli
            .iter()
            .filter(|s| {
                let name = s.path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                glob.matches(&s.stem) || glob.matches(name)
            })
            .cloned()
            .collect();
        if picked.is_empty() {
            bail!("no stimuli matched '{pattern}'");
        }
        Ok(picked)
    }

    pub fn scanpath_dir(&self, stem: &str) -> PathBuf {
        self.root.join("scanpaths").join(stem)
    }

    pub fn fixmap_path(&self, stem: &str) -> Option<PathBuf> {
        let p = self.root.join("fixmaps").join(format!("{stem}.pgm"));
        p.is_file().then_some(p)
    }

    pub fn has_cfmaps(&self) -> bool {
        self.root.join("cfmaps").is_dir()
    }

    pub fn cfmap_path(&self, stem: &str) -> Option<PathBuf> {
        let p = self.root.join("cfmaps").join(format!("{stem}.pgm"));
        p.is_file().then_some(p)
    }

    /// Human scanpaths keyed by observer; empty when the image has none.
    pub fn human_scanpaths(&self, stem: &str, dims: (usize, usize)) -> Result<BTreeMap<String, Scanpath>> {
        let dir = self.scanpath_dir(stem);
        let mut out = BTreeMap::new();
        if !dir.is_dir() {
            return Ok(out);
        }
        for path in sorted_entries(&dir)? {
            if path.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            for (observer, sp) in load_scanpath_csv(&path, dims)? {
                if out.insert(observer.clone(), sp).is_some() {
                    bail!("observer '{observer}' appears twice for {stem}");
                }
            }
        }
        Ok(out)
    }

    /// Entries in scanpaths/, fixmaps/ and cfmaps/ that name no stimulus.
    pub fn orphans(&self) -> Result<Vec<PathBuf>> {
        let known = |stem: &str| self.stimuli.iter().any(|s| s.stem == stem);
        let mut out = Vec::new();
        for sub in ["scanpaths", "fixmaps", "cfmaps"] {
            let dir = self.root.join(sub);
            if !dir.is_dir() {
                continue;
            }
            for path in sorted_entries(&dir)? {
                let stem = if sub == "scanpaths" {
                    path.file_name().and_then(|n| n.to_str()).map(str::to_string)
                } else {
                    stem_of(&path)
                };
                if !stem.is_some_and(|s| known(&s)) {
                    out.push(path);
                }
            }
        }
        Ok(out)
    }
}
