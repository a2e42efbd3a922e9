//! Dataset consistency checks.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use gazelab_core::pgm::read_pgm;
use gazelab_core::scanpath::load_scanpath_csv;
use gazelab_core::Image;

use crate::dataset::DatasetLayout;

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub stimuli: usize,
    pub scanpath_files: usize,
    pub observers: usize,
    pub maps: usize,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks every file of a dataset; problems are collected, not fatal.
pub fn validate_dataset(root: &Path) -> Result<ValidationReport> {
    let ds = DatasetLayout::open(root)?;
    let mut rep = ValidationReport {
        stimuli: ds.stimuli().len(),
        ..Default::default()
    };
    for orphan in ds.orphans()? {
        rep.problems
            .push(format!("{}: does not name any stimulus", orphan.display()));
    }
    for stim in ds.stimuli() {
        let img = match Image::open(&stim.path) {
            Ok(img) => img,
            Err(e) => {
                rep.problems.push(e.to_string());
                continue;
            }
        };
        let dims = (img.width(), img.height());
        let dir = ds.scanpath_dir(&stim.stem);
        if dir.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("csv"))
                .collect();
            files.sort();
            for f in files {
                rep.scanpath_files += 1;
                match load_scanpath_csv(&f, dims) {
                    Ok(by_observer) => {
                        for (obs, sp) in by_observer {
                            rep.observers += 1;
                            if let Err(e) = sp.validate() {
                                rep.problems.push(format!("{} ({obs}): {e}", f.display()));
                            }
                        }
                    }
                    Err(e) => rep.problems.push(e.to_string()),
                }
            }
        }
        for map in [ds.fixmap_path(&stim.stem), ds.cfmap_path(&stim.stem)].into_iter().flatten() {
            rep.maps += 1;
            if let Err(e) = read_pgm(&map) {
                rep.problems.push(e.to_string());
            }
        }
    }
    Ok(rep)
}
