//! Where each command reads and writes inside the output directory.

use std::path::{Path, PathBuf};

use crate::RunConfig;

pub struct Layout {
    pub out: PathBuf,
    pub manifest: PathBuf,
}

impl Layout {
    pub fn new(run: &RunConfig) -> Self {
        let manifest = run
            .manifest
            .clone()
            .unwrap_or_else(|| run.out.join("manifest.toml"));
        Self {
            out: run.out.clone(),
            manifest,
        }
    }

    pub fn samples_dir(&self) -> PathBuf {
        self.manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join("samples")
    }

    pub fn templates(&self) -> PathBuf {
        self.out.join("templates.json")
    }

    pub fn dataset(&self) -> PathBuf {
        self.out.join("dataset.bin")
    }

    pub fn dataset_summary(&self) -> PathBuf {
        self.out.join("dataset.json")
    }

    pub fn model(&self) -> PathBuf {
        self.out.join("model.json")
    }

    pub fn training(&self) -> PathBuf {
        self.out.join("training.json")
    }

    pub fn ranges(&self) -> PathBuf {
        self.out.join("ranges.json")
    }

    pub fn scan_dump(&self, id: &str) -> PathBuf {
        self.out.join("scans").join(format!("{id}.csv"))
    }

    pub fn timing(&self) -> PathBuf {
        self.out.join("timing.csv")
    }

    pub fn detections(&self, id: &str, ext: &str) -> PathBuf {
        detections_in(&self.out, id, ext)
    }

    pub fn eval_json(&self) -> PathBuf {
        self.out.join("eval.json")
    }

    pub fn eval_table(&self) -> PathBuf {
        self.out.join("eval.txt")
    }

    pub fn pr_curves(&self) -> PathBuf {
        self.out.join("pr_curves.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.out.join("report.txt")
    }
}

/// `<run>/detections/<id>.<ext>`; `ext` is `csv`, `json`, `all.csv`,
/// `chrom.csv` or `meta.json`.
pub fn detections_in(run: &Path, id: &str, ext: &str) -> PathBuf {
    run.join("detections").join(format!("{id}.{ext}"))
}
