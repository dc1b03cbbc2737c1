use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;
use crate::dimstats::{ExemplarOptions, RelevanceThresholds};
use crate::distfit::{CauchyFitOptions, ZmFitOptions};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitGrids {
    pub zm: ZmFitOptions,
    pub cauchy: CauchyFitOptions,
}

/// Everything a run needs. Loaded from JSON; command-line flags override
/// individual fields. Relative paths in a config file are taken relative to
/// the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Packet log, `epoch_ns<TAB>src` per line.
    pub packets: Option<PathBuf>,
    /// Enrichment log, one JSON object per line.
    pub enrichment: Option<PathBuf>,
    /// Anonymization key; when absent both inputs are assumed to be
    /// anonymized already.
    pub key_file: Option<PathBuf>,
    /// Packets per window.
    pub nv: u64,
    pub seed: u64,
    /// Where the report bundle goes. Not part of the recorded configuration
    /// so that identical runs into different directories agree.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub thresholds: RelevanceThresholds,
    pub exemplar: ExemplarOptions,
    pub fit_grids: FitGrids,
    /// Fit short trailing windows too (they are always reported).
    pub include_partial: bool,
    /// Also emit the per-window metadata matrices.
    pub write_matrices: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            packets: None,
            enrichment: None,
            key_file: None,
            nv: 1 << 20,
            seed: 1,
            out_dir: None,
            thresholds: RelevanceThresholds::default(),
            exemplar: ExemplarOptions::default(),
            fit_grids: FitGrids::default(),
            include_partial: false,
            write_matrices: true,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ReportError::Usage(format!("config file {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| ReportError::Usage(format!("config file {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.packets, &mut cfg.enrichment, &mut cfg.key_file, &mut cfg.out_dir] {
            rebase(base, p);
        }
        Ok(cfg)
    }

    /// Checks invariants and that every referenced input exists.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.nv < 2 {
            return Err(ReportError::Usage(format!("nv must be >= 2, got {}", self.nv)));
        }
        if let Some(k) = &self.key_file {
            if !k.is_file() {
                return Err(ReportError::Usage(format!("key file not found: {}", k.display())));
            }
        }
        for (what, p) in [("packet log", &self.packets), ("enrichment log", &self.enrichment)] {
            match p {
                None => return Err(ReportError::Usage(format!("no {what} given"))),
                Some(p) if !p.is_file() => {
                    return Err(ReportError::Usage(format!("{what} not found: {}", p.display())))
                }
                Some(_) => {}
            }
        }
        if !(0.0..=1.0).contains(&self.thresholds.irrelevance) {
            return Err(ReportError::Usage("irrelevance threshold must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Canonical JSON of the configuration (without the output directory).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
