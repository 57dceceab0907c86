use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use astro_core::{CsvOptions, PipelineConfig, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// File locations used by the subcommands. Relative paths resolve against
/// the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data: PathBuf,
    pub plant: PathBuf,
    pub checkpoint: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data: "runs/default/data.csv".into(),
            plant: "runs/default/plant.toml".into(),
            checkpoint: "runs/default/model.ckpt".into(),
            out_dir: "runs/default".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub csv: CsvOptions,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(UsageError(format!("config file not found: {}", path.display())).into());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    /// Sets every seed to `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.pipeline.split_seed = seed;
        self.pipeline.model.seed = seed;
        self.pipeline.tuner.seed = seed;
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            synth: self.synth.seed,
            split: self.pipeline.split_seed,
            model: self.pipeline.model.seed,
            tuner: self.pipeline.tuner.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let check = |r: astro_core::Result<()>| r.map_err(|e| UsageError(e.to_string()));
        check(self.synth.validate())?;
        check(self.pipeline.tuner.validate())?;
        let r = self.pipeline.split_ratios;
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(UsageError(format!("split_ratios {r:?} must be non-negative and sum to 1")).into());
        }
        if !(0.0..=1.0).contains(&self.pipeline.baseline_tau) {
            return Err(UsageError("baseline_tau must be in [0, 1]".into()).into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub synth: u64,
    pub split: u64,
    pub model: u64,
    pub tuner: u64,
}

/// Fails with a usage error naming `path` when it does not exist.
pub fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(UsageError(format!("{what} not found: {}", path.display())).into())
    }
}
