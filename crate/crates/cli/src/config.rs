//! JSON run configuration. Flags and `MINERISK_*` variables override file values.

use anyhow::{bail, Context, Result};
use minerisk_core::io::read_json;
use minerisk_core::pipeline::Hyperparameters;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    pub fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerOverrides {
    pub chains: Option<usize>,
    pub draws: Option<usize>,
    pub warmup: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Instance kind for train/cv, deminer list for simulate.
    pub instance: Option<OneOrMany>,
    pub recalc_interval: Option<usize>,
    /// Training regions for train and cv.
    #[serde(default)]
    pub datasets: Vec<PathBuf>,
    /// Region to simulate on.
    pub test_dataset: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<PathBuf>,
    pub hyperparameters: Option<Hyperparameters>,
    #[serde(default)]
    pub sampler: SamplerOverrides,
    pub random_runs: Option<usize>,
    pub history_dir: Option<PathBuf>,
    pub bind: Option<String>,
    pub data_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Load a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.datasets.iter_mut().for_each(fix);
        cfg.models.iter_mut().for_each(fix);
        for p in [&mut cfg.out, &mut cfg.test_dataset, &mut cfg.history_dir, &mut cfg.data_dir].into_iter().flatten() {
            fix(p);
        }
        if let Some(h) = &cfg.hyperparameters {
            h.validate()?;
        }
        Ok(cfg)
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }
}

/// Flag value, else config value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Non-empty flag list, else config list.
pub fn pick_list<T>(flag: Vec<T>, file: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        file
    } else {
        flag
    }
}

pub fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None => {
            bail!("`{command}` needs an explicit seed: pass --seed, set MINERISK_SEED or put \"seed\" in the config")
        }
    }
}
