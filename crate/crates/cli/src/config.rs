//! Run configuration: a TOML file, overridden field by field by flags.
//!
//! ```toml
//! data = "survey.csv"        # or a [synth] table
//! seeds = [1, 2, 3]
//! out_dir = "runs/evonf"
//!
//! [split]
//! train_fraction = 0.9
//! seed = 3
//!
//! [evolution]
//! population_size = 40
//! max_generations = 35
//!
//! [mlp]
//! rate = 0.05
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use evonf::dataset::{load_csv, split, synth_generate, Dataset, Scaling};
use evonf::evolution::EvolutionConfig;
use evonf::mlp::MlpConfig;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Environment variable naming the base directory for default outputs.
pub const OUT_DIR_ENV: &str = "EVONF_OUT_DIR";
const DEFAULT_OUT_BASE: &str = "evonf-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
    pub noise_sd: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n: 69, seed: 3, noise_sd: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.9, seed: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub split: SplitSpec,
    pub evolution: EvolutionConfig,
    pub mlp: MlpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            seeds: vec![1, 2, 3],
            out_dir: None,
            synth: None,
            split: SplitSpec::default(),
            evolution: EvolutionConfig::default(),
            mlp: MlpConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| evonf::Error::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| Failure::new("config-invalid", format!("{}: {}", path.display(), e.message())).into())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.data, &self.synth) {
            (None, None) => return Err(Failure::new("config-invalid", "no data source: pass --data or --synth").into()),
            (Some(_), Some(_)) => {
                return Err(Failure::new("config-invalid", "both a data path and a synth spec are given").into())
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(Failure::new("config-invalid", "seed list is empty").into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serializing configuration")
    }

    /// Output directory: the configured one, else `$EVONF_OUT_DIR/<leaf>`,
    /// else `evonf-out/<leaf>`.
    pub fn resolve_out_dir(&self, leaf: &str) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| default_out_base().join(leaf))
    }

    /// Loads or generates the raw data, splits it and scales both parts with
    /// statistics of the training part.
    pub fn prepare_data(&self) -> anyhow::Result<PreparedData> {
        self.validate()?;
        let raw = match (&self.data, &self.synth) {
            (Some(path), _) => load_csv(path)?,
            (None, Some(s)) => synth_generate(s.n, s.seed, s.noise_sd)?,
            (None, None) => unreachable!("validated above"),
        };
        let (train, test) = split(&raw, self.split.train_fraction, self.split.seed)?;
        let scaling = Scaling::fit(&train)?;
        Ok(PreparedData { train: scaling.apply(&train)?, test: scaling.apply(&test)?, scaling })
    }
}

pub fn default_out_base() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_BASE))
}

pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub scaling: Scaling,
}
