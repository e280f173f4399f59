//! Flat TOML experiment configuration.
//!
//! Every key is optional. Command-line flags override the file, and the file
//! overrides the `PUFSHIFT_SEED` environment variable.
//!
//! ```toml
//! seed = 42
//! stages = 8
//! mean_unit_delay_ns = 15.0
//! sd_unit_delay_ns = 3.6
//! clock_period_ns = 4.0
//! temp_coeff = 0.02
//! vdd_coeff = -2.5
//! jitter_sd = 0.6
//! delay_bit = 2
//! chips = 200
//! sessions = 1000
//! n_keys = 50
//! holdout = 2000
//! training_sizes = [800, 8000, 80000]
//! output_dir = "reports"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pufshift::{FoundryParams, NoiseParams};
use serde::Deserialize;

pub const SEED_ENV: &str = "PUFSHIFT_SEED";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub stages: Option<usize>,
    pub mean_unit_delay_ns: Option<f64>,
    pub sd_unit_delay_ns: Option<f64>,
    pub clock_period_ns: Option<f64>,
    pub temp_coeff: Option<f64>,
    pub vdd_coeff: Option<f64>,
    pub jitter_sd: Option<f64>,
    pub delay_bit: Option<u32>,
    pub chips: Option<usize>,
    pub sessions: Option<usize>,
    pub n_keys: Option<usize>,
    pub holdout: Option<usize>,
    pub training_sizes: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.foundry(None)?;
        cfg.noise()?;
        Ok(cfg)
    }

    /// Flag, then config file, then `PUFSHIFT_SEED`, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(seed) = flag.or(self.seed) {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not a u64")),
            Err(_) => Ok(0),
        }
    }

    pub fn foundry(&self, stages_flag: Option<usize>) -> Result<FoundryParams> {
        let mut p = FoundryParams::with_stages(stages_flag.or(self.stages).unwrap_or(8));
        if let Some(v) = self.mean_unit_delay_ns {
            p.mean_unit_delay = v;
        }
        if let Some(v) = self.sd_unit_delay_ns {
            p.sd_unit_delay = v;
        }
        if let Some(v) = self.clock_period_ns {
            p.clock_period = v;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        let d = NoiseParams::default();
        let n = NoiseParams {
            temp_coeff: self.temp_coeff.unwrap_or(d.temp_coeff),
            vdd_coeff: self.vdd_coeff.unwrap_or(d.vdd_coeff),
            jitter_sd: self.jitter_sd.unwrap_or(d.jitter_sd),
        };
        n.validate()?;
        Ok(n)
    }

    pub fn delay_bit(&self, flag: Option<u32>) -> u32 {
        flag.or(self.delay_bit).unwrap_or(2)
    }

    pub fn chips(&self, flag: Option<usize>) -> usize {
        flag.or(self.chips).unwrap_or(200)
    }

    pub fn sessions(&self, flag: Option<usize>) -> usize {
        flag.or(self.sessions).unwrap_or(1000)
    }

    /// Relative output paths land under `output_dir` when one is configured.
    pub fn output_path(&self, path: &Path) -> PathBuf {
        match &self.output_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}
