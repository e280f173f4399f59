use serde::Serialize;

use crate::environment::{perturb_chip, EnvCondition, NoiseParams};
use crate::error::Result;
use crate::puf_model::{DelayMatrix, ResponseConfig, ShiftKey};

/// Fraction of paths whose entanglement bit differs from the nominal
/// (25 C, 5 V) value, one entry per condition in `envs`.
///
/// Each condition draws its jitter from its own stream of `seed`.
pub fn flip_rate(
    chip: &DelayMatrix,
    envs: &[EnvCondition],
    key: &ShiftKey,
    cfg: ResponseConfig,
    noise: NoiseParams,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let baseline = chip.delay_bits(key, cfg.delay_bit);
    envs.iter()
        .enumerate()
        .map(|(idx, &env)| {
            let hot = perturb_chip(chip, env, noise, env_seed(seed, idx))?;
            let flips = hot
                .delay_bits(key, cfg.delay_bit)
                .iter()
                .zip(&baseline)
                .filter(|(a, b)| a != b)
                .count();
            Ok(flips as f64 / baseline.len() as f64)
        })
        .collect()
}

fn env_seed(seed: u64, idx: usize) -> u64 {
    seed ^ (idx as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipRow {
    pub temperature: f64,
    pub vdd: f64,
    pub delay_bit: u32,
    /// Mean flip rate over chips.
    pub rate: f64,
}

/// Mean flip rate over `chips` for each environment and each delay bit.
/// Chip `c` uses jitter seed `seed + c`.
pub fn flip_rate_sweep(
    chips: &[DelayMatrix],
    envs: &[EnvCondition],
    key: &ShiftKey,
    delay_bits: &[u32],
    noise: NoiseParams,
    seed: u64,
) -> Result<Vec<FlipRow>> {
    let mut rows = Vec::new();
    for &m in delay_bits {
        let cfg = ResponseConfig::forward(m)?;
        let mut sums = vec![0.0; envs.len()];
        for (c, chip) in chips.iter().enumerate() {
            let rates = flip_rate(chip, envs, key, cfg, noise, seed.wrapping_add(c as u64))?;
            for (s, r) in sums.iter_mut().zip(rates) {
                *s += r;
            }
        }
        rows.extend(envs.iter().zip(sums).map(|(env, s)| FlipRow {
            temperature: env.temperature,
            vdd: env.vdd,
            delay_bit: m,
            rate: s / chips.len() as f64,
        }));
    }
    Ok(rows)
}
