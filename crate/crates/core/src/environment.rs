//! Temperature and supply-voltage perturbation of a chip's delays.
//!
//! The model is linear plus jitter: every gate is scaled by one global factor
//!
//! ```text
//! 1 + temp_coeff * (T - 25) / mean_path + vdd_coeff * (V - 5) / mean_path
//! ```
//!
//! so a mean-length path moves by `temp_coeff * (T - 25) + vdd_coeff * (V - 5)`
//! ns, and each gate then receives Gaussian jitter of sd
//! `jitter_sd / sqrt(stages)`, giving every path a total jitter of sd
//! `jitter_sd`. The nominal condition is the measurement baseline and is
//! returned unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PufError, Result};
use crate::puf_model::{DelayMatrix, GateDelay};

pub const NOMINAL_TEMPERATURE: f64 = 25.0;
pub const NOMINAL_VDD: f64 = 5.0;

/// Temperatures of the reproducibility sweep, in Celsius.
pub const TEMPERATURE_SWEEP: [f64; 7] = [0.0, 10.0, 20.0, 25.0, 30.0, 40.0, 50.0];
/// Supply voltages of the reproducibility sweep, in volts.
pub const VDD_SWEEP: [f64; 6] = [4.64, 4.70, 4.76, 4.82, 4.88, 4.94];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvCondition {
    pub temperature: f64,
    pub vdd: f64,
}

impl Default for EnvCondition {
    fn default() -> Self {
        Self::NOMINAL
    }
}

impl EnvCondition {
    pub const NOMINAL: Self = Self {
        temperature: NOMINAL_TEMPERATURE,
        vdd: NOMINAL_VDD,
    };

    pub fn new(temperature: f64, vdd: f64) -> Result<Self> {
        let env = Self { temperature, vdd };
        env.validate()?;
        Ok(env)
    }

    pub fn at_temperature(temperature: f64) -> Self {
        Self {
            temperature,
            vdd: NOMINAL_VDD,
        }
    }

    pub fn at_vdd(vdd: f64) -> Self {
        Self {
            temperature: NOMINAL_TEMPERATURE,
            vdd,
        }
    }

    /// Temperature in [0, 50] C; supply in [4.64, 5.0] V (the sweep plus nominal).
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=50.0).contains(&self.temperature) {
            return Err(PufError::Param(format!(
                "temperature {} C outside [0, 50]",
                self.temperature
            )));
        }
        if !(4.64..=NOMINAL_VDD).contains(&self.vdd) {
            return Err(PufError::Param(format!(
                "supply {} V outside [4.64, 5.0]",
                self.vdd
            )));
        }
        Ok(())
    }

    pub fn is_nominal(&self) -> bool {
        *self == Self::NOMINAL
    }

    /// The temperature sweep followed by the voltage sweep, nominal excluded.
    pub fn sweep() -> Vec<Self> {
        TEMPERATURE_SWEEP
            .iter()
            .filter(|&&t| t != NOMINAL_TEMPERATURE)
            .map(|&t| Self::at_temperature(t))
            .chain(VDD_SWEEP.iter().map(|&v| Self::at_vdd(v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// ns per degree C on a mean-length path.
    pub temp_coeff: f64,
    /// ns per volt on a mean-length path.
    pub vdd_coeff: f64,
    /// sd of the per-path jitter, ns.
    pub jitter_sd: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            temp_coeff: 0.02,
            vdd_coeff: -2.5,
            jitter_sd: 0.6,
        }
    }
}

impl NoiseParams {
    pub fn without_jitter(self) -> Self {
        Self {
            jitter_sd: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temp_coeff.is_finite() && self.vdd_coeff.is_finite()) {
            return Err(PufError::Param("noise coefficients must be finite".into()));
        }
        if !(self.jitter_sd.is_finite() && self.jitter_sd >= 0.0) {
            return Err(PufError::Param("jitter_sd must be >= 0".into()));
        }
        Ok(())
    }

    /// Deterministic offset of a mean-length path, ns.
    pub fn mean_offset(&self, env: EnvCondition) -> f64 {
        self.temp_coeff * (env.temperature - NOMINAL_TEMPERATURE)
            + self.vdd_coeff * (env.vdd - NOMINAL_VDD)
    }
}

pub fn perturb_chip(
    chip: &DelayMatrix,
    env: EnvCondition,
    noise: NoiseParams,
    seed: u64,
) -> Result<DelayMatrix> {
    env.validate()?;
    noise.validate()?;
    if env.is_nominal() {
        return Ok(chip.clone());
    }
    let params = chip.params();
    let factor = 1.0 + noise.mean_offset(env) / params.mean_path_delay();
    let gate_sd = noise.jitter_sd / (params.stages as f64).sqrt();
    let jitter = Normal::new(0.0, gate_sd).map_err(|e| PufError::Param(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let floor = 0.1 * params.mean_unit_delay;
    let mut scale = |d: f64| (d * factor + jitter.sample(&mut rng)).max(floor);
    let perturbed = chip.map_entries(|_, _, g| {
        let top = scale(g.top);
        let bottom = scale(g.bottom);
        GateDelay { top, bottom }
    });
    let id = format!("{}@{}C/{}V", chip.chip_id(), env.temperature, env.vdd);
    Ok(perturbed.with_chip_id(id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puf_model::{generate_chip, FoundryParams, ShiftKey};

    fn path_offsets(chip: &DelayMatrix, other: &DelayMatrix, key: &ShiftKey) -> Vec<f64> {
        (0..chip.width())
            .map(|i| other.path_delay(i, key) - chip.path_delay(i, key))
            .collect()
    }

    #[test]
    fn nominal_is_identity() {
        let chip = generate_chip(1, FoundryParams::default()).unwrap();
        let same = perturb_chip(&chip, EnvCondition::NOMINAL, NoiseParams::default(), 99).unwrap();
        assert_eq!(same, chip);
    }

    #[test]
    fn hot_offsets_stay_in_band() {
        let chip = generate_chip(2, FoundryParams::default()).unwrap();
        let hot = perturb_chip(
            &chip,
            EnvCondition::at_temperature(50.0),
            NoiseParams::default(),
            5,
        )
        .unwrap();
        for s in [0, 16, 200] {
            let key = ShiftKey::from_amount(s, 8);
            for off in path_offsets(&chip, &hot, &key) {
                assert!((-4.0..=5.0).contains(&off), "offset {off}");
            }
        }
    }

    #[test]
    fn low_supply_mean_offset_matches_linear_model() {
        // Explicit coefficient so the arithmetic is -12 * (4.64 - 5) = +4.32 ns.
        let noise = NoiseParams {
            vdd_coeff: -12.0,
            ..NoiseParams::default()
        };
        let chip = generate_chip(3, FoundryParams::default()).unwrap();
        let low = perturb_chip(&chip, EnvCondition::at_vdd(4.64), noise, 6).unwrap();
        let key = ShiftKey::from_amount(0, 8);
        let offs = path_offsets(&chip, &low, &key);
        let mean = offs.iter().sum::<f64>() / offs.len() as f64;
        // jitter averages out to sd 0.6/16; the scaling uses the chip's own path lengths
        assert!((mean - 4.32).abs() < 0.25, "mean offset {mean}");
    }

    #[test]
    fn out_of_range_env_rejected() {
        let chip = generate_chip(1, FoundryParams::with_stages(2)).unwrap();
        assert!(perturb_chip(
            &chip,
            EnvCondition {
                temperature: 80.0,
                vdd: 5.0
            },
            NoiseParams::default(),
            0
        )
        .is_err());
        assert!(perturb_chip(
            &chip,
            EnvCondition {
                temperature: 25.0,
                vdd: 4.0
            },
            NoiseParams::default(),
            0
        )
        .is_err());
    }

    #[test]
    fn hotter_never_faster_without_jitter() {
        let chip = generate_chip(4, FoundryParams::default()).unwrap();
        let noise = NoiseParams::default().without_jitter();
        let key = ShiftKey::from_amount(9, 8);
        let mut prev: Option<DelayMatrix> = None;
        for t in TEMPERATURE_SWEEP {
            let cur = perturb_chip(&chip, EnvCondition::at_temperature(t), noise, 1).unwrap();
            if let Some(p) = &prev {
                for i in 0..chip.width() {
                    assert!(cur.path_delay(i, &key) >= p.path_delay(i, &key) - 1e-9);
                }
            }
            prev = Some(cur);
        }
    }
}
