//! Behavioral model of a barrel-shifter PUF.
//!
//! A chip is a `width x stages` grid of shift units. Each unit has two
//! transmission-gate delays: `top` (taken when the stage's key bit is 1 and
//! the bit is shifted in from the lower row) and `bottom` (key bit 0, the
//! bit passes straight through). Stage `j` rotates by `2^j` when `key_j = 1`.
//! The delay of a path is the sum of the gates it traverses; a counter
//! clocked at `clock_period` quantizes it, and the `m`-th least significant
//! counter bit is XORed into the bit carried by that path.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{check_width, PufError, Result};

/// Width of the delay counter in bits. Larger counts saturate.
pub const COUNTER_BITS: u32 = 10;
const COUNTER_MAX: u32 = (1 << COUNTER_BITS) - 1;

/// Schema version written into chip model files.
pub const CHIP_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundryParams {
    pub width: usize,
    pub stages: usize,
    #[serde(rename = "mean_unit_delay_ns")]
    pub mean_unit_delay: f64,
    #[serde(rename = "sd_unit_delay_ns")]
    pub sd_unit_delay: f64,
    #[serde(rename = "clock_period_ns")]
    pub clock_period: f64,
}

impl Default for FoundryParams {
    fn default() -> Self {
        Self {
            width: 256,
            stages: 8,
            mean_unit_delay: 15.0,
            sd_unit_delay: 3.6,
            clock_period: 4.0,
        }
    }
}

impl FoundryParams {
    /// Defaults resized to `stages` stages (`width = 2^stages`).
    pub fn with_stages(stages: usize) -> Self {
        Self {
            width: 1 << stages,
            stages,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 || self.stages >= usize::BITS as usize {
            return Err(PufError::Param(format!(
                "stages must be positive, got {}",
                self.stages
            )));
        }
        if self.width != 1 << self.stages {
            return Err(PufError::Param(format!(
                "width {} must equal 2^stages = {}",
                self.width,
                1usize << self.stages
            )));
        }
        if !(self.mean_unit_delay.is_finite() && self.mean_unit_delay > 0.0) {
            return Err(PufError::Param("mean_unit_delay must be > 0".into()));
        }
        if !(self.sd_unit_delay.is_finite() && self.sd_unit_delay >= 0.0) {
            return Err(PufError::Param("sd_unit_delay must be >= 0".into()));
        }
        if !(self.clock_period.is_finite() && self.clock_period > 0.0) {
            return Err(PufError::Param("clock_period must be > 0".into()));
        }
        Ok(())
    }

    /// Expected delay of a full path, `stages * mean_unit_delay`.
    pub fn mean_path_delay(&self) -> f64 {
        self.stages as f64 * self.mean_unit_delay
    }
}

/// The two gate delays of one shift unit, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDelay {
    pub top: f64,
    pub bottom: f64,
}

impl GateDelay {
    pub fn uniform(delay: f64) -> Self {
        Self {
            top: delay,
            bottom: delay,
        }
    }

    pub fn select(&self, key_bit: bool) -> f64 {
        if key_bit {
            self.top
        } else {
            self.bottom
        }
    }
}

/// Per-stage shift-select bits; `bits[j]` drives stage `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShiftKey {
    bits: Vec<bool>,
}

impl ShiftKey {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Key whose rotation amount is `amount mod 2^stages`.
    pub fn from_amount(amount: usize, stages: usize) -> Self {
        Self {
            bits: (0..stages).map(|j| amount >> j & 1 == 1).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(stages: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..stages).map(|_| rng.random::<bool>()).collect(),
        }
    }

    /// Parses either a stage-ordered bit string (`"10"` means key_0 = 1) or,
    /// with a leading `s=`, a rotation amount.
    pub fn parse(s: &str, stages: usize) -> Result<Self> {
        if let Some(amount) = s.strip_prefix("s=") {
            let amount: usize = amount
                .parse()
                .map_err(|_| PufError::Format(format!("bad rotation amount {s:?}")))?;
            if amount >= 1 << stages {
                return Err(PufError::Param(format!(
                    "rotation {amount} exceeds 2^{stages}"
                )));
            }
            return Ok(Self::from_amount(amount, stages));
        }
        let key = Self::from_bits(Block::from_bit_str(s)?.bits().to_vec());
        check_width(stages, key.stages())?;
        Ok(key)
    }

    pub fn stages(&self) -> usize {
        self.bits.len()
    }

    pub fn bit(&self, stage: usize) -> bool {
        self.bits[stage]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn amount(&self) -> usize {
        rotation_amount(self)
    }

    /// The key realizing the inverse rotation `(2^stages - s) mod 2^stages`.
    pub fn complement(&self) -> Self {
        let width = 1usize << self.stages();
        Self::from_amount((width - self.amount()) % width, self.stages())
    }

    pub fn to_bit_str(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseConfig {
    /// 1-based counter bit used for entanglement (1 = LSB).
    pub delay_bit: u32,
    pub direction: Direction,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        Self {
            delay_bit: 2,
            direction: Direction::Forward,
        }
    }
}

impl ResponseConfig {
    pub fn new(delay_bit: u32, direction: Direction) -> Result<Self> {
        let cfg = Self {
            delay_bit,
            direction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn forward(delay_bit: u32) -> Result<Self> {
        Self::new(delay_bit, Direction::Forward)
    }

    pub fn with_direction(self, direction: Direction) -> Self {
        Self { direction, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.delay_bit) {
            return Err(PufError::Param(format!(
                "delay bit index must be 1, 2 or 3, got {}",
                self.delay_bit
            )));
        }
        Ok(())
    }
}

/// One simulated chip.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMatrix {
    params: FoundryParams,
    /// Row-major: `entries[row * stages + stage]`.
    entries: Vec<GateDelay>,
    chip_id: String,
    seed: u64,
}

/// Samples a chip: every gate delay is an independent draw from
/// `Normal(mean_unit_delay, sd_unit_delay)` truncated below at
/// `0.1 * mean_unit_delay` (rejection sampling).
pub fn generate_chip(seed: u64, params: FoundryParams) -> Result<DelayMatrix> {
    params.validate()?;
    let normal = Normal::new(params.mean_unit_delay, params.sd_unit_delay)
        .map_err(|e| PufError::Param(e.to_string()))?;
    let floor = 0.1 * params.mean_unit_delay;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = || loop {
        let d = normal.sample(&mut rng);
        if d >= floor {
            break d;
        }
    };
    let entries = (0..params.width * params.stages)
        .map(|_| {
            let top = draw();
            let bottom = draw();
            GateDelay { top, bottom }
        })
        .collect();
    Ok(DelayMatrix {
        params,
        entries,
        chip_id: default_chip_id(seed),
        seed,
    })
}

fn default_chip_id(seed: u64) -> String {
    format!("bs-{seed:016x}")
}

/// `s = sum key_i * 2^i`.
pub fn rotation_amount(key: &ShiftKey) -> usize {
    key.bits()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| 1usize << i)
        .sum()
}

/// Position of the bit entering at `input_index` after each stage.
pub fn path_positions(input_index: usize, key: &ShiftKey, stages: usize) -> Vec<usize> {
    let width = 1usize << stages;
    let mut pos = input_index % width;
    (0..stages)
        .map(|j| {
            if key.bit(j) {
                pos = (pos + (1 << j)) % width;
            }
            pos
        })
        .collect()
}

/// Sum of the gate delays along the path of `input_index` under `key`.
///
/// The model is direction-symmetric, so `Reverse` returns the same value.
/// Panics if `input_index` or the key length do not fit the chip.
pub fn path_delay(
    chip: &DelayMatrix,
    input_index: usize,
    key: &ShiftKey,
    _direction: Direction,
) -> f64 {
    chip.path_delay(input_index, key)
}

/// Counter value after `delay` ns: `floor(delay / clock_period)`, saturating
/// at the counter width.
pub fn quantize_delay(delay: f64, clock_period: f64) -> u32 {
    let count = (delay.max(0.0) / clock_period).floor();
    if count > COUNTER_MAX as f64 {
        log::warn!("delay {delay} ns saturates the {COUNTER_BITS}-bit counter");
        return COUNTER_MAX;
    }
    count as u32
}

/// The `m`-th least significant bit of `counter` (`m = 1` is the LSB).
pub fn delay_bit(counter: u32, m: u32) -> bool {
    debug_assert!(m >= 1);
    m <= u32::BITS && counter >> (m - 1) & 1 == 1
}

/// Keyed, entangled response. See [`DelayMatrix::respond`].
pub fn respond(
    chip: &DelayMatrix,
    block: &Block,
    key: &ShiftKey,
    cfg: ResponseConfig,
) -> Result<Block> {
    chip.respond(block, key, cfg)
}

impl DelayMatrix {
    /// Builds a chip from explicit gate delays (row-major, `width * stages`).
    pub fn from_entries(params: FoundryParams, entries: Vec<GateDelay>, seed: u64) -> Result<Self> {
        params.validate()?;
        check_width(params.width * params.stages, entries.len())?;
        if let Some(bad) = entries
            .iter()
            .flat_map(|g| [g.top, g.bottom])
            .find(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(PufError::Param(format!(
                "gate delay {bad} is not a positive finite value"
            )));
        }
        Ok(Self {
            params,
            entries,
            chip_id: default_chip_id(seed),
            seed,
        })
    }

    pub fn params(&self) -> &FoundryParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn stages(&self) -> usize {
        self.params.stages
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chip_id(&self) -> &str {
        &self.chip_id
    }

    pub fn with_chip_id(mut self, chip_id: impl Into<String>) -> Self {
        self.chip_id = chip_id.into();
        self
    }

    pub fn gate(&self, row: usize, stage: usize) -> GateDelay {
        self.entries[row * self.params.stages + stage]
    }

    pub fn entries(&self) -> &[GateDelay] {
        &self.entries
    }

    pub(crate) fn map_entries(
        &self,
        mut f: impl FnMut(usize, usize, GateDelay) -> GateDelay,
    ) -> Self {
        let stages = self.params.stages;
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(idx, &g)| f(idx / stages, idx % stages, g))
            .collect();
        Self {
            entries,
            ..self.clone()
        }
    }

    pub fn path_delay(&self, input_index: usize, key: &ShiftKey) -> f64 {
        assert_eq!(
            key.stages(),
            self.stages(),
            "key length must match chip stages"
        );
        let width = self.width();
        let mut pos = input_index % width;
        let mut total = 0.0;
        for j in 0..self.stages() {
            let bit = key.bit(j);
            if bit {
                pos = (pos + (1 << j)) % width;
            }
            total += self.gate(pos, j).select(bit);
        }
        total
    }

    pub fn counter(&self, input_index: usize, key: &ShiftKey) -> u32 {
        quantize_delay(self.path_delay(input_index, key), self.params.clock_period)
    }

    /// Entanglement bit of every path under `key`, indexed by input position.
    pub fn delay_bits(&self, key: &ShiftKey, m: u32) -> Vec<bool> {
        (0..self.width())
            .map(|i| delay_bit(self.counter(i, key), m))
            .collect()
    }

    /// Forward: `out[(i + s) % w] = block[i] ^ bit_i`. Reverse (the inverse
    /// PUF): `out[i] = block[(i + s) % w] ^ bit_i`, where `bit_i` is the
    /// entanglement bit of the path starting at input `i`.
    pub fn respond(&self, block: &Block, key: &ShiftKey, cfg: ResponseConfig) -> Result<Block> {
        check_width(self.width(), block.width())?;
        check_width(self.stages(), key.stages())?;
        let bits = self.delay_bits(key, cfg.delay_bit);
        Ok(entangle(block, &bits, key.amount(), cfg.direction))
    }

    /// The top-left `2^stages x stages` corner as a smaller chip.
    pub fn sub_matrix(&self, stages: usize) -> Result<Self> {
        if stages > self.stages() {
            return Err(PufError::Param(format!(
                "cannot take {stages} stages from a {}-stage chip",
                self.stages()
            )));
        }
        let params = FoundryParams {
            width: 1 << stages,
            stages,
            ..self.params
        };
        params.validate()?;
        let entries = (0..params.width)
            .flat_map(|row| (0..stages).map(move |j| (row, j)))
            .map(|(row, j)| self.gate(row, j))
            .collect();
        Ok(Self {
            params,
            entries,
            chip_id: format!("{}[{}x{}]", self.chip_id, params.width, stages),
            seed: self.seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ChipFile {
            version: CHIP_FILE_VERSION,
            seed: self.seed,
            params: self.params,
            entries: self.entries.iter().map(|g| [g.top, g.bottom]).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ChipFile = serde_json::from_str(s)?;
        if file.version != CHIP_FILE_VERSION {
            return Err(PufError::Format(format!(
                "unsupported chip file version {}",
                file.version
            )));
        }
        let entries = file
            .entries
            .into_iter()
            .map(|[top, bottom]| GateDelay { top, bottom })
            .collect();
        Self::from_entries(file.params, entries, file.seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn entangle(
    block: &Block,
    path_bits: &[bool],
    amount: usize,
    direction: Direction,
) -> Block {
    let w = block.width();
    let mut out = vec![false; w];
    for (i, &d) in path_bits.iter().enumerate() {
        let j = (i + amount) % w;
        match direction {
            Direction::Forward => out[j] = block.bit(i) ^ d,
            Direction::Reverse => out[i] = block.bit(j) ^ d,
        }
    }
    Block::from_bits(out)
}

#[derive(Serialize, Deserialize)]
struct ChipFile {
    version: u32,
    seed: u64,
    params: FoundryParams,
    entries: Vec<[f64; 2]>,
}

/// Optional forward/reverse delay mismatch for robustness experiments.
///
/// The reverse traversal of path `(input, key)` takes `offset` ns longer than
/// the forward one, with `offset` uniform in `[-max_ns, max_ns]` and fixed per
/// path by `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetryInjection {
    pub seed: u64,
    pub max_ns: f64,
}

impl AsymmetryInjection {
    /// Largest 0/1 transmission-time difference observed across process corners.
    pub const CORNER_MAX_NS: f64 = 2.34;

    pub fn new(seed: u64, max_ns: f64) -> Self {
        Self { seed, max_ns }
    }

    pub fn offset(&self, input_index: usize, key: &ShiftKey) -> f64 {
        if self.max_ns == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(((key.amount() as u64) << 32) | input_index as u64);
        rng.random_range(-self.max_ns..=self.max_ns)
    }

    pub fn path_delay(
        &self,
        chip: &DelayMatrix,
        input_index: usize,
        key: &ShiftKey,
        direction: Direction,
    ) -> f64 {
        let base = chip.path_delay(input_index, key);
        match direction {
            Direction::Forward => base,
            Direction::Reverse => base + self.offset(input_index, key),
        }
    }
}
