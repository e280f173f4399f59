//! Five tests from NIST SP 800-22: Frequency, BlockFrequency,
//! CumulativeSums (forward and backward), Runs and Serial. Together they
//! produce seven p-value streams per sequence.

use std::fmt::Write as _;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::block::Block;
use crate::error::{PufError, Result};

pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence(Vec<bool>);

impl BitSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_str_bits(s: &str) -> Result<Self> {
        Ok(Self(Block::from_bit_str(s)?.bits().to_vec()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl From<&Block> for BitSequence {
    fn from(b: &Block) -> Self {
        Self(b.bits().to_vec())
    }
}

impl From<Block> for BitSequence {
    fn from(b: Block) -> Self {
        Self(b.bits().to_vec())
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(a, x).clamp(0.0, 1.0)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn frequency_test(seq: &BitSequence) -> f64 {
    let n = seq.len() as f64;
    let s = 2.0 * seq.ones() as f64 - n;
    erfc(s.abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

pub fn block_frequency_test(seq: &BitSequence, block_len: usize) -> Result<f64> {
    if block_len < 2 || block_len > seq.len() {
        return Err(PufError::Param(format!(
            "block length {block_len} must be in [2, {}]",
            seq.len()
        )));
    }
    let blocks = seq.len() / block_len;
    let chi2: f64 = seq
        .bits()
        .chunks_exact(block_len)
        .map(|c| {
            let pi = c.iter().filter(|&&b| b).count() as f64 / block_len as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * block_len as f64;
    Ok(igamc(blocks as f64 / 2.0, chi2 / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CusumMode {
    Forward,
    Backward,
}

pub fn cumulative_sums_test(seq: &BitSequence, mode: CusumMode) -> f64 {
    let n = seq.len();
    if n == 0 {
        return 0.0;
    }
    let step = |b: &bool| if *b { 1i64 } else { -1 };
    let mut sum = 0i64;
    let mut z = 0i64;
    let mut track = |b: &bool| {
        sum += step(b);
        z = z.max(sum.abs());
    };
    match mode {
        CusumMode::Forward => seq.bits().iter().for_each(&mut track),
        CusumMode::Backward => seq.bits().iter().rev().for_each(&mut track),
    }
    cumulative_sums_p_value(n, z as usize)
}

/// Two-sided p-value of a maximal partial-sum excursion `z` over `n` steps.
pub fn cumulative_sums_p_value(n: usize, z: usize) -> f64 {
    if z == 0 {
        return 1.0;
    }
    let (n, z) = (n as f64, z as f64);
    let sqrt_n = n.sqrt();
    let term = |a: f64, b: f64| normal_cdf(a * z / sqrt_n) - normal_cdf(b * z / sqrt_n);
    // Loop bounds truncate toward zero, as in the reference implementation.
    let sum1: f64 = (((-n / z + 1.0) / 4.0) as i64..=((n / z - 1.0) / 4.0) as i64)
        .map(|k| {
            let k = k as f64;
            term(4.0 * k + 1.0, 4.0 * k - 1.0)
        })
        .sum();
    let sum2: f64 = (((-n / z - 3.0) / 4.0) as i64..=((n / z - 1.0) / 4.0) as i64)
        .map(|k| {
            let k = k as f64;
            term(4.0 * k + 3.0, 4.0 * k + 1.0)
        })
        .sum();
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}

/// Returns 0 when the frequency pretest `|pi - 1/2| < 2/sqrt(n)` fails.
pub fn runs_test(seq: &BitSequence) -> f64 {
    let n = seq.len() as f64;
    if seq.is_empty() {
        return 0.0;
    }
    let pi = seq.ones() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return 0.0;
    }
    let runs = 1 + seq.bits().windows(2).filter(|w| w[0] != w[1]).count();
    let v = runs as f64;
    let spread = pi * (1.0 - pi);
    erfc((v - 2.0 * n * spread).abs() / (2.0 * (2.0 * n).sqrt() * spread))
}

/// `psi^2_m` over overlapping `m`-bit patterns of the cyclically extended
/// sequence. `psi^2_0 = psi^2_{-1} = 0`.
fn psi_sq(seq: &[bool], m: i32) -> f64 {
    if m <= 0 {
        return 0.0;
    }
    let m = m as usize;
    let n = seq.len();
    let mut counts = vec![0u64; 1 << m];
    for i in 0..n {
        let pattern = (0..m).fold(0usize, |acc, k| acc << 1 | usize::from(seq[(i + k) % n]));
        counts[pattern] += 1;
    }
    let sum_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    (1u64 << m) as f64 / n as f64 * sum_sq - n as f64
}

/// Returns `(p1, p2)`. Requires `1 <= m <= floor(log2 n)`; NIST recommends
/// `m < floor(log2 n) - 2`.
pub fn serial_test(seq: &BitSequence, m: u32) -> Result<(f64, f64)> {
    let n = seq.len();
    let max_m = if n == 0 { 0 } else { n.ilog2() };
    if m == 0 || m > max_m {
        return Err(PufError::Param(format!(
            "serial pattern length {m} must be in [1, {max_m}] for n = {n}"
        )));
    }
    let m = m as i32;
    let (p0, p1, p2) = (
        psi_sq(seq.bits(), m),
        psi_sq(seq.bits(), m - 1),
        psi_sq(seq.bits(), m - 2),
    );
    let del1 = p0 - p1;
    let del2 = p0 - 2.0 * p1 + p2;
    let pv1 = igamc(2f64.powi(m - 2), del1 / 2.0);
    let pv2 = igamc(2f64.powi(m - 3), del2 / 2.0);
    Ok((pv1, pv2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BatteryConfig {
    pub block_len: usize,
    pub serial_m: u32,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            block_len: 32,
            serial_m: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub p_values: Vec<f64>,
    pub passed: Vec<bool>,
    pub pass_count: usize,
    pub total: usize,
    /// Counts of p-values in `[0, 0.1), [0.1, 0.2), ..., [0.9, 1.0]`.
    pub histogram: [usize; 10],
    /// Chi-square uniformity of the histogram, `Q(9/2, chi2/2)`.
    pub uniformity_p: f64,
}

impl TestReport {
    fn from_p_values(name: &str, p_values: Vec<f64>) -> Self {
        let passed: Vec<bool> = p_values.iter().map(|&p| p >= ALPHA).collect();
        let mut histogram = [0usize; 10];
        for &p in &p_values {
            histogram[((p * 10.0) as usize).min(9)] += 1;
        }
        let total = p_values.len();
        let expected = total as f64 / 10.0;
        let chi2: f64 = histogram
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let uniformity_p = if total == 0 {
            0.0
        } else {
            igamc(4.5, chi2 / 2.0)
        };
        Self {
            name: name.to_string(),
            pass_count: passed.iter().filter(|&&b| b).count(),
            p_values,
            passed,
            total,
            histogram,
            uniformity_p,
        }
    }

    pub fn proportion(&self) -> f64 {
        self.pass_count as f64 / self.total as f64
    }

    /// Passes the NIST proportion rule, see [`min_pass_count`].
    pub fn proportion_ok(&self) -> bool {
        self.pass_count >= min_pass_count(self.total)
    }
}

/// Minimum passing sequences out of `total` at alpha = 0.01:
/// `floor(total * (p - 3 sqrt(p (1 - p) / total)))` with `p = 0.99`
/// (193 for 200 sequences).
pub fn min_pass_count(total: usize) -> usize {
    let p = 1.0 - ALPHA;
    let s = total as f64;
    (s * (p - 3.0 * (p * (1.0 - p) / s).sqrt()))
        .floor()
        .max(0.0) as usize
}

/// Runs the five tests over every sequence. Reports come back in the order
/// Frequency, BlockFrequency, CumulativeSums (forward), CumulativeSums
/// (backward), Runs, Serial (p1), Serial (p2).
pub fn battery(sequences: &[BitSequence], cfg: BatteryConfig) -> Result<Vec<TestReport>> {
    let mut streams: [Vec<f64>; 7] = Default::default();
    for seq in sequences {
        let (s1, s2) = serial_test(seq, cfg.serial_m)?;
        let row = [
            frequency_test(seq),
            block_frequency_test(seq, cfg.block_len)?,
            cumulative_sums_test(seq, CusumMode::Forward),
            cumulative_sums_test(seq, CusumMode::Backward),
            runs_test(seq),
            s1,
            s2,
        ];
        for (stream, p) in streams.iter_mut().zip(row) {
            stream.push(p);
        }
    }
    const NAMES: [&str; 7] = [
        "Frequency",
        "BlockFrequency",
        "CumulativeSums",
        "CumulativeSums",
        "Runs",
        "Serial",
        "Serial",
    ];
    Ok(NAMES
        .iter()
        .zip(streams)
        .map(|(name, ps)| TestReport::from_p_values(name, ps))
        .collect())
}

/// CSV with the columns `C1..C10,P-VALUE,PROPORTION,STATISTICAL TEST`.
pub fn battery_csv(reports: &[TestReport]) -> String {
    let mut out =
        String::from("C1,C2,C3,C4,C5,C6,C7,C8,C9,C10,P-VALUE,PROPORTION,STATISTICAL TEST\n");
    for r in reports {
        for c in r.histogram {
            write!(out, "{c},").unwrap();
        }
        writeln!(
            out,
            "{:.6},{}/{},{}",
            r.uniformity_p, r.pass_count, r.total, r.name
        )
        .unwrap();
    }
    out
}
