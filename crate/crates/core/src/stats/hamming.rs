use serde::Serialize;

use crate::block::Block;
use crate::error::{check_width, PufError, Result};

/// Histogram bin `[lo, hi)` of pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HdBin {
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HdSummary {
    pub pairs: usize,
    pub mean: f64,
    /// Population standard deviation over all pairs.
    pub sd: f64,
    /// Width-10 bins from the first to the last non-empty one.
    pub histogram: Vec<HdBin>,
}

pub const HD_BIN_WIDTH: usize = 10;

/// Hamming distance over all `k (k - 1) / 2` unordered pairs.
pub fn pairwise_hamming(responses: &[Block]) -> Result<HdSummary> {
    if responses.len() < 2 {
        return Err(PufError::Param(format!(
            "need at least 2 responses, got {}",
            responses.len()
        )));
    }
    let width = responses[0].width();
    for r in responses {
        check_width(width, r.width())?;
    }
    let mut distances = Vec::with_capacity(responses.len() * (responses.len() - 1) / 2);
    for (i, a) in responses.iter().enumerate() {
        for b in &responses[i + 1..] {
            distances.push(a.hamming_distance(b)?);
        }
    }
    let pairs = distances.len();
    let mean = distances.iter().sum::<usize>() as f64 / pairs as f64;
    let var = distances
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / pairs as f64;

    let mut counts = vec![0usize; width / HD_BIN_WIDTH + 1];
    for &d in &distances {
        counts[d / HD_BIN_WIDTH] += 1;
    }
    let first = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let last = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    let histogram = (first..=last)
        .map(|b| HdBin {
            lo: b * HD_BIN_WIDTH,
            hi: (b + 1) * HD_BIN_WIDTH,
            count: counts[b],
            percent: 100.0 * counts[b] as f64 / pairs as f64,
        })
        .collect();
    Ok(HdSummary {
        pairs,
        mean,
        sd: var.sqrt(),
        histogram,
    })
}
