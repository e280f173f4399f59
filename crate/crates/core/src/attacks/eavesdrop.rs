use serde::Serialize;

use crate::block::Block;
use crate::protocol::{Transcript, Variant};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EavesdropResult {
    pub recovered: Block,
    /// Fraction of recovered bits equal to the true plaintext.
    pub success_rate: f64,
}

/// Passive linear attack: `D = M'' ^ M'''` estimates the sender's delay bits
/// and `x = M' ^ D`.
///
/// All three messages are combined position by position. For
/// `WithPermutation` (and `NoPermutation`) every wire message is in plaintext
/// bit order, so this is the natural alignment. In `SharedKey` the first and
/// third messages travel rotated by the secret amount, which the eavesdropper
/// does not know.
pub fn eavesdrop_linear(transcript: &Transcript, _variant: Variant) -> EavesdropResult {
    eavesdrop_aligned(transcript, 0)
}

/// Linear attack with `M'` and `M'''` read at offset `offset`:
/// `x_j = M'[j + o] ^ M''[j] ^ M'''[j + o]`.
pub fn eavesdrop_aligned(transcript: &Transcript, offset: usize) -> EavesdropResult {
    let w = transcript.width();
    let bits = (0..w)
        .map(|j| {
            let k = (j + offset) % w;
            transcript.m_prime.bit(k) ^ transcript.m_double.bit(j) ^ transcript.m_triple.bit(k)
        })
        .collect();
    let recovered = Block::from_bits(bits);
    let wrong = recovered
        .hamming_distance(&transcript.plaintext)
        .expect("transcript widths agree");
    let success_rate = if w == 0 {
        1.0
    } else {
        1.0 - wrong as f64 / w as f64
    };
    EavesdropResult {
        recovered,
        success_rate,
    }
}
