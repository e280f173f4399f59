//! Statistical evaluation: the NIST SP 800-22 subset, inter-chip Hamming
//! distance and environmental bit-flip rates.

mod flip;
mod hamming;
pub mod nist;

pub use flip::{flip_rate, flip_rate_sweep, FlipRow};
pub use hamming::{pairwise_hamming, HdBin, HdSummary};
pub use nist::{
    battery, battery_csv, block_frequency_test, cumulative_sums_p_value, cumulative_sums_test,
    frequency_test, min_pass_count, runs_test, serial_test, BatteryConfig, BitSequence, CusumMode,
    TestReport,
};

use crate::block::Block;
use crate::puf_model::{DelayMatrix, ShiftKey};

/// The chip's response to the all-zero plaintext: one entanglement bit per
/// path, placed at the path's output position.
pub fn delay_response(chip: &DelayMatrix, key: &ShiftKey, delay_bit: u32) -> Block {
    let s = key.amount();
    Block::from_bits(chip.delay_bits(key, delay_bit)).rotate(s)
}
