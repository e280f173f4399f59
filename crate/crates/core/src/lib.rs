//! Simulator for barrel-shifter physical unclonable functions (BS-PUFs) and
//! the commutative-PUF encryption protocols built on them.
//!
//! * [`puf_model`]: chips as delay matrices, keyed rotations, quantized and
//!   entangled responses.
//! * [`environment`]: temperature / supply perturbation of a chip.
//! * [`protocol`]: the 7-step two-party exchange in three variants.
//! * [`block_modes`]: CBC chaining over one party's PUF.
//! * [`attacks`]: passive linear eavesdropper and logistic-regression
//!   modeling attack.
//! * [`stats`]: NIST subset, Hamming-distance uniqueness, flip rates.

pub mod attacks;
pub mod block;
pub mod block_modes;
pub mod environment;
pub mod error;
pub mod protocol;
pub mod puf_model;
pub mod stats;

pub use block::Block;
pub use environment::{perturb_chip, EnvCondition, NoiseParams};
pub use error::{PufError, Result};
pub use protocol::{run_session, Party, Phase, Role, Transcript, Variant};
pub use puf_model::{
    delay_bit, generate_chip, path_delay, path_positions, quantize_delay, respond, rotation_amount,
    DelayMatrix, Direction, FoundryParams, ResponseConfig, ShiftKey,
};
