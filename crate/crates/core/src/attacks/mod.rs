//! Attacks on the protocol transcripts and on the PUF itself.

mod eavesdrop;
mod modeling;

pub use eavesdrop::{eavesdrop_aligned, eavesdrop_linear, EavesdropResult};
pub use modeling::{
    evaluate_model, generate_pcps, generate_pcps_for_keys, modeling_experiment, read_pcps_csv,
    sample_keys, train_lr, write_pcps_csv, ChipOracle, Evaluation, LrHyper, LrModel, ModelingRow,
    ModelingSetup, Pcp, ResponsePredictor,
};
