//! Logistic-regression modeling attack over plaintext-ciphertext pairs.
//!
//! One binary classifier per ciphertext bit, over the raw features
//! `key bits ++ plaintext bits ++ 1`, trained by full-batch gradient descent
//! from all-zero weights. All output bits are trained together as one matrix
//! product; each column of the weight matrix is an independent model.

use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{check_width, PufError, Result};
use crate::puf_model::{entangle, DelayMatrix, Direction, ResponseConfig, ShiftKey};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcp {
    pub plaintext: Block,
    pub key: ShiftKey,
    pub ciphertext: Block,
}

/// Draws `n_keys` distinct keys uniformly from the keyspace of `stages`.
pub fn sample_keys(stages: usize, n_keys: usize, seed: u64) -> Result<Vec<ShiftKey>> {
    let keyspace = 1usize << stages;
    if n_keys > keyspace {
        return Err(PufError::KeyspaceExceeded {
            requested: n_keys,
            keyspace,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, keyspace, n_keys)
        .into_iter()
        .map(|s| ShiftKey::from_amount(s, stages))
        .collect())
}

pub fn generate_pcps(
    chip: &DelayMatrix,
    n_keys: usize,
    n_plaintexts_per_key: usize,
    cfg: ResponseConfig,
    seed: u64,
) -> Result<Vec<Pcp>> {
    let keys = sample_keys(chip.stages(), n_keys, seed)?;
    generate_pcps_for_keys(chip, &keys, n_plaintexts_per_key, cfg, seed)
}

/// PCPs for explicit keys, grouped by key. Ciphertexts come straight from
/// the delay matrix: the entanglement bits of each key are computed once.
pub fn generate_pcps_for_keys(
    chip: &DelayMatrix,
    keys: &[ShiftKey],
    n_plaintexts_per_key: usize,
    cfg: ResponseConfig,
    seed: u64,
) -> Result<Vec<Pcp>> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = Vec::with_capacity(keys.len() * n_plaintexts_per_key);
    for key in keys {
        check_width(chip.stages(), key.stages())?;
        let bits = chip.delay_bits(key, cfg.delay_bit);
        let s = key.amount();
        for _ in 0..n_plaintexts_per_key {
            let plaintext = Block::random(chip.width(), &mut rng);
            let ciphertext = entangle(&plaintext, &bits, s, Direction::Forward);
            out.push(Pcp {
                plaintext,
                key: key.clone(),
                ciphertext,
            });
        }
    }
    Ok(out)
}

pub fn write_pcps_csv<W: Write>(writer: W, pcps: &[Pcp]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["plaintext", "key", "ciphertext"])?;
    for p in pcps {
        let key = Block::from_bits(p.key.bits().to_vec());
        w.write_record([p.plaintext.to_hex(), key.to_hex(), p.ciphertext.to_hex()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pcps_csv<R: Read>(reader: R, width: usize, stages: usize) -> Result<Vec<Pcp>> {
    let mut r = csv::Reader::from_reader(reader);
    r.records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| {
                rec.get(i)
                    .ok_or_else(|| PufError::Format("short PCP record".into()))
            };
            Ok(Pcp {
                plaintext: Block::from_hex(field(0)?, width)?,
                key: ShiftKey::from_bits(Block::from_hex(field(1)?, stages)?.bits().to_vec()),
                ciphertext: Block::from_hex(field(2)?, width)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrHyper {
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LrHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
        }
    }
}

/// Anything that guesses a ciphertext from a plaintext and key.
pub trait ResponsePredictor {
    fn predict(&self, plaintext: &Block, key: &ShiftKey) -> Block;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub width: usize,
    pub key_bits: usize,
    /// `weights[j]` models output bit `j`; layout `key ++ plaintext ++ bias`.
    pub weights: Vec<Vec<f64>>,
    pub delay_bit: u32,
    pub learning_rate: f64,
    pub iterations: usize,
    pub training_size: usize,
}

impl LrModel {
    pub fn feature_count(&self) -> usize {
        self.key_bits + self.width
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        let expected = model.feature_count() + 1;
        if model.weights.len() != model.width || model.weights.iter().any(|w| w.len() != expected) {
            return Err(PufError::Format(
                "weight array shape does not match width/key_bits".into(),
            ));
        }
        Ok(model)
    }
}

impl ResponsePredictor for LrModel {
    fn predict(&self, plaintext: &Block, key: &ShiftKey) -> Block {
        let features: Vec<bool> = key.bits().iter().chain(plaintext.bits()).copied().collect();
        let bits = self
            .weights
            .iter()
            .map(|w| {
                let bias = w[features.len()];
                let z: f64 = features
                    .iter()
                    .zip(w)
                    .filter(|(&f, _)| f)
                    .map(|(_, wi)| wi)
                    .sum::<f64>()
                    + bias;
                z > 0.0
            })
            .collect();
        Block::from_bits(bits)
    }
}

/// Ground truth: the chip itself.
#[derive(Debug, Clone)]
pub struct ChipOracle<'a> {
    pub chip: &'a DelayMatrix,
    pub cfg: ResponseConfig,
}

impl ResponsePredictor for ChipOracle<'_> {
    fn predict(&self, plaintext: &Block, key: &ShiftKey) -> Block {
        self.chip
            .respond(plaintext, key, self.cfg)
            .expect("oracle queried with chip-shaped inputs")
    }
}

fn design_matrix(
    pcps: &[Pcp],
    key_bits: usize,
    width: usize,
) -> Result<(Array2<f32>, Array2<f32>)> {
    let n = pcps.len();
    let f = key_bits + width + 1;
    let mut x = Array2::<f32>::zeros((n, f));
    let mut y = Array2::<f32>::zeros((n, width));
    for (r, p) in pcps.iter().enumerate() {
        check_width(key_bits, p.key.stages())?;
        check_width(width, p.plaintext.width())?;
        check_width(width, p.ciphertext.width())?;
        for (c, &b) in p.key.bits().iter().chain(p.plaintext.bits()).enumerate() {
            if b {
                x[[r, c]] = 1.0;
            }
        }
        x[[r, f - 1]] = 1.0;
        for (c, &b) in p.ciphertext.bits().iter().enumerate() {
            if b {
                y[[r, c]] = 1.0;
            }
        }
    }
    Ok((x, y))
}

fn sigmoid(z: f32) -> f32 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `delay_bit` is recorded in the model; the PCPs already carry its effect.
pub fn train_lr(training: &[Pcp], delay_bit: u32, hyper: LrHyper) -> Result<LrModel> {
    let first = training.first().ok_or(PufError::Empty("training set"))?;
    let width = first.plaintext.width();
    let key_bits = first.key.stages();
    let (x, y) = design_matrix(training, key_bits, width)?;
    let xt = x.t().to_owned();
    let step = (hyper.learning_rate / training.len() as f64) as f32;
    let mut w = Array2::<f32>::zeros((x.ncols(), width));
    for _ in 0..hyper.iterations {
        let mut residual = x.dot(&w);
        residual.zip_mut_with(&y, |z, &t| *z = sigmoid(*z) - t);
        let grad = xt.dot(&residual);
        w.scaled_add(-step, &grad);
    }
    let weights = w
        .axis_iter(Axis(1))
        .map(|col| col.iter().map(|&v| v as f64).collect())
        .collect();
    Ok(LrModel {
        width,
        key_bits,
        weights,
        delay_bit,
        learning_rate: hyper.learning_rate,
        iterations: hyper.iterations,
        training_size: training.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_bit: Vec<f64>,
    pub mean: f64,
    /// Fraction of holdout ciphertexts predicted exactly.
    pub exact_match: f64,
}

pub fn evaluate_model<P: ResponsePredictor + ?Sized>(
    model: &P,
    holdout: &[Pcp],
) -> Result<Evaluation> {
    let first = holdout.first().ok_or(PufError::Empty("holdout set"))?;
    let width = first.ciphertext.width();
    let mut correct = vec![0usize; width];
    let mut exact = 0usize;
    for p in holdout {
        let guess = model.predict(&p.plaintext, &p.key);
        check_width(width, guess.width())?;
        check_width(width, p.ciphertext.width())?;
        let mut all = true;
        for (c, (g, t)) in correct
            .iter_mut()
            .zip(guess.bits().iter().zip(p.ciphertext.bits()))
        {
            if g == t {
                *c += 1;
            } else {
                all = false;
            }
        }
        exact += usize::from(all);
    }
    let n = holdout.len() as f64;
    let per_bit: Vec<f64> = correct.iter().map(|&c| c as f64 / n).collect();
    let mean = per_bit.iter().sum::<f64>() / width as f64;
    Ok(Evaluation {
        per_bit,
        mean,
        exact_match: exact as f64 / n,
    })
}

/// Modeling-attack experiment on a reduced chip: the top-left
/// `2^stages x stages` corner of a full chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelingSetup {
    pub stages: usize,
    /// Keys used for training; the rest of the keyspace forms the
    /// key-disjoint holdout.
    pub n_keys: usize,
    pub training_sizes: Vec<usize>,
    /// Size of each holdout set (key-shared and key-disjoint).
    pub holdout_size: usize,
    pub hyper: LrHyper,
    pub seed: u64,
}

impl Default for ModelingSetup {
    fn default() -> Self {
        Self {
            stages: 6,
            n_keys: 50,
            training_sizes: vec![800, 8_000, 80_000],
            holdout_size: 2_000,
            hyper: LrHyper::default(),
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelingRow {
    pub delay_bit: u32,
    pub training_size: usize,
    pub key_shared: Evaluation,
    pub key_disjoint: Option<Evaluation>,
}

pub fn modeling_experiment(
    chip: &DelayMatrix,
    setup: &ModelingSetup,
    delay_bit: u32,
) -> Result<Vec<ModelingRow>> {
    let sub = chip.sub_matrix(setup.stages)?;
    let cfg = ResponseConfig::forward(delay_bit)?;
    let keyspace = 1usize << setup.stages;
    let all_keys = sample_keys(setup.stages, keyspace, setup.seed)?;
    if setup.n_keys == 0 || setup.n_keys > keyspace {
        return Err(PufError::KeyspaceExceeded {
            requested: setup.n_keys,
            keyspace,
        });
    }
    let (train_keys, other_keys) = all_keys.split_at(setup.n_keys);

    let shared_holdout = generate_pcps_for_keys(
        &sub,
        train_keys,
        setup.holdout_size.div_ceil(setup.n_keys),
        cfg,
        setup.seed ^ 0x401d,
    )?;
    let disjoint_holdout = if other_keys.is_empty() {
        None
    } else {
        let per_key = setup.holdout_size.div_ceil(other_keys.len());
        Some(generate_pcps_for_keys(
            &sub,
            other_keys,
            per_key,
            cfg,
            setup.seed ^ 0xd15,
        )?)
    };

    setup
        .training_sizes
        .iter()
        .map(|&size| {
            if size % setup.n_keys != 0 {
                return Err(PufError::Param(format!(
                    "training size {size} is not a multiple of {} keys",
                    setup.n_keys
                )));
            }
            let train = generate_pcps_for_keys(
                &sub,
                train_keys,
                size / setup.n_keys,
                cfg,
                setup.seed.wrapping_add(size as u64),
            )?;
            let model = train_lr(&train, delay_bit, setup.hyper)?;
            Ok(ModelingRow {
                delay_bit,
                training_size: size,
                key_shared: evaluate_model(&model, &shared_holdout)?,
                key_disjoint: disjoint_holdout
                    .as_deref()
                    .map(|h| evaluate_model(&model, h))
                    .transpose()?,
            })
        })
        .collect()
}
