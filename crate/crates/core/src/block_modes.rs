//! Cipher block chaining over a single party's BS-PUF.
//!
//! `c_0 = iv`, `c_i = PUF(p_i ^ c_{i-1})`, `p_i = PUF^-1(c_i) ^ c_{i-1}`.
//! Messages must already be a whole number of blocks.

use std::collections::HashSet;

use rand::rngs::OsRng;
use rand::{SeedableRng, TryRngCore};
use rand_chacha::ChaCha20Rng;

use crate::block::Block;
use crate::error::{check_width, PufError, Result};
use crate::puf_model::{DelayMatrix, Direction, ResponseConfig, ShiftKey};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbcMessage {
    pub blocks: Vec<Block>,
    pub iv: Block,
}

pub fn cbc_encrypt(
    chip: &DelayMatrix,
    key: &ShiftKey,
    cfg: ResponseConfig,
    msg: &CbcMessage,
) -> Result<Vec<Block>> {
    if msg.blocks.is_empty() {
        return Err(PufError::Empty("CBC message has no blocks"));
    }
    check_width(chip.width(), msg.iv.width())?;
    let forward = cfg.with_direction(Direction::Forward);
    let mut prev = msg.iv.clone();
    let mut out = Vec::with_capacity(msg.blocks.len());
    for p in &msg.blocks {
        let c = chip.respond(&p.xor(&prev)?, key, forward)?;
        out.push(c.clone());
        prev = c;
    }
    Ok(out)
}

pub fn cbc_decrypt(
    chip: &DelayMatrix,
    key: &ShiftKey,
    cfg: ResponseConfig,
    ciphertext: &[Block],
    iv: &Block,
) -> Result<Vec<Block>> {
    if ciphertext.is_empty() {
        return Err(PufError::Empty("CBC ciphertext has no blocks"));
    }
    check_width(chip.width(), iv.width())?;
    let reverse = cfg.with_direction(Direction::Reverse);
    let mut prev = iv;
    let mut out = Vec::with_capacity(ciphertext.len());
    for c in ciphertext {
        out.push(chip.respond(c, key, reverse)?.xor(prev)?);
        prev = c;
    }
    Ok(out)
}

/// Per-session IV generator. Draw `n` comes from ChaCha20 stream `n` of the
/// session seed; the session also remembers every IV it handed out and
/// redraws on the (astronomically unlikely) repeat.
#[derive(Debug)]
pub struct IvSource {
    seed: [u8; 32],
    counter: u64,
    issued: HashSet<Block>,
}

impl IvSource {
    pub fn from_seed(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        Self {
            seed: bytes,
            counter: 0,
            issued: HashSet::new(),
        }
    }

    pub fn from_entropy() -> Result<Self> {
        let mut seed = [0u8; 32];
        OsRng
            .try_fill_bytes(&mut seed)
            .map_err(|e| PufError::Param(format!("system entropy unavailable: {e}")))?;
        Ok(Self {
            seed,
            counter: 0,
            issued: HashSet::new(),
        })
    }

    pub fn generate_iv(&mut self, width: usize) -> Block {
        loop {
            let mut rng = ChaCha20Rng::from_seed(self.seed);
            rng.set_stream(self.counter);
            self.counter += 1;
            let iv = Block::random(width, &mut rng);
            if self.issued.insert(iv.clone()) {
                return iv;
            }
        }
    }

    pub fn issued(&self) -> usize {
        self.issued.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puf_model::{generate_chip, FoundryParams};

    fn setup() -> (DelayMatrix, ShiftKey, ResponseConfig) {
        (
            generate_chip(21, FoundryParams::default()).unwrap(),
            ShiftKey::from_amount(91, 8),
            ResponseConfig::default(),
        )
    }

    #[test]
    fn zero_iv_single_block_is_plain_puf() {
        let (chip, key, cfg) = setup();
        let p = Block::random(256, &mut ChaCha20Rng::seed_from_u64(2));
        let msg = CbcMessage {
            blocks: vec![p.clone()],
            iv: Block::zeros(256),
        };
        let c = cbc_encrypt(&chip, &key, cfg, &msg).unwrap();
        assert_eq!(c, vec![chip.respond(&p, &key, cfg).unwrap()]);
    }

    #[test]
    fn identical_blocks_encrypt_differently() {
        let (chip, key, cfg) = setup();
        let mut ivs = IvSource::from_seed(4);
        let p = Block::random(256, &mut ChaCha20Rng::seed_from_u64(3));
        let msg = CbcMessage {
            blocks: vec![p.clone(), p],
            iv: ivs.generate_iv(256),
        };
        let c = cbc_encrypt(&chip, &key, cfg, &msg).unwrap();
        assert_ne!(c[0], c[1]);
        assert_eq!(
            cbc_decrypt(&chip, &key, cfg, &c, &msg.iv).unwrap(),
            msg.blocks
        );
    }

    #[test]
    fn single_bit_error_propagation() {
        let (chip, key, cfg) = setup();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let blocks: Vec<Block> = (0..4).map(|_| Block::random(256, &mut rng)).collect();
        let msg = CbcMessage {
            blocks: blocks.clone(),
            iv: Block::random(256, &mut rng),
        };
        let mut c = cbc_encrypt(&chip, &key, cfg, &msg).unwrap();
        let flipped = !c[1].bit(17);
        c[1].set(17, flipped);
        let p = cbc_decrypt(&chip, &key, cfg, &c, &msg.iv).unwrap();
        assert_eq!(p[0], blocks[0]);
        assert_eq!(p[1].hamming_distance(&blocks[1]).unwrap(), 1);
        let diff = p[2].xor(&blocks[2]).unwrap();
        assert_eq!(diff.count_ones(), 1);
        assert!(diff.bit(17));
        assert_eq!(p[3], blocks[3]);
    }

    #[test]
    fn empty_inputs_rejected() {
        let (chip, key, cfg) = setup();
        assert!(matches!(
            cbc_decrypt(&chip, &key, cfg, &[], &Block::zeros(256)),
            Err(PufError::Empty(_))
        ));
        let msg = CbcMessage {
            blocks: vec![],
            iv: Block::zeros(256),
        };
        assert!(cbc_encrypt(&chip, &key, cfg, &msg).is_err());
    }

    #[test]
    fn iv_draws_are_fresh_and_reproducible() {
        let mut a = IvSource::from_seed(77);
        let mut b = IvSource::from_seed(77);
        let first = a.generate_iv(256);
        assert_eq!(first, b.generate_iv(256));
        assert_ne!(first, a.generate_iv(256));
        let mut e = IvSource::from_entropy().unwrap();
        assert_ne!(e.generate_iv(256), e.generate_iv(256));
    }

    #[test]
    fn ten_thousand_ivs_unique() {
        let mut src = IvSource::from_seed(1);
        let ivs: HashSet<Block> = (0..10_000).map(|_| src.generate_iv(256)).collect();
        assert_eq!(ivs.len(), 10_000);
        assert_eq!(src.issued(), 10_000);
    }
}
