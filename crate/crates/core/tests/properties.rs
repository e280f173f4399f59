use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pufshift::attacks::eavesdrop_linear;
use pufshift::block_modes::{cbc_decrypt, cbc_encrypt, CbcMessage};
use pufshift::stats::{pairwise_hamming, BatteryConfig, BitSequence};
use pufshift::{
    generate_chip, path_positions, run_session, Block, Direction, FoundryParams, Party,
    ResponseConfig, Role, ShiftKey, Variant,
};

fn block_of(width: usize, seed: u64) -> Block {
    Block::random(width, &mut ChaCha20Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reverse_inverts_forward(stages in 1usize..=8, seed: u64, s: usize, x_seed: u64, m in 1u32..=3) {
        let chip = generate_chip(seed, FoundryParams::with_stages(stages)).unwrap();
        let key = ShiftKey::from_amount(s, stages);
        let x = block_of(chip.width(), x_seed);
        let cfg = ResponseConfig::forward(m).unwrap();
        let y = chip.respond(&x, &key, cfg).unwrap();
        prop_assert_eq!(chip.respond(&y, &key, cfg.with_direction(Direction::Reverse)).unwrap(), x);
    }

    #[test]
    fn delays_do_not_depend_on_data(seed: u64, s in 0usize..256, x_seed: u64, flip in 0usize..256) {
        // Flipping one plaintext bit flips exactly its rotated output bit.
        let chip = generate_chip(seed, FoundryParams::default()).unwrap();
        let key = ShiftKey::from_amount(s, 8);
        let cfg = ResponseConfig::default();
        let x = block_of(256, x_seed);
        let mut x2 = x.clone();
        x2.set(flip, !x.bit(flip));
        let diff = chip.respond(&x, &key, cfg).unwrap().xor(&chip.respond(&x2, &key, cfg).unwrap()).unwrap();
        prop_assert_eq!(diff.count_ones(), 1);
        prop_assert!(diff.bit((flip + s) % 256));
    }

    #[test]
    fn positions_are_a_rotation(stages in 1usize..=8, input: usize, s1 in 0usize..1 << 20, s2 in 0usize..1 << 20) {
        let w = 1usize << stages;
        let input = input % w;
        let k1 = ShiftKey::from_amount(s1, stages);
        let k2 = ShiftKey::from_amount(s2, stages);
        let p1 = *path_positions(input, &k1, stages).last().unwrap();
        prop_assert_eq!(p1, (input + k1.amount()) % w);
        let p2 = *path_positions(p1, &k2, stages).last().unwrap();
        prop_assert_eq!(p2, (input + s1 + s2) % w);
    }

    #[test]
    fn regeneration_is_bit_identical(seed: u64, s in 0usize..256, x_seed: u64) {
        let a = generate_chip(seed, FoundryParams::default()).unwrap();
        let b = generate_chip(seed, FoundryParams::default()).unwrap();
        prop_assert_eq!(&a, &b);
        let key = ShiftKey::from_amount(s, 8);
        let x = block_of(256, x_seed);
        let cfg = ResponseConfig::default();
        prop_assert_eq!(a.respond(&x, &key, cfg).unwrap(), b.respond(&x, &key, cfg).unwrap());
    }

    #[test]
    fn path_delay_is_symmetric(seed: u64, s in 0usize..256, i in 0usize..256) {
        let chip = generate_chip(seed, FoundryParams::default()).unwrap();
        let key = ShiftKey::from_amount(s, 8);
        prop_assert_eq!(
            pufshift::path_delay(&chip, i, &key, Direction::Forward),
            pufshift::path_delay(&chip, i, &key, Direction::Reverse)
        );
    }

    #[test]
    fn cbc_round_trip(seed: u64, s in 0usize..64, len in 1usize..=64, x_seed: u64) {
        let chip = generate_chip(seed, FoundryParams::with_stages(6)).unwrap();
        let key = ShiftKey::from_amount(s, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(x_seed);
        let msg = CbcMessage {
            blocks: (0..len).map(|_| Block::random(64, &mut rng)).collect(),
            iv: Block::random(64, &mut rng),
        };
        let cfg = ResponseConfig::default();
        let c = cbc_encrypt(&chip, &key, cfg, &msg).unwrap();
        prop_assert_eq!(cbc_decrypt(&chip, &key, cfg, &c, &msg.iv).unwrap(), msg.blocks);
    }

    #[test]
    fn shared_key_always_round_trips(seed: u64, s in 0usize..256, x_seed: u64, m in 1u32..=3) {
        let p = FoundryParams::default();
        let key = ShiftKey::from_amount(s, 8);
        let bob = Party::new(Role::Bob, generate_chip(seed, p).unwrap(), key.clone()).unwrap();
        let alice = Party::new(Role::Alice, generate_chip(seed ^ 1, p).unwrap(), key).unwrap();
        let x = block_of(256, x_seed);
        let t = run_session(&bob, &alice, &x, Variant::SharedKey, ResponseConfig::forward(m).unwrap()).unwrap();
        prop_assert_eq!(t.final_block, x);
    }

    #[test]
    fn with_permutation_is_linear(seed: u64, sb in 0usize..256, sa in 0usize..256, x_seed: u64) {
        let p = FoundryParams::default();
        let bob = Party::new(Role::Bob, generate_chip(seed, p).unwrap(), ShiftKey::from_amount(sb, 8)).unwrap();
        let alice = Party::new(Role::Alice, generate_chip(seed ^ 1, p).unwrap(), ShiftKey::from_amount(sa, 8)).unwrap();
        let x = block_of(256, x_seed);
        let t = run_session(&bob, &alice, &x, Variant::WithPermutation, ResponseConfig::default()).unwrap();
        prop_assert_eq!(&t.final_block, &x);
        let xor = &(&t.m_prime ^ &t.m_double) ^ &t.m_triple;
        prop_assert_eq!(&xor, &x);
        prop_assert_eq!(eavesdrop_linear(&t, Variant::WithPermutation).success_rate, 1.0);
    }

    #[test]
    fn p_values_are_probabilities(seed: u64, bias in 0.05f64..0.95) {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let seqs: Vec<BitSequence> = (0..4)
            .map(|_| BitSequence::new((0..256).map(|_| rng.random_bool(bias)).collect()))
            .collect();
        for r in pufshift::stats::battery(&seqs, BatteryConfig::default()).unwrap() {
            prop_assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)), "{:?}", r);
            prop_assert_eq!(r.histogram.iter().sum::<usize>(), 4);
        }
    }
}

#[test]
fn hamming_matches_brute_force() {
    for trial in 0..10u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(trial);
        let k = 2 + trial as usize;
        let blocks: Vec<Block> = (0..k).map(|_| Block::random(64, &mut rng)).collect();
        let mut ds = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if i < j {
                    let d = blocks[i]
                        .bits()
                        .iter()
                        .zip(blocks[j].bits())
                        .filter(|(a, b)| a != b)
                        .count();
                    ds.push(d as f64);
                }
            }
        }
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        let sd = (ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / ds.len() as f64).sqrt();
        let got = pairwise_hamming(&blocks).unwrap();
        assert_eq!(got.pairs, k * (k - 1) / 2);
        assert_eq!(got.mean, mean);
        assert_eq!(got.sd, sd);
        assert_eq!(
            got.histogram.iter().map(|b| b.count).sum::<usize>(),
            got.pairs
        );
    }
}
