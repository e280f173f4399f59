use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use pufshift::attacks::{eavesdrop_linear, evaluate_model, generate_pcps, ResponsePredictor};
use pufshift::environment::TEMPERATURE_SWEEP;
use pufshift::protocol::Phase;
use pufshift::stats::{battery, flip_rate_sweep, min_pass_count, BatteryConfig, BitSequence};
use pufshift::{
    generate_chip, path_positions, run_session, Block, EnvCondition, FoundryParams, NoiseParams,
    Party, ResponseConfig, Role, ShiftKey, Variant,
};

#[test]
fn generated_gate_delays() {
    let chip = generate_chip(42, FoundryParams::default()).unwrap();
    assert_eq!(chip.entries().len(), 256 * 8);
    let all: Vec<f64> = chip
        .entries()
        .iter()
        .flat_map(|g| [g.top, g.bottom])
        .collect();
    assert_eq!(all.len(), 4096);
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!((mean - 15.0).abs() <= 0.5, "{mean}");

    let a = generate_chip(1, FoundryParams::default()).unwrap();
    let b = generate_chip(2, FoundryParams::default()).unwrap();
    let same = a
        .entries()
        .iter()
        .zip(b.entries())
        .filter(|(x, y)| x == y)
        .count();
    assert!(same as f64 <= 0.01 * a.entries().len() as f64);
}

#[test]
fn wrap_around_positions() {
    let one = ShiftKey::from_amount(1, 8);
    assert_eq!(*path_positions(3, &one, 8).last().unwrap(), 4);
    assert_eq!(*path_positions(255, &one, 8).last().unwrap(), 0);
}

fn silent_chip(stages: usize) -> pufshift::DelayMatrix {
    // 16 ns gates on 4 stages: 64 ns, counter 16 = 0b10000, so bits 1..=3 are 0.
    let p = FoundryParams {
        sd_unit_delay: 0.0,
        mean_unit_delay: 16.0,
        ..FoundryParams::with_stages(stages)
    };
    generate_chip(0, p).unwrap()
}

#[test]
fn silent_chip_rounds_are_pure_permutations() {
    let key = ShiftKey::from_amount(5, 4);
    let party = Party::new(Role::Bob, silent_chip(4), key).unwrap();
    let x = Block::random(16, &mut ChaCha20Rng::seed_from_u64(1));
    let cfg = ResponseConfig::default();
    assert_eq!(
        party
            .apply_round(&x, Phase::Encrypt, Variant::SharedKey, cfg)
            .unwrap(),
        x.rotate(5)
    );
    assert_eq!(
        party
            .apply_round(&x, Phase::Encrypt, Variant::WithPermutation, cfg)
            .unwrap(),
        x
    );
}

#[test]
fn silent_chips_leak_everything() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for variant in [Variant::WithPermutation, Variant::SharedKey] {
        let kb = ShiftKey::from_amount(3, 4);
        let ka = if variant == Variant::SharedKey {
            kb.clone()
        } else {
            ShiftKey::from_amount(9, 4)
        };
        let bob = Party::new(Role::Bob, silent_chip(4), kb).unwrap();
        let alice = Party::new(Role::Alice, silent_chip(4), ka).unwrap();
        let x = Block::random(16, &mut rng);
        let t = run_session(&bob, &alice, &x, variant, ResponseConfig::default()).unwrap();
        assert_eq!(eavesdrop_linear(&t, variant).success_rate, 1.0, "{variant}");
    }
}

#[test]
fn silent_no_permutation_wire_is_rotated_plaintext() {
    let bob = Party::new(Role::Bob, silent_chip(4), ShiftKey::from_amount(3, 4)).unwrap();
    let alice = Party::new(Role::Alice, silent_chip(4), ShiftKey::from_amount(9, 4)).unwrap();
    let x = Block::random(16, &mut ChaCha20Rng::seed_from_u64(3));
    let t = run_session(
        &bob,
        &alice,
        &x,
        Variant::NoPermutation,
        ResponseConfig::default(),
    )
    .unwrap();
    assert_eq!(t.m_prime, x.rotate(3));
    assert_eq!(t.m_double, x.rotate(12));
    assert_eq!(t.m_triple, x.rotate(9));
    assert!(t.succeeded());
}

#[test]
fn pcp_volume_and_reproducibility() {
    let chip = generate_chip(5, FoundryParams::default()).unwrap();
    let cfg = ResponseConfig::default();
    assert_eq!(
        generate_pcps(&chip, 100, 1000, cfg, 1).unwrap().len(),
        100_000
    );
    let a = generate_pcps(&chip, 1, 1, cfg, 77).unwrap();
    assert_eq!(a, generate_pcps(&chip, 1, 1, cfg, 77).unwrap());
    assert_eq!(
        a[0].ciphertext,
        chip.respond(&a[0].plaintext, &a[0].key, cfg).unwrap()
    );
}

struct Coin(RefCell<ChaCha20Rng>);

impl ResponsePredictor for Coin {
    fn predict(&self, plaintext: &Block, _key: &ShiftKey) -> Block {
        Block::random(plaintext.width(), &mut *self.0.borrow_mut())
    }
}

#[test]
fn coin_flip_model_scores_half() {
    let chip = generate_chip(6, FoundryParams::default())
        .unwrap()
        .sub_matrix(6)
        .unwrap();
    let holdout = generate_pcps(&chip, 20, 10, ResponseConfig::default(), 3).unwrap();
    assert!(holdout.len() * 64 >= 10_000);
    let eval =
        evaluate_model(&Coin(RefCell::new(ChaCha20Rng::seed_from_u64(4))), &holdout).unwrap();
    assert!((eval.mean - 0.5).abs() <= 0.02, "{}", eval.mean);
}

#[test]
fn seeded_rng_passes_battery() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xb17);
    let seqs: Vec<BitSequence> = (0..200)
        .map(|_| BitSequence::new((0..256).map(|_| rng.random::<bool>()).collect()))
        .collect();
    let reports = battery(&seqs, BatteryConfig::default()).unwrap();
    assert_eq!(reports.len(), 7);
    assert_eq!(min_pass_count(200), 193);
    for r in reports {
        assert!(r.pass_count >= 193, "{} {}", r.name, r.pass_count);
        assert!(r.uniformity_p >= 1e-4, "{} {}", r.name, r.uniformity_p);
    }
}

#[test]
fn flips_grow_away_from_room_temperature() {
    let chips: Vec<_> = (0..50)
        .map(|s| generate_chip(s, FoundryParams::default()).unwrap())
        .collect();
    let mut envs = vec![EnvCondition::at_temperature(25.0)];
    envs.extend(
        TEMPERATURE_SWEEP
            .iter()
            .filter(|&&t| t != 25.0)
            .map(|&t| EnvCondition::at_temperature(t)),
    );
    let key = ShiftKey::from_amount(0, 8);
    let rows = flip_rate_sweep(&chips, &envs, &key, &[1, 2], NoiseParams::default(), 12).unwrap();
    for m in [1, 2] {
        let mut by_distance: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.delay_bit == m)
            .map(|r| ((r.temperature - 25.0).abs(), r.rate))
            .collect();
        assert_eq!(by_distance[0], (0.0, 0.0));
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in by_distance.windows(2) {
            if w[0].0 < w[1].0 {
                assert!(w[0].1 <= w[1].1, "m={m} {w:?}");
            }
        }
    }
    for (a, b) in rows
        .iter()
        .filter(|r| r.delay_bit == 1)
        .zip(rows.iter().filter(|r| r.delay_bit == 2))
    {
        assert!(a.rate >= b.rate);
    }
}
