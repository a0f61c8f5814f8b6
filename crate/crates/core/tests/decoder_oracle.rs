mod common;

use common::{check_session, DenseOracle, RefField, Session};
use mpcode::policy::Interval;
use mpcode::{Decoder, Encoder, Field, FieldConfig, Packet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn streaming_decoder_matches_dense_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..300 {
        let field = if trial % 2 == 0 {
            FieldConfig::GF2
        } else {
            FieldConfig::GF256
        };
        let s = Session::random(&mut rng, field, 64);
        if let Err(msg) = check_session(&s) {
            panic!("trial {trial} ({s:?}): {msg}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intermediate_field_orders(seed in any::<u64>(), m in 2u32..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Session::random(&mut rng, FieldConfig::for_order(1 << m).unwrap(), 40);
        prop_assert_eq!(check_session(&s), Ok(()));
    }

    #[test]
    fn delivery_is_order_independent_of_arrival(seed in any::<u64>(), m in 1u32..24) {
        // any permutation of the same packets yields the same final delivery
        let field = Field::gf256();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut enc = Encoder::new(field.clone(), vec![Interval::every(3)], m);
        let mut pkts = Vec::new();
        while !enc.stream_exhausted() || pkts.len() < (2 * m) as usize {
            match enc.next_packet(0, &mut rng, |k| vec![k as u8; 4]).unwrap() {
                Some(p) => pkts.push(p),
                None => break,
            }
        }
        let mut dec = Decoder::new(field);
        let mut got = Vec::new();
        for i in (0..pkts.len()).rev() {
            got.extend(dec.receive(&pkts[i]).unwrap());
        }
        prop_assert_eq!(got.len(), m as usize);
        for (i, p) in got.iter().enumerate() {
            prop_assert_eq!(p.index, i as u32 + 1);
            prop_assert_eq!(&p.payload, &vec![p.index as u8; 4]);
        }
    }
}

/// Over a window holding an unseen packet a fresh combination raises the rank
/// unless its coefficient vector falls in the known span.
#[test]
fn coded_packets_are_almost_always_innovative() {
    let field = Field::gf256();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 10_000;
    let (mut attempts, mut innovative) = (0, 0);
    while attempts < trials {
        let w = rng.random_range(2..=12u32);
        let mut enc = Encoder::new(field.clone(), vec![Interval::Never], w);
        let mut dec = Decoder::new(field.clone());
        let mut oracle = DenseOracle::new(RefField::new(FieldConfig::GF256), w as usize);
        let mut dropped = false;
        for _ in 0..w {
            let p = enc
                .next_packet(0, &mut rng, |k| vec![k as u8])
                .unwrap()
                .unwrap();
            if rng.random_bool(0.5) {
                dropped = true;
                continue;
            }
            let (row, payload) = oracle.dense(&p);
            oracle.insert(row, payload);
            dec.receive(&p).unwrap();
        }
        if !dropped {
            continue;
        }
        // an earlier coded packet to make the span non-trivial
        if rng.random_bool(0.5) {
            let c = Packet::Coded(enc.coded_packet(&mut rng).unwrap());
            let (row, payload) = oracle.dense(&c);
            oracle.insert(row, payload);
            dec.receive(&c).unwrap();
        }
        if dec.rank() == w as u64 {
            continue;
        }
        attempts += 1;
        let before = dec.rank();
        dec.receive(&Packet::Coded(enc.coded_packet(&mut rng).unwrap()))
            .unwrap();
        if dec.rank() > before {
            innovative += 1;
        }
    }
    let freq = innovative as f64 / trials as f64;
    assert!(freq >= 1.0 - 2.0 / 256.0, "innovative fraction {freq}");
}
