//! Checks the fast correlation engine against the naive per-pair definition
//! and exercises the attack end to end on synthetic sets.

use emsca::cema::{
    attack_key, correlation_surface, pearson, rank_candidates, success_rate, AttackOptions,
    KeyPattern,
};
use emsca::cipher::{Block64, Key80};
use emsca::leakage::{hypothesis_matrix, predict_intermediate, ByteIndex};
use emsca::synth::{synthesize_idle_set, synthesize_set, SynthConfig};
use emsca::trace::{Trace, TraceSet};
use emsca::Error;

fn xorshift(state: &mut u64) -> u64 {
    let mut x = *state;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    *state = x;
    x
}

/// Uniform-ish float in [0, 1).
fn unit_float(state: &mut u64) -> f64 {
    (xorshift(state) >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn pearson_matches_hand_example() {
    // means 2 and 5; centered products sum to -1; both variances sum to 2
    let x = [1.0, 2.0, 3.0];
    let y = [6.0, 4.0, 5.0];
    assert!((pearson(&x, &y).unwrap() - -0.5).abs() < 1e-15);
    assert!((pearson(&y, &x).unwrap() - -0.5).abs() < 1e-15);
    assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn pearson_rejects_degenerate_inputs() {
    assert!(matches!(
        pearson(&[1.0, 2.0], &[1.0]),
        Err(Error::Input(_))
    ));
    assert!(matches!(pearson(&[1.0], &[2.0]), Err(Error::Input(_))));
    assert!(matches!(
        pearson(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
        Err(Error::UndefinedCorrelation(_))
    ));
    assert!(matches!(
        pearson(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]),
        Err(Error::UndefinedCorrelation(_))
    ));
}

#[test]
fn pearson_is_invariant_under_positive_affine_maps() {
    let mut state = 0x5EED_u64;
    let x: Vec<f64> = (0..40).map(|_| unit_float(&mut state)).collect();
    let y: Vec<f64> = (0..40).map(|_| unit_float(&mut state)).collect();
    let base = pearson(&x, &y).unwrap();
    let x2: Vec<f64> = x.iter().map(|v| 3.5 * v + 11.0).collect();
    let y2: Vec<f64> = y.iter().map(|v| 0.25 * v - 2.0).collect();
    assert!((pearson(&x2, &y2).unwrap() - base).abs() < 1e-12);
    let neg: Vec<f64> = y.iter().map(|v| -2.0 * v + 1.0).collect();
    assert!((pearson(&x, &neg).unwrap() + base).abs() < 1e-12);
}

/// A small hand-rolled set: random plaintexts, mostly-noise samples, one
/// column that genuinely leaks byte 1 under key byte 0x3D, one constant
/// column, and one column leaking byte 6 under 0xA7.
fn oracle_set() -> TraceSet {
    let mut state = 0xDECAF_u64;
    let traces: Vec<Trace> = (0..48)
        .map(|_| {
            let pt = Block64::new(xorshift(&mut state));
            let mut samples: Vec<f32> = (0..40)
                .map(|_| (unit_float(&mut state) * 4.0 - 2.0) as f32)
                .collect();
            let w1 = predict_intermediate(pt.bytes()[0], 0x3D).count_ones() as f64;
            samples[5] = (1.5 * w1 + 0.3 * unit_float(&mut state)) as f32;
            samples[7] = 2.5;
            let w6 = predict_intermediate(pt.bytes()[5], 0xA7).count_ones() as f64;
            samples[23] = (0.8 * w6 + 0.2 * unit_float(&mut state)) as f32;
            Trace {
                plaintext: pt,
                ciphertext: None,
                samples,
            }
        })
        .collect();
    TraceSet::new(traces, 2.5e9, None).unwrap()
}

#[test]
fn surface_matches_naive_per_pair_definition() {
    let set = oracle_set();
    let plaintexts = set.plaintexts();
    for idx in [ByteIndex::new(1).unwrap(), ByteIndex::new(6).unwrap()] {
        let m = hypothesis_matrix(&plaintexts, idx);
        let surface = correlation_surface(&m, &set).unwrap();
        for candidate in 0..=255u8 {
            let x: Vec<f64> = m.row(candidate).iter().map(|&w| f64::from(w)).collect();
            for s in 0..set.samples_per_trace() {
                let y: Vec<f64> = set
                    .traces()
                    .iter()
                    .map(|t| f64::from(t.samples[s]))
                    .collect();
                let got = surface.rho(candidate, s);
                match pearson(&x, &y) {
                    Ok(expected) => {
                        assert!(
                            (got - expected).abs() <= 1e-10,
                            "byte {idx:?} candidate {candidate} sample {s}: {got} vs {expected}"
                        );
                    }
                    Err(Error::UndefinedCorrelation(_)) => {
                        assert_eq!(got, 0.0, "degenerate cell must read exactly zero");
                        assert!(
                            surface.row_is_constant(candidate) || surface.column_is_constant(s)
                        );
                    }
                    Err(e) => panic!("unexpected error: {e}"),
                }
            }
        }
    }
}

#[test]
fn surface_flags_constant_columns_and_peaks_leak_column() {
    let set = oracle_set();
    let m = hypothesis_matrix(&set.plaintexts(), ByteIndex::new(1).unwrap());
    let surface = correlation_surface(&m, &set).unwrap();
    assert!(surface.column_is_constant(7));
    assert!(!surface.column_is_constant(5));
    assert!(!surface.hypothesis_is_constant());
    let (peak, sample) = surface.candidate_peak(0x3D);
    assert_eq!(sample, 5);
    assert!(peak > 0.95, "planted leak should dominate, got {peak}");
    let ranked = rank_candidates(&surface);
    assert_eq!(ranked[0].value, 0x3D);
    assert_eq!(ranked.len(), 256);
}

#[test]
fn surface_is_deterministic() {
    let set = oracle_set();
    let m = hypothesis_matrix(&set.plaintexts(), ByteIndex::new(1).unwrap());
    let a = correlation_surface(&m, &set).unwrap();
    let b = correlation_surface(&m, &set).unwrap();
    for c in 0..=255u8 {
        let (ra, rb) = (a.row(c), b.row(c));
        assert!(ra.iter().zip(rb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn equal_peaks_rank_by_candidate_value() {
    // two traces: every candidate whose two hypothesis values differ
    // correlates at exactly |1|, so the front of the ranking is a tie broken
    // by value
    let traces = vec![
        Trace {
            plaintext: Block64::new(0x00u64 << 56),
            ciphertext: None,
            samples: vec![1.0, 2.0],
        },
        Trace {
            plaintext: Block64::new(0x01u64 << 56),
            ciphertext: None,
            samples: vec![4.0, 3.0],
        },
    ];
    let set = TraceSet::new(traces, 1e6, None).unwrap();
    let m = hypothesis_matrix(&set.plaintexts(), ByteIndex::new(1).unwrap());
    let surface = correlation_surface(&m, &set).unwrap();
    let first_varying = (0..=255u8)
        .find(|&c| {
            predict_intermediate(0x00, c).count_ones() != predict_intermediate(0x01, c).count_ones()
        })
        .unwrap();
    let ranked = rank_candidates(&surface);
    assert_eq!(ranked[0].value, first_varying);
    assert!((ranked[0].peak_abs_rho - 1.0).abs() < 1e-12);
    // the tie block is ordered by value
    let tied: Vec<u8> = ranked
        .iter()
        .take_while(|r| (r.peak_abs_rho - ranked[0].peak_abs_rho).abs() < 1e-12)
        .map(|r| r.value)
        .collect();
    assert!(tied.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn noiseless_attack_recovers_every_byte_at_unit_correlation() {
    let key = Key80::from_hex("4F21B7D80A93E6C5158D").unwrap();
    let cfg = SynthConfig {
        noise_sigma: 0.0,
        seed: 7,
        ..SynthConfig::default()
    };
    let set = synthesize_set(256, key, &cfg).unwrap();
    let report = attack_key(&set, &AttackOptions::default()).unwrap();
    assert_eq!(report.recovered_bytes, key.bytes()[..8].to_vec());
    assert_eq!(report.recovered_k1_hex, "4F21B7D80A93E6C5");
    assert_eq!(report.all_bytes_correct, Some(true));
    assert!(report.all_bytes_confident);
    for outcome in &report.bytes {
        assert!(
            (outcome.peak_abs_rho - 1.0).abs() < 1e-9,
            "byte {}: peak {}",
            outcome.byte_index,
            outcome.peak_abs_rho
        );
        assert!(outcome.margin.unwrap() > 1.1);
        // every wrong candidate sits strictly below the winner
        for r in &outcome.ranked[1..] {
            assert!(r.peak_abs_rho < 1.0 - 1e-6);
        }
    }
}

#[test]
fn attack_peak_lands_in_the_right_leak_window() {
    let key = Key80::splat(0x5A);
    let cfg = SynthConfig {
        noise_sigma: 0.0,
        seed: 3,
        ..SynthConfig::default()
    };
    let set = synthesize_set(128, key, &cfg).unwrap();
    let report = attack_key(&set, &AttackOptions::default()).unwrap();
    for (i, outcome) in report.bytes.iter().enumerate() {
        let start = cfg.leak_window_start(i + 1);
        assert!(
            (start..start + cfg.leak_width).contains(&outcome.peak_sample),
            "byte {} peaked at {} outside its window",
            outcome.byte_index,
            outcome.peak_sample
        );
    }
}

#[test]
fn idle_set_yields_an_unconfident_report() {
    let cfg = SynthConfig {
        seed: 9,
        ..SynthConfig::default()
    };
    let set = synthesize_idle_set(32, &cfg).unwrap();
    let report = attack_key(&set, &AttackOptions::default()).unwrap();
    assert!(!report.all_bytes_confident);
    assert_eq!(report.all_bytes_correct, None);
    for outcome in &report.bytes {
        assert!(!outcome.confident);
        assert_eq!(outcome.peak_abs_rho, 0.0, "constant hypothesis rows");
    }
}

#[test]
fn leak_free_noise_is_not_called_confident() {
    // gain 0 leaves pure noise; the peak of |rho| over 256 candidates and
    // thousands of samples still clears 4/sqrt(N), which is why the margin
    // gate exists
    let key = Key80::splat(0xC3);
    let cfg = SynthConfig {
        gain: 0.0,
        seed: 21,
        ..SynthConfig::default()
    };
    let set = synthesize_set(256, key, &cfg).unwrap();
    let report = attack_key(&set, &AttackOptions::default()).unwrap();
    assert!(!report.all_bytes_confident);
    assert_eq!(report.bytes.iter().filter(|b| b.confident).count(), 0);
}

#[test]
fn attack_needs_two_traces() {
    let cfg = SynthConfig::default();
    let set = synthesize_set(1, Key80::splat(0), &cfg).unwrap();
    assert!(matches!(
        attack_key(&set, &AttackOptions::default()),
        Err(Error::Input(_))
    ));
}

#[test]
fn success_rate_is_perfect_without_noise_and_deterministic() {
    let cfg = SynthConfig {
        noise_sigma: 0.0,
        samples_per_trace: 1024,
        first_leak_offset: 128,
        leak_spacing: 96,
        leak_width: 16,
        seed: 42,
        ..SynthConfig::default()
    };
    for pattern in KeyPattern::ALL {
        let report = success_rate(pattern, 3, 96, &cfg).unwrap();
        assert_eq!(report.full_key_success, 1.0, "{pattern}");
        assert!(report.per_byte_success.iter().all(|&p| p == 1.0));
        let again = success_rate(pattern, 3, 96, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}

#[test]
fn success_rate_is_chance_level_without_leakage() {
    let cfg = SynthConfig {
        gain: 0.0,
        samples_per_trace: 512,
        first_leak_offset: 64,
        leak_spacing: 48,
        leak_width: 8,
        seed: 1234,
        ..SynthConfig::default()
    };
    let runs = 20;
    let report = success_rate(KeyPattern::OneZero, runs, 64, &cfg).unwrap();
    assert_eq!(report.full_key_success, 0.0);
    let total_hits: f64 = report
        .per_byte_success
        .iter()
        .map(|p| p * runs as f64)
        .sum();
    // 160 byte-recoveries at 1/256 each: expectation 0.625, so a handful of
    // hits is the most chance can produce
    assert!(
        total_hits <= 4.0,
        "leak-free recovery should sit at chance level, got {total_hits} hits"
    );
}

#[test]
fn pattern_parsing_accepts_hex_and_bits() {
    for (s, expected) in [
        ("00", KeyPattern::AllZeros),
        ("0x55", KeyPattern::ZeroOne),
        ("10101010b", KeyPattern::OneZero),
        ("ff", KeyPattern::AllOnes),
        ("11111111", KeyPattern::AllOnes),
    ] {
        assert_eq!(s.parse::<KeyPattern>().unwrap(), expected);
    }
    assert!("5b".parse::<KeyPattern>().is_err());
    assert!("".parse::<KeyPattern>().is_err());
    assert_eq!(KeyPattern::ZeroOne.key(), Key80::splat(0x55));
}
