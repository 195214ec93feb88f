//! Spectral tooling against first-principles oracles: direct energy sums,
//! bin-centered tones, and filter algebra.

use emsca::cipher::Block64;
use emsca::dsp::{
    band_filter, fft_magnitude, spectrogram, BandMode, BandSpec, Spectrum,
};
use emsca::trace::{Trace, TraceSet};

const RATE: f64 = 2.5e9;

fn tone(n: usize, bin: usize, amplitude: f64, phase: f64) -> Vec<f32> {
    (0..n)
        .map(|t| {
            (amplitude * (std::f64::consts::TAU * bin as f64 * t as f64 / n as f64 + phase).sin())
                as f32
        })
        .collect()
}

fn set_of(samples: Vec<Vec<f32>>) -> TraceSet {
    let traces = samples
        .into_iter()
        .map(|s| Trace {
            plaintext: Block64::new(0),
            ciphertext: None,
            samples: s,
        })
        .collect();
    TraceSet::new(traces, RATE, None).unwrap()
}

/// Time-domain energy recomputed from the one-sided amplitude spectrum:
/// sum x^2 = (1/n) sum |X_k|^2 over all n bins, where interior one-sided bins
/// stand for a mirrored pair of |X| = m n / 2 and the edges for |X| = m n.
fn spectral_energy(spec: &Spectrum, n: usize) -> f64 {
    let nf = n as f64;
    spec.magnitudes
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            if k == 0 || (n % 2 == 0 && k == n / 2) {
                nf * m * m
            } else {
                nf / 2.0 * m * m
            }
        })
        .sum()
}

#[test]
fn dc_trace_concentrates_in_bin_zero() {
    let spec = fft_magnitude(&vec![0.75f32; 1024], RATE).unwrap();
    assert_eq!(spec.bins(), 513);
    assert!((spec.magnitudes[0] - 0.75).abs() < 1e-12);
    assert!(spec.magnitudes[1..].iter().all(|&m| m < 1e-12));
    assert_eq!(spec.bin_resolution_hz, RATE / 1024.0);
}

#[test]
fn bin_centered_tone_reads_its_amplitude() {
    let n = 4096;
    let spec = fft_magnitude(&tone(n, 73, 1.5, 0.9), RATE).unwrap();
    // samples are stored as f32, which bounds the recoverable precision
    assert!((spec.magnitudes[73] - 1.5).abs() < 1.5e-6);
    assert_eq!(spec.peak_bin(), 73);
    for (k, &m) in spec.magnitudes.iter().enumerate() {
        if k != 73 {
            assert!(m < 1.5e-6, "bin {k} holds {m}");
        }
    }
}

#[test]
fn parseval_energy_identity() {
    // deterministic ragged signal: tones plus a pseudo-random walk
    let n = 2048usize;
    let mut x = 0x2545F4914F6CDD1Du64;
    let samples: Vec<f32> = (0..n)
        .map(|t| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let noise = (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            (noise
                + (std::f64::consts::TAU * 31.0 * t as f64 / n as f64).sin()
                + 0.25 * (std::f64::consts::TAU * 500.0 * t as f64 / n as f64).cos())
                as f32
        })
        .collect();
    let time_energy: f64 = samples.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
    let spec = fft_magnitude(&samples, RATE).unwrap();
    let freq_energy = spectral_energy(&spec, n);
    assert!(
        ((time_energy - freq_energy) / time_energy).abs() < 1e-9,
        "time {time_energy} vs freq {freq_energy}"
    );
}

#[test]
fn parseval_holds_for_odd_length() {
    let samples: Vec<f32> = (0..999)
        .map(|t| ((t as f64 * 0.37).sin() + 0.2) as f32)
        .collect();
    let time_energy: f64 = samples.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
    let spec = fft_magnitude(&samples, 1e6).unwrap();
    assert_eq!(spec.bins(), 500);
    let freq_energy = spectral_energy(&spec, 999);
    assert!(((time_energy - freq_energy) / time_energy).abs() < 1e-9);
}

#[test]
fn spectrogram_frame_count_formula() {
    let samples = vec![0.0f32; 4096];
    let sg = spectrogram(&samples, RATE, 256, 128).unwrap();
    assert_eq!(sg.frames.len(), (4096 - 256) / 128 + 1);
    assert_eq!(sg.frames[0].len(), 129);
    assert_eq!(sg.bin_resolution_hz, RATE / 256.0);

    let sg = spectrogram(&vec![0.0f32; 100], 1e6, 37, 11).unwrap();
    assert_eq!(sg.frames.len(), (100 - 37) / 26 + 1);
}

#[test]
fn spectrogram_follows_a_frequency_hop() {
    let n = 4096;
    let half = n / 2;
    let window = 256;
    // 16 cycles per window in the first half, 48 in the second
    let f1 = 16.0 / window as f64;
    let f2 = 48.0 / window as f64;
    let samples: Vec<f32> = (0..n)
        .map(|t| {
            let f = if t < half { f1 } else { f2 };
            (std::f64::consts::TAU * f * t as f64).sin() as f32
        })
        .collect();
    let sg = spectrogram(&samples, RATE, window, 0).unwrap();
    let peak = |frame: &Vec<f64>| {
        frame
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    };
    assert_eq!(peak(&sg.frames[0]), 16);
    assert_eq!(peak(sg.frames.last().unwrap()), 48);
}

#[test]
fn full_band_pass_is_identity() {
    let set = set_of(vec![tone(1024, 19, 2.0, 0.3), tone(1024, 7, 0.5, 1.1)]);
    let band = BandSpec { low_hz: 0.0, high_hz: RATE / 2.0, mode: BandMode::Pass };
    let out = band_filter(&set, &band).unwrap();
    for (a, b) in out.traces().iter().zip(set.traces()) {
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn notch_removes_a_centered_tone_by_sixty_db() {
    let n = 4096;
    let bin = 73; // 73 * rate/4096 ~ 44.6 MHz
    let freq = bin as f64 * RATE / n as f64;
    let set = set_of(vec![tone(n, bin, 1.0, 0.0)]);
    let band = BandSpec { low_hz: freq - 1e6, high_hz: freq + 1e6, mode: BandMode::Notch };
    let out = band_filter(&set, &band).unwrap();
    let before = fft_magnitude(&set.traces()[0].samples, RATE).unwrap();
    let after = fft_magnitude(&out.traces()[0].samples, RATE).unwrap();
    assert!(
        after.magnitudes[bin] <= 1e-3 * before.magnitudes[bin],
        "tone bin fell only from {} to {}",
        before.magnitudes[bin],
        after.magnitudes[bin]
    );
}

#[test]
fn pass_band_keeps_inband_tone_and_drops_outband() {
    let n = 4096;
    let keep_bin = 100;
    let drop_bin = 600;
    let samples: Vec<f32> = tone(n, keep_bin, 1.0, 0.2)
        .iter()
        .zip(&tone(n, drop_bin, 1.0, 1.7))
        .map(|(a, b)| a + b)
        .collect();
    let set = set_of(vec![samples]);
    let center = keep_bin as f64 * RATE / n as f64;
    let out = band_filter(
        &set,
        &BandSpec { low_hz: center - 5e6, high_hz: center + 5e6, mode: BandMode::Pass },
    )
    .unwrap();
    let spec = fft_magnitude(&out.traces()[0].samples, RATE).unwrap();
    assert!((spec.magnitudes[keep_bin] - 1.0).abs() < 1e-6);
    assert!(spec.magnitudes[drop_bin] < 1e-9);
}

#[test]
fn band_filter_is_idempotent() {
    let set = set_of(vec![tone(2048, 41, 1.0, 0.0), tone(2048, 97, 0.7, 0.4)]);
    let band = BandSpec { low_hz: 3e7, high_hz: 9e7, mode: BandMode::Notch };
    let once = band_filter(&set, &band).unwrap();
    let twice = band_filter(&once, &band).unwrap();
    for (a, b) in twice.traces().iter().zip(once.traces()) {
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn band_filter_is_linear() {
    let x = tone(1024, 33, 1.0, 0.0);
    let y = tone(1024, 57, 0.8, 0.9);
    let alpha = 2.5f32;
    let combined: Vec<f32> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
    let band = BandSpec { low_hz: 5e7, high_hz: 1.2e8, mode: BandMode::Pass };
    let fx = band_filter(&set_of(vec![x]), &band).unwrap();
    let fy = band_filter(&set_of(vec![y]), &band).unwrap();
    let fc = band_filter(&set_of(vec![combined]), &band).unwrap();
    for ((c, a), b) in fc.traces()[0]
        .samples
        .iter()
        .zip(&fx.traces()[0].samples)
        .zip(&fy.traces()[0].samples)
    {
        assert!((c - (alpha * a + b)).abs() < 1e-5);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let set = set_of(vec![vec![0.0; 64]]);
    for band in [
        BandSpec { low_hz: 5e8, high_hz: 4e8, mode: BandMode::Pass },
        BandSpec { low_hz: 0.0, high_hz: 2e9, mode: BandMode::Pass },
        BandSpec { low_hz: -1.0, high_hz: 1e8, mode: BandMode::Notch },
    ] {
        assert!(band_filter(&set, &band).is_err(), "{band:?}");
    }
    assert!(fft_magnitude(&[], RATE).is_err());
    assert!(spectrogram(&[0.0; 64], RATE, 0, 0).is_err());
    assert!(spectrogram(&[0.0; 64], RATE, 128, 0).is_err());
    assert!(spectrogram(&[0.0; 64], RATE, 32, 32).is_err());
}
