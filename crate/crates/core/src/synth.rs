//! Synthetic EM trace generation.
//!
//! Each trace models one encryption seen by a near-field probe: a baseline
//! level that doubles while the device is busy, one rectangular emission pulse
//! per round-1 S-box output byte whose height follows the byte's Hamming
//! weight, a set of narrowband interferer tones, and white Gaussian noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cipher::{encrypt_scheduled, key_schedule, round1_sbox_state, Block64, Key80};
use crate::trace::{Trace, TraceSet};
use crate::{Error, Result};

/// One additive sinusoidal tone. Its phase is redrawn per trace, modelling an
/// emitter that is not synchronized with the acquisition trigger.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interferer {
    pub freq_hz: f64,
    pub amplitude: f64,
}

/// The seven bench tones (MHz) routinely visible on a desk setup of this
/// kind: harmonics of an ~11.27 MHz board clock subharmonic.
pub const BENCH_TONES_MHZ: [f64; 7] = [11.25, 22.5, 45.08, 56.33, 78.83, 90.08, 112.66];

/// The bench tone set as interferers with a common amplitude.
pub fn bench_interferers(amplitude: f64) -> Vec<Interferer> {
    BENCH_TONES_MHZ
        .iter()
        .map(|&mhz| Interferer {
            freq_hz: mhz * 1e6,
            amplitude,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    /// Volts of emission per active bit line (Hamming-weight coefficient).
    pub gain: f64,
    /// Standard deviation of the white Gaussian sample noise.
    pub noise_sigma: f64,
    /// Quiescent emission level.
    pub baseline: f64,
    /// Baseline multiplier while the device is encrypting.
    pub activity_gain: f64,
    pub sample_rate_hz: f64,
    pub samples_per_trace: usize,
    /// Sample index where the first leakage pulse starts.
    pub first_leak_offset: usize,
    /// Distance between consecutive pulse starts.
    pub leak_spacing: usize,
    /// Pulse length in samples.
    pub leak_width: usize,
    pub interferers: Vec<Interferer>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            gain: 1.0,
            noise_sigma: 1.0,
            baseline: 1.0,
            activity_gain: 2.0,
            sample_rate_hz: 2.5e9,
            samples_per_trace: 4096,
            first_leak_offset: 512,
            leak_spacing: 256,
            leak_width: 16,
            interferers: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite, got {v}")))
            }
        };
        finite(self.gain, "gain")?;
        finite(self.baseline, "baseline")?;
        finite(self.activity_gain, "activity_gain")?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sample_rate_hz must be finite and positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.samples_per_trace == 0 {
            return Err(Error::Config("samples_per_trace must be positive".into()));
        }
        if self.leak_width == 0 || self.leak_spacing == 0 {
            return Err(Error::Config("leak pulse width and spacing must be positive".into()));
        }
        if self.leak_width > self.leak_spacing {
            return Err(Error::Config(format!(
                "leak_width {} exceeds leak_spacing {}: pulses would overlap",
                self.leak_width, self.leak_spacing
            )));
        }
        if self.first_leak_offset + 8 * self.leak_spacing > self.samples_per_trace {
            return Err(Error::Config(format!(
                "leak layout overruns the trace: first_leak_offset {} + 8 * leak_spacing {} > samples_per_trace {}",
                self.first_leak_offset, self.leak_spacing, self.samples_per_trace
            )));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        for (i, tone) in self.interferers.iter().enumerate() {
            if !(tone.freq_hz.is_finite() && tone.freq_hz > 0.0 && tone.freq_hz <= nyquist) {
                return Err(Error::Config(format!(
                    "interferer {i} frequency {} Hz outside (0, {nyquist}] (Nyquist)",
                    tone.freq_hz
                )));
            }
            if !(tone.amplitude.is_finite() && tone.amplitude >= 0.0) {
                return Err(Error::Config(format!(
                    "interferer {i} amplitude must be finite and non-negative",
                )));
            }
        }
        Ok(())
    }

    /// Start of leak window `byte_index` (1..=8).
    pub fn leak_window_start(&self, byte_index: usize) -> usize {
        debug_assert!((1..=8).contains(&byte_index));
        self.first_leak_offset + (byte_index - 1) * self.leak_spacing
    }

    /// The generator for trace `index` under this seed. Stream 0 is reserved
    /// for the plaintext draw, so traces use streams 1..; every trace's byte
    /// stream is independent of the others and of the trace count.
    fn trace_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index + 1);
        rng
    }

    fn plaintext_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        rng
    }
}

/// Renders one trace. Draw order from `rng` is fixed: one phase per
/// interferer (in list order), then one Gaussian per sample (in index order).
pub fn synthesize_trace(
    pt: Block64,
    key: Key80,
    cfg: &SynthConfig,
    rng: &mut impl Rng,
) -> Trace {
    let state = round1_sbox_state(pt, key);
    let weights = state.bytes().map(|b| f64::from(b.count_ones()));
    let samples = render_samples(cfg, Some(&weights), cfg.activity_gain, rng);
    Trace {
        plaintext: pt,
        ciphertext: Some(encrypt_scheduled(pt, &key_schedule(key))),
        samples,
    }
}

fn render_samples(
    cfg: &SynthConfig,
    weights: Option<&[f64; 8]>,
    activity: f64,
    rng: &mut impl Rng,
) -> Vec<f32> {
    let base = cfg.baseline * activity;
    let mut level = vec![base; cfg.samples_per_trace];
    if let Some(weights) = weights {
        for (j, &w) in weights.iter().enumerate() {
            let start = cfg.leak_window_start(j + 1);
            for s in &mut level[start..start + cfg.leak_width] {
                *s += cfg.gain * w;
            }
        }
    }
    let phases: Vec<f64> = cfg
        .interferers
        .iter()
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    for tone in cfg.interferers.iter().zip(&phases) {
        let (tone, &phase) = tone;
        let step = std::f64::consts::TAU * tone.freq_hz / cfg.sample_rate_hz;
        for (s, slot) in level.iter_mut().enumerate() {
            *slot += tone.amplitude * (step * s as f64 + phase).sin();
        }
    }
    if cfg.noise_sigma > 0.0 {
        for slot in &mut level {
            let z: f64 = StandardNormal.sample(rng);
            *slot += cfg.noise_sigma * z;
        }
    }
    level.into_iter().map(|v| v as f32).collect()
}

/// Synthesizes `count` traces of the encryption of uniformly drawn plaintexts
/// under `key`. Fully deterministic in `cfg.seed`: plaintexts come from one
/// generator stream, each trace's phases and noise from its own.
pub fn synthesize_set(count: usize, key: Key80, cfg: &SynthConfig) -> Result<TraceSet> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::Config("trace count must be positive".into()));
    }
    let mut pt_rng = cfg.plaintext_rng();
    let plaintexts: Vec<Block64> = (0..count)
        .map(|_| Block64::new(pt_rng.random::<u64>()))
        .collect();

    #[cfg(feature = "parallel")]
    let traces: Vec<Trace> = {
        use rayon::prelude::*;
        plaintexts
            .par_iter()
            .enumerate()
            .map(|(t, &pt)| synthesize_trace(pt, key, cfg, &mut cfg.trace_rng(t as u64)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let traces: Vec<Trace> = plaintexts
        .iter()
        .enumerate()
        .map(|(t, &pt)| synthesize_trace(pt, key, cfg, &mut cfg.trace_rng(t as u64)))
        .collect();

    TraceSet::new(traces, cfg.sample_rate_hz, Some(key))
}

/// Synthesizes traces of a device that is powered but not encrypting: no
/// leakage pulses, activity factor 1, no key or ciphertexts. Interferers and
/// noise still apply. Plaintext fields are zero-filled.
pub fn synthesize_idle_set(count: usize, cfg: &SynthConfig) -> Result<TraceSet> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::Config("trace count must be positive".into()));
    }
    let traces: Vec<Trace> = (0..count)
        .map(|t| Trace {
            plaintext: Block64::new(0),
            ciphertext: None,
            samples: render_samples(cfg, None, 1.0, &mut cfg.trace_rng(t as u64)),
        })
        .collect();
    TraceSet::new(traces, cfg.sample_rate_hz, None)
}
