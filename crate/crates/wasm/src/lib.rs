//! Browser bindings: a JSON-in/JSON-out facade over trace synthesis, the
//! correlation attack, and key completion, thin enough to drive from a static
//! page. Every entry point takes a JSON string and returns one; failures come
//! back as `{"error": "..."}` rather than exceptions.

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use emsca::bfa::{complete_key, BfaOutcome, KnownPair, PartialKey};
use emsca::cema::{attack_key, AttackOptions};
use emsca::cipher::{encrypt, Block64, Key80};
use emsca::dsp::{fft_magnitude, BandMode, BandSpec};
use emsca::synth::{synthesize_set, Interferer, SynthConfig};
use emsca::Result;

const DEMO_TONE_HZ: f64 = 45.08e6;

fn default_key() -> String {
    "4F21B7D80A93E6C5158D".into()
}

fn default_traces() -> usize {
    256
}

fn default_gain() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct DemoConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_traces")]
    traces: usize,
    #[serde(default = "default_gain")]
    noise: f64,
    #[serde(default = "default_gain")]
    gain: f64,
    /// Amplitude of a tone at 45.08 MHz; 0 disables it.
    #[serde(default)]
    interferer_amplitude: f64,
    /// Notch out the tone band before attacking.
    #[serde(default)]
    notch: bool,
    #[serde(default = "default_key")]
    key: String,
}

impl DemoConfig {
    fn synth(&self) -> SynthConfig {
        let interferers = if self.interferer_amplitude > 0.0 {
            vec![Interferer {
                freq_hz: DEMO_TONE_HZ,
                amplitude: self.interferer_amplitude,
            }]
        } else {
            Vec::new()
        };
        SynthConfig {
            noise_sigma: self.noise,
            gain: self.gain,
            seed: self.seed,
            interferers,
            ..SynthConfig::default()
        }
    }

    fn key(&self) -> Result<Key80> {
        Key80::from_hex(self.key.trim())
    }
}

fn reply(result: Result<Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn parse_config(config_json: &str) -> Result<DemoConfig> {
    serde_json::from_str(config_json).map_err(|e| emsca::Error::Input(e.to_string()))
}

/// Synthesizes one trace under the given config and returns its samples, its
/// amplitude spectrum, and the leak-window layout, ready for plotting.
#[wasm_bindgen]
pub fn demo_synthesize(config_json: &str) -> String {
    reply((|| {
        let cfg = parse_config(config_json)?;
        let synth = cfg.synth();
        let set = synthesize_set(1, cfg.key()?, &synth)?;
        let trace = &set.traces()[0];
        let spectrum = fft_magnitude(&trace.samples, set.sample_rate_hz())?;
        let windows: Vec<usize> = (1..=8).map(|b| synth.leak_window_start(b)).collect();
        Ok(json!({
            "samples": trace.samples,
            "sample_rate_hz": set.sample_rate_hz(),
            "plaintext": trace.plaintext,
            "ciphertext": trace.ciphertext,
            "leak_window_starts": windows,
            "leak_width": synth.leak_width,
            "spectrum": {
                "bin_resolution_hz": spectrum.bin_resolution_hz,
                "magnitudes": spectrum.magnitudes,
            },
        }))
    })())
}

/// Synthesizes a set and runs the eight-byte correlation attack, optionally
/// notching the interferer band first. Returns per-byte outcomes with the
/// winning candidate's correlation curve, plus one known plaintext/ciphertext
/// pair for the completion step.
#[wasm_bindgen]
pub fn demo_attack(config_json: &str) -> String {
    reply((|| {
        let cfg = parse_config(config_json)?;
        let key = cfg.key()?;
        let synth = cfg.synth();
        let set = synthesize_set(cfg.traces, key, &synth)?;
        let filters = if cfg.notch {
            vec![BandSpec {
                low_hz: DEMO_TONE_HZ - 1e6,
                high_hz: DEMO_TONE_HZ + 1e6,
                mode: BandMode::Notch,
            }]
        } else {
            Vec::new()
        };
        let report = attack_key(&set, &AttackOptions { filters, top_k: 5 })?;
        let curves: Vec<Value> = report
            .bytes
            .iter()
            .map(|b| {
                json!({
                    "byte_index": b.byte_index,
                    "recovered": b.recovered,
                    "true_byte": key.bytes()[b.byte_index as usize - 1],
                    "correct": b.correct,
                    "confident": b.confident,
                    "peak_abs_rho": b.peak_abs_rho,
                    "peak_sample": b.peak_sample,
                    "margin": b.margin,
                    "ranked": b.ranked,
                })
            })
            .collect();
        // one full curve is enough for the plot; ship the winner of each byte
        let rho_curves: Vec<Vec<f64>> = {
            let plaintexts = set.plaintexts();
            let working = if report.filters.is_empty() {
                set
            } else {
                let mut w = set;
                for band in &report.filters {
                    w = emsca::dsp::band_filter(&w, band)?;
                }
                w
            };
            emsca::leakage::ByteIndex::all()
                .zip(&report.bytes)
                .map(|(idx, b)| {
                    let m = emsca::leakage::hypothesis_matrix(&plaintexts, idx);
                    let surface = emsca::cema::correlation_surface(&m, &working)?;
                    Ok(surface.row(b.recovered).to_vec())
                })
                .collect::<Result<_>>()?
        };
        let pair_pt = Block64::new(0x0011_2233_4455_6677);
        Ok(json!({
            "recovered_k1_hex": report.recovered_k1_hex,
            "true_k1_hex": Block64::from_bytes(key.bytes()[..8].try_into().unwrap()).to_hex(),
            "all_bytes_correct": report.all_bytes_correct,
            "all_bytes_confident": report.all_bytes_confident,
            "confidence_threshold": report.confidence_threshold,
            "traces": report.traces,
            "bytes": curves,
            "rho_curves": rho_curves,
            "pair_pt_hex": pair_pt.to_hex(),
            "pair_ct_hex": encrypt(pair_pt, key).to_hex(),
        }))
    })())
}

#[derive(Deserialize)]
struct CompleteArgs {
    partial_hex: String,
    pt_hex: String,
    ct_hex: String,
}

/// Exhausts the last two key bytes against one known pair and reports the
/// reconstructed 80-bit key.
#[wasm_bindgen]
pub fn demo_complete_key(args_json: &str) -> String {
    reply((|| {
        let args: CompleteArgs =
            serde_json::from_str(args_json).map_err(|e| emsca::Error::Input(e.to_string()))?;
        let partial = PartialKey::from_hex(args.partial_hex.trim())?;
        let pair = KnownPair {
            plaintext: Block64::from_hex(args.pt_hex.trim())?,
            ciphertext: Block64::from_hex(args.ct_hex.trim())?,
        };
        let report = complete_key(partial, &[pair])?;
        let (kind, key_hex) = match &report.outcome {
            BfaOutcome::Found(k) => ("found", Some(k.to_hex())),
            BfaOutcome::Ambiguous(ks) => ("ambiguous", ks.first().map(|k| k.to_hex())),
            BfaOutcome::NotFound => ("not_found", None),
        };
        let verified = match &report.outcome {
            BfaOutcome::Found(k) => encrypt(pair.plaintext, *k) == pair.ciphertext,
            _ => false,
        };
        Ok(json!({
            "outcome": kind,
            "key_hex": key_hex,
            "trials": report.trials,
            "verified": verified,
        }))
    })())
}
