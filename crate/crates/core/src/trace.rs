//! In-memory trace containers.

use crate::cipher::{Block64, Key80};
use crate::{Error, Result};

/// One captured (or synthesized) waveform with the plaintext that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub plaintext: Block64,
    pub ciphertext: Option<Block64>,
    pub samples: Vec<f32>,
}

/// A homogeneous collection of traces sharing one acquisition setup.
///
/// Invariants, enforced at construction: at least one trace, every trace has
/// the same (non-zero) sample count, ciphertexts are present on all traces or
/// on none, and the sample rate is finite and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    traces: Vec<Trace>,
    samples_per_trace: usize,
    sample_rate_hz: f64,
    key: Option<Key80>,
}

impl TraceSet {
    pub fn new(traces: Vec<Trace>, sample_rate_hz: f64, key: Option<Key80>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::Data("a trace set must contain at least one trace".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Data(format!(
                "sample rate must be finite and positive, got {sample_rate_hz}"
            )));
        }
        let samples_per_trace = traces[0].samples.len();
        if samples_per_trace == 0 {
            return Err(Error::Data("traces must contain at least one sample".into()));
        }
        let with_ct = traces[0].ciphertext.is_some();
        for (i, t) in traces.iter().enumerate() {
            if t.samples.len() != samples_per_trace {
                return Err(Error::Data(format!(
                    "trace {i} has {} samples, expected {samples_per_trace}",
                    t.samples.len()
                )));
            }
            if t.ciphertext.is_some() != with_ct {
                return Err(Error::Data(format!(
                    "trace {i} {} a ciphertext while trace 0 does not agree",
                    if with_ct { "lacks" } else { "carries" }
                )));
            }
        }
        Ok(TraceSet {
            traces,
            samples_per_trace,
            sample_rate_hz,
            key,
        })
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty sets
    }

    pub fn samples_per_trace(&self) -> usize {
        self.samples_per_trace
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn key(&self) -> Option<Key80> {
        self.key
    }

    pub fn has_ciphertexts(&self) -> bool {
        self.traces[0].ciphertext.is_some()
    }

    pub fn plaintexts(&self) -> Vec<Block64> {
        self.traces.iter().map(|t| t.plaintext).collect()
    }

    /// Replaces every trace's samples, keeping metadata. Sample counts must match.
    pub(crate) fn with_samples(&self, new_samples: Vec<Vec<f32>>) -> Result<Self> {
        if new_samples.len() != self.traces.len() {
            return Err(Error::Data("replacement sample count mismatch".into()));
        }
        let traces = self
            .traces
            .iter()
            .zip(new_samples)
            .map(|(t, samples)| Trace {
                plaintext: t.plaintext,
                ciphertext: t.ciphertext,
                samples,
            })
            .collect();
        TraceSet::new(traces, self.sample_rate_hz, self.key)
    }
}
