//! Simple EM analysis: amplitude statistics that separate an encrypting
//! device from an idle one without any key hypothesis.

use serde::Serialize;

use crate::trace::{Trace, TraceSet};
use crate::{Error, Result};

/// Amplitude comparison of an active capture against an idle one.
#[derive(Clone, Debug, Serialize)]
pub struct SemaReport {
    pub traces_active: usize,
    pub traces_idle: usize,
    pub rms_active: f64,
    pub rms_idle: f64,
    /// `rms_active / rms_idle`; near 2 when activity doubles the baseline.
    pub ratio_rms: f64,
    pub peak_active: f64,
    pub peak_idle: f64,
}

/// Root mean square of the sample segment `[start, end)`.
pub fn rms(trace: &Trace, start: usize, end: usize) -> Result<f64> {
    if start >= end || end > trace.samples.len() {
        return Err(Error::Input(format!(
            "segment {start}..{end} outside 0..{}",
            trace.samples.len()
        )));
    }
    let sum: f64 = trace.samples[start..end]
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum();
    Ok((sum / (end - start) as f64).sqrt())
}

fn set_rms(set: &TraceSet) -> f64 {
    let mut sum = 0.0f64;
    for t in set.traces() {
        for &v in &t.samples {
            sum += f64::from(v) * f64::from(v);
        }
    }
    (sum / (set.len() * set.samples_per_trace()) as f64).sqrt()
}

fn set_peak(set: &TraceSet) -> f64 {
    set.traces()
        .iter()
        .flat_map(|t| t.samples.iter())
        .fold(0.0f64, |acc, &v| acc.max(f64::from(v.abs())))
}

/// Compares aggregate amplitude statistics of two captures.
pub fn compare_sets(active: &TraceSet, idle: &TraceSet) -> Result<SemaReport> {
    if active.sample_rate_hz() != idle.sample_rate_hz() {
        return Err(Error::Data(format!(
            "sample rates differ: active {} Hz vs idle {} Hz",
            active.sample_rate_hz(),
            idle.sample_rate_hz()
        )));
    }
    let rms_active = set_rms(active);
    let rms_idle = set_rms(idle);
    if rms_idle == 0.0 {
        return Err(Error::Data(
            "idle set has zero RMS; the amplitude ratio is undefined".into(),
        ));
    }
    Ok(SemaReport {
        traces_active: active.len(),
        traces_idle: idle.len(),
        rms_active,
        rms_idle,
        ratio_rms: rms_active / rms_idle,
        peak_active: set_peak(active),
        peak_idle: set_peak(idle),
    })
}
