//! Frequency-domain tooling: one-sided magnitude spectra, short-time
//! spectrograms, and zero-phase brick-wall band filtering.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::trace::TraceSet;
use crate::{Error, Result};

/// One-sided amplitude spectrum. `magnitudes[k]` is the amplitude at
/// `k * bin_resolution_hz`: a pure sinusoid of amplitude A centered on bin k
/// reads as A there (DC and Nyquist carry the plain average magnitude).
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub bin_resolution_hz: f64,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    pub fn bins(&self) -> usize {
        self.magnitudes.len()
    }

    /// Index of the strongest bin.
    pub fn peak_bin(&self) -> usize {
        self.magnitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}

/// Hann-windowed short-time spectrum sequence. Frame `f` starts at sample
/// `f * (window_len - overlap)`; frames that would overrun the trace are
/// dropped, giving `(samples - window_len) / (window_len - overlap) + 1`
/// frames.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrogram {
    pub bin_resolution_hz: f64,
    pub window_len: usize,
    pub overlap: usize,
    pub frames: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandMode {
    /// Keep only the band.
    Pass,
    /// Remove the band.
    Notch,
}

/// A frequency band acting on FFT bins whose center lies in `[low_hz, high_hz]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub mode: BandMode,
}

impl BandSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        if !(self.low_hz.is_finite() && self.high_hz.is_finite()) || self.low_hz < 0.0 {
            return Err(Error::Config(format!(
                "band edges must be finite and non-negative, got {}..{}",
                self.low_hz, self.high_hz
            )));
        }
        if self.low_hz >= self.high_hz {
            return Err(Error::Config(format!(
                "band low edge {} Hz must lie below high edge {} Hz",
                self.low_hz, self.high_hz
            )));
        }
        if self.high_hz > nyquist {
            return Err(Error::Config(format!(
                "band high edge {} Hz exceeds Nyquist {} Hz",
                self.high_hz, nyquist
            )));
        }
        Ok(())
    }
}

fn forward_fft(samples: &[f32], fft: &Arc<dyn Fft<f64>>) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples
        .iter()
        .map(|&v| Complex64::new(f64::from(v), 0.0))
        .collect();
    fft.process(&mut buf);
    buf
}

/// One-sided amplitude spectrum of a sample vector.
pub fn fft_magnitude(samples: &[f32], sample_rate_hz: f64) -> Result<Spectrum> {
    if samples.is_empty() {
        return Err(Error::Input("cannot take the spectrum of zero samples".into()));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::Input(format!(
            "sample rate must be finite and positive, got {sample_rate_hz}"
        )));
    }
    let n = samples.len();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let buf = forward_fft(samples, &fft);
    Ok(Spectrum {
        bin_resolution_hz: sample_rate_hz / n as f64,
        magnitudes: one_sided(&buf),
    })
}

fn one_sided(buf: &[Complex64]) -> Vec<f64> {
    let n = buf.len();
    let bins = n / 2 + 1;
    (0..bins)
        .map(|k| {
            let scale = if k == 0 || (n % 2 == 0 && k == n / 2) {
                1.0
            } else {
                2.0
            };
            scale * buf[k].norm() / n as f64
        })
        .collect()
}

/// Hann-windowed short-time Fourier magnitudes.
pub fn spectrogram(
    samples: &[f32],
    sample_rate_hz: f64,
    window_len: usize,
    overlap: usize,
) -> Result<Spectrogram> {
    if window_len == 0 || window_len > samples.len() {
        return Err(Error::Input(format!(
            "window length {window_len} outside 1..={}",
            samples.len()
        )));
    }
    if overlap >= window_len {
        return Err(Error::Input(format!(
            "overlap {overlap} must be smaller than the window length {window_len}"
        )));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::Input(format!(
            "sample rate must be finite and positive, got {sample_rate_hz}"
        )));
    }
    let hann: Vec<f64> = (0..window_len)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / window_len as f64).cos()))
        .collect();
    let stride = window_len - overlap;
    let frame_count = (samples.len() - window_len) / stride + 1;
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let mut frames = Vec::with_capacity(frame_count);
    for f in 0..frame_count {
        let start = f * stride;
        let mut buf: Vec<Complex64> = samples[start..start + window_len]
            .iter()
            .zip(&hann)
            .map(|(&v, &w)| Complex64::new(f64::from(v) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        frames.push(one_sided(&buf));
    }
    Ok(Spectrogram {
        bin_resolution_hz: sample_rate_hz / window_len as f64,
        window_len,
        overlap,
        frames,
    })
}

/// Zero-phase brick-wall filter: masks whole FFT bins (symmetrically, so the
/// output stays real), leaving kept bins untouched. Applying the same band
/// twice therefore changes nothing beyond round-off.
pub fn band_filter(set: &TraceSet, band: &BandSpec) -> Result<TraceSet> {
    band.validate(set.sample_rate_hz())?;
    let n = set.samples_per_trace();
    let resolution = set.sample_rate_hz() / n as f64;
    let mut keep = vec![false; n];
    for (k, slot) in keep.iter_mut().enumerate() {
        let center = resolution * if k <= n / 2 { k as f64 } else { (n - k) as f64 };
        let in_band = center >= band.low_hz && center <= band.high_hz;
        *slot = match band.mode {
            BandMode::Pass => in_band,
            BandMode::Notch => !in_band,
        };
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let filter_one = |samples: &[f32]| -> Vec<f32> {
        let mut buf = forward_fft(samples, &forward);
        for (slot, &k) in buf.iter_mut().zip(&keep) {
            if !k {
                *slot = Complex64::new(0.0, 0.0);
            }
        }
        inverse.process(&mut buf);
        buf.iter().map(|c| (c.re / n as f64) as f32).collect()
    };

    #[cfg(feature = "parallel")]
    let filtered: Vec<Vec<f32>> = {
        use rayon::prelude::*;
        set.traces().par_iter().map(|t| filter_one(&t.samples)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let filtered: Vec<Vec<f32>> = set.traces().iter().map(|t| filter_one(&t.samples)).collect();

    set.with_samples(filtered)
}

/// Writes `bin_hz,magnitude` rows.
pub fn spectrum_csv(spectrum: &Spectrum, w: &mut impl Write) -> Result<()> {
    writeln!(w, "bin_hz,magnitude")?;
    for (k, m) in spectrum.magnitudes.iter().enumerate() {
        writeln!(w, "{:e},{:e}", k as f64 * spectrum.bin_resolution_hz, m)?;
    }
    Ok(())
}

/// Writes `frame,bin_hz,magnitude` rows.
pub fn spectrogram_csv(sg: &Spectrogram, w: &mut impl Write) -> Result<()> {
    writeln!(w, "frame,bin_hz,magnitude")?;
    for (f, frame) in sg.frames.iter().enumerate() {
        for (k, m) in frame.iter().enumerate() {
            writeln!(w, "{f},{:e},{:e}", k as f64 * sg.bin_resolution_hz, m)?;
        }
    }
    Ok(())
}
