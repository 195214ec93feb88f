//! Correlation EM analysis: Pearson correlation of Hamming-weight hypotheses
//! against trace columns, candidate ranking, the per-byte attack, and the
//! success-rate harness.

use serde::Serialize;

use crate::cipher::{Block64, Key80};
use crate::dsp::{band_filter, BandSpec};
use crate::leakage::{hypothesis_matrix, ByteIndex, HypothesisMatrix};
use crate::synth::{synthesize_set, SynthConfig};
use crate::trace::TraceSet;
use crate::{Error, Result};

/// Peak |rho| must clear `4 / sqrt(traces)` — four standard deviations of the
/// single-column null distribution — before a byte is called confident.
pub const NOISE_FLOOR_SIGMA: f64 = 4.0;

/// The best candidate must also beat the runner-up by this factor. The peak
/// is a maximum over every candidate and sample, so on pure noise it lands
/// well above the single-column 4-sigma line with the whole field bunched
/// together; genuine leakage separates from the field instead.
pub const CONFIDENCE_MARGIN_MIN: f64 = 1.1;

/// Pearson correlation coefficient of two equal-length vectors.
///
/// Computed with the sample (n-1) normalization; the ratio is identical under
/// the population convention because the factor cancels.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Input("correlation needs at least two points".into()));
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first input is constant"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second input is constant"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// |rho| for all 256 candidates at every sample index.
///
/// Columns with zero variance and candidate rows with zero variance carry
/// rho = 0 and are flagged rather than reported as errors.
#[derive(Clone, Debug)]
pub struct CorrelationSurface {
    byte_index: ByteIndex,
    traces: usize,
    samples: usize,
    rho: Vec<f64>,
    constant_columns: Vec<bool>,
    constant_rows: Vec<bool>,
    hypothesis_constant: bool,
}

impl CorrelationSurface {
    pub fn byte_index(&self) -> ByteIndex {
        self.byte_index
    }

    pub fn traces(&self) -> usize {
        self.traces
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn rho(&self, candidate: u8, sample: usize) -> f64 {
        self.rho[candidate as usize * self.samples + sample]
    }

    pub fn row(&self, candidate: u8) -> &[f64] {
        let c = candidate as usize;
        &self.rho[c * self.samples..(c + 1) * self.samples]
    }

    pub fn column_is_constant(&self, sample: usize) -> bool {
        self.constant_columns[sample]
    }

    pub fn row_is_constant(&self, candidate: u8) -> bool {
        self.constant_rows[candidate as usize]
    }

    /// True when the plaintext byte never varies, so every hypothesis row is
    /// constant and the whole surface is undefined.
    pub fn hypothesis_is_constant(&self) -> bool {
        self.hypothesis_constant
    }

    /// `(max |rho|, sample index)` for one candidate; the earliest sample wins ties.
    pub fn candidate_peak(&self, candidate: u8) -> (f64, usize) {
        let row = self.row(candidate);
        let mut best = (0.0f64, 0usize);
        for (s, &r) in row.iter().enumerate() {
            let a = r.abs();
            if a > best.0 {
                best = (a, s);
            }
        }
        best
    }
}

/// Per-nibble weight table: `W4[c][v] = HW(SBOX[v ^ c])`.
fn nibble_weights() -> [[f64; 16]; 16] {
    let mut t = [[0.0; 16]; 16];
    for (c, row) in t.iter_mut().enumerate() {
        for (v, slot) in row.iter_mut().enumerate() {
            *slot = f64::from(crate::cipher::sbox((v ^ c) as u8).count_ones());
        }
    }
    t
}

/// Correlates every hypothesis row against every sample column.
///
/// Internally the traces are first folded into 256 per-plaintext-byte-value
/// partial sums (the hypothesis value depends on the plaintext byte alone), so
/// the cost per candidate is independent of the trace count. Accumulation
/// order is fixed — trace index order within a class, class order across — so
/// results are identical across runs and thread counts, and agree with the
/// naive per-pair definition to within rounding.
pub fn correlation_surface(m: &HypothesisMatrix, set: &TraceSet) -> Result<CorrelationSurface> {
    let n = set.len();
    if m.traces() != n {
        return Err(Error::Input(format!(
            "hypothesis matrix covers {} traces but the set holds {n}",
            m.traces()
        )));
    }
    if n < 2 {
        return Err(Error::Input("correlation needs at least two traces".into()));
    }
    let s_len = set.samples_per_trace();
    let pt_bytes = m.pt_bytes();

    let mut counts = [0u64; 256];
    for &v in pt_bytes {
        counts[v as usize] += 1;
    }
    let distinct = counts.iter().filter(|&&c| c > 0).count();
    let hypothesis_constant = distinct <= 1;

    // per-class column sums
    let mut class_sums = vec![0.0f64; 256 * s_len];
    let mut sum_y = vec![0.0f64; s_len];
    let mut sum_y2 = vec![0.0f64; s_len];
    let mut col_min = vec![f32::INFINITY; s_len];
    let mut col_max = vec![f32::NEG_INFINITY; s_len];
    for (t, trace) in set.traces().iter().enumerate() {
        let class = pt_bytes[t] as usize;
        let row = &mut class_sums[class * s_len..(class + 1) * s_len];
        for (j, &v) in trace.samples.iter().enumerate() {
            let vf = f64::from(v);
            row[j] += vf;
            sum_y[j] += vf;
            sum_y2[j] += vf * vf;
            col_min[j] = col_min[j].min(v);
            col_max[j] = col_max[j].max(v);
        }
    }

    let nf = n as f64;
    let constant_columns: Vec<bool> = (0..s_len).map(|j| col_min[j] == col_max[j]).collect();
    // 1 / sqrt(n * sum y^2 - (sum y)^2), or 0 for degenerate columns
    let col_scale: Vec<f64> = (0..s_len)
        .map(|j| {
            if constant_columns[j] {
                return 0.0;
            }
            let var_num = nf * sum_y2[j] - sum_y[j] * sum_y[j];
            if var_num > 0.0 {
                1.0 / var_num.sqrt()
            } else {
                0.0
            }
        })
        .collect();

    // fold classes along each nibble of the plaintext byte
    let mut hi_sums = vec![0.0f64; 16 * s_len]; // by high nibble
    let mut lo_sums = vec![0.0f64; 16 * s_len]; // by low nibble
    for v in 0..256usize {
        if counts[v] == 0 {
            continue;
        }
        let row = &class_sums[v * s_len..(v + 1) * s_len];
        let hi = &mut hi_sums[(v >> 4) * s_len..(v >> 4) * s_len + s_len];
        for (slot, &x) in hi.iter_mut().zip(row) {
            *slot += x;
        }
        let lo = &mut lo_sums[(v & 15) * s_len..(v & 15) * s_len + s_len];
        for (slot, &x) in lo.iter_mut().zip(row) {
            *slot += x;
        }
    }

    let w4 = nibble_weights();
    // cross sums per candidate nibble: hi_cross[ch] = sum over vh of W4[ch][vh] * hi_sums[vh]
    let nibble_cross = |sums: &[f64]| -> Vec<f64> {
        let mut cross = vec![0.0f64; 16 * s_len];
        for (c4, out_row) in cross.chunks_exact_mut(s_len).enumerate() {
            for v4 in 0..16usize {
                let w = w4[c4][v4];
                let src = &sums[v4 * s_len..(v4 + 1) * s_len];
                for (slot, &x) in out_row.iter_mut().zip(src) {
                    *slot += w * x;
                }
            }
        }
        cross
    };
    let hi_cross = nibble_cross(&hi_sums);
    let lo_cross = nibble_cross(&lo_sums);

    // integer-exact per-candidate hypothesis moments
    let mut sum_x = [0i64; 256];
    let mut sum_x2 = [0i64; 256];
    for c in 0..256usize {
        for v in 0..256usize {
            let cnt = counts[v] as i64;
            if cnt == 0 {
                continue;
            }
            let w = (w4[c >> 4][v >> 4] + w4[c & 15][v & 15]) as i64;
            sum_x[c] += cnt * w;
            sum_x2[c] += cnt * w * w;
        }
    }
    let constant_rows: Vec<bool> = (0..256)
        .map(|c| n as i64 * sum_x2[c] - sum_x[c] * sum_x[c] == 0)
        .collect();
    let row_scale: Vec<f64> = (0..256)
        .map(|c| {
            let var_num = (n as i64 * sum_x2[c] - sum_x[c] * sum_x[c]) as f64;
            if var_num > 0.0 {
                1.0 / var_num.sqrt()
            } else {
                0.0
            }
        })
        .collect();

    let mut rho = vec![0.0f64; 256 * s_len];
    let fill_row = |c: usize, out: &mut [f64]| {
        let hi = &hi_cross[(c >> 4) * s_len..(c >> 4) * s_len + s_len];
        let lo = &lo_cross[(c & 15) * s_len..(c & 15) * s_len + s_len];
        let sx = sum_x[c] as f64;
        let rscale = row_scale[c];
        for (j, slot) in out.iter_mut().enumerate() {
            let sum_xy = hi[j] + lo[j];
            let num = nf * sum_xy - sx * sum_y[j];
            *slot = num * rscale * col_scale[j];
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        rho.par_chunks_exact_mut(s_len)
            .enumerate()
            .for_each(|(c, out)| fill_row(c, out));
    }
    #[cfg(not(feature = "parallel"))]
    for (c, out) in rho.chunks_exact_mut(s_len).enumerate() {
        fill_row(c, out);
    }

    Ok(CorrelationSurface {
        byte_index: m.byte_index(),
        traces: n,
        samples: s_len,
        rho,
        constant_columns,
        constant_rows,
        hypothesis_constant,
    })
}

/// One candidate's standing: its peak |rho| and where it occurred.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CandidateRank {
    pub value: u8,
    pub peak_abs_rho: f64,
    pub peak_sample: usize,
}

/// All 256 candidates ordered by peak |rho| descending; equal peaks order by
/// candidate value ascending.
pub fn rank_candidates(surface: &CorrelationSurface) -> Vec<CandidateRank> {
    let mut ranked: Vec<CandidateRank> = (0..=255u8)
        .map(|c| {
            let (peak_abs_rho, peak_sample) = surface.candidate_peak(c);
            CandidateRank {
                value: c,
                peak_abs_rho,
                peak_sample,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.peak_abs_rho
            .total_cmp(&a.peak_abs_rho)
            .then(a.value.cmp(&b.value))
    });
    ranked
}

#[derive(Clone, Debug, Default)]
pub struct AttackOptions {
    /// Band filters applied to the whole set, in order, before correlating.
    pub filters: Vec<BandSpec>,
    /// Ranked candidates retained per byte in the report (0 = default of 5).
    pub top_k: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ByteAttackOutcome {
    pub byte_index: u8,
    pub recovered: u8,
    pub peak_abs_rho: f64,
    pub peak_sample: usize,
    /// Peak over runner-up peak; absent when the runner-up peak is zero.
    pub margin: Option<f64>,
    pub confident: bool,
    /// Set when the set carries its true key.
    pub correct: Option<bool>,
    pub ranked: Vec<CandidateRank>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub traces: usize,
    pub samples_per_trace: usize,
    pub confidence_threshold: f64,
    pub filters: Vec<BandSpec>,
    pub bytes: Vec<ByteAttackOutcome>,
    pub recovered_bytes: Vec<u8>,
    /// The recovered round-1 key as 16 hex characters.
    pub recovered_k1_hex: String,
    pub all_bytes_confident: bool,
    /// Set when the set carries its true key: true iff all eight bytes match.
    pub all_bytes_correct: Option<bool>,
}

/// Recovers the eight round-1 key bytes of the set's cipher by correlation.
pub fn attack_key(set: &TraceSet, options: &AttackOptions) -> Result<AttackReport> {
    if set.len() < 2 {
        return Err(Error::Input("an attack needs at least two traces".into()));
    }
    let filtered_set;
    let working: &TraceSet = if options.filters.is_empty() {
        set
    } else {
        let mut fs = band_filter(set, &options.filters[0])?;
        for band in &options.filters[1..] {
            fs = band_filter(&fs, band)?;
        }
        filtered_set = fs;
        &filtered_set
    };
    let top_k = if options.top_k == 0 { 5 } else { options.top_k };
    let threshold = NOISE_FLOOR_SIGMA / (set.len() as f64).sqrt();
    let plaintexts = working.plaintexts();
    let true_key = working.key();

    let mut bytes = Vec::with_capacity(8);
    let mut recovered_bytes = Vec::with_capacity(8);
    for idx in ByteIndex::all() {
        let m = hypothesis_matrix(&plaintexts, idx);
        let surface = correlation_surface(&m, working)?;
        let ranked = rank_candidates(&surface);
        let best = ranked[0];
        let runner_up = ranked[1].peak_abs_rho;
        let margin = (runner_up > 0.0).then(|| best.peak_abs_rho / runner_up);
        let clears_floor = best.peak_abs_rho > threshold && !surface.hypothesis_is_constant();
        let confident = clears_floor && margin.map_or(true, |m| m >= CONFIDENCE_MARGIN_MIN);
        let correct = true_key.map(|k| k.bytes()[idx.offset()] == best.value);
        recovered_bytes.push(best.value);
        bytes.push(ByteAttackOutcome {
            byte_index: idx.get(),
            recovered: best.value,
            peak_abs_rho: best.peak_abs_rho,
            peak_sample: best.peak_sample,
            margin,
            confident,
            correct,
            ranked: ranked.into_iter().take(top_k).collect(),
        });
    }
    let k1 = Block64::from_bytes(recovered_bytes.clone().try_into().unwrap());
    Ok(AttackReport {
        traces: set.len(),
        samples_per_trace: set.samples_per_trace(),
        confidence_threshold: threshold,
        filters: options.filters.clone(),
        all_bytes_confident: bytes.iter().all(|b| b.confident),
        all_bytes_correct: true_key.map(|_| bytes.iter().all(|b| b.correct == Some(true))),
        bytes,
        recovered_bytes,
        recovered_k1_hex: k1.to_hex(),
    })
}

/// The four key fill patterns used for success-rate sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPattern {
    AllZeros,
    ZeroOne,
    OneZero,
    AllOnes,
}

impl KeyPattern {
    pub const ALL: [KeyPattern; 4] = [
        KeyPattern::AllZeros,
        KeyPattern::ZeroOne,
        KeyPattern::OneZero,
        KeyPattern::AllOnes,
    ];

    /// The byte repeated through all ten key positions.
    pub fn byte(self) -> u8 {
        match self {
            KeyPattern::AllZeros => 0x00,
            KeyPattern::ZeroOne => 0x55,
            KeyPattern::OneZero => 0xAA,
            KeyPattern::AllOnes => 0xFF,
        }
    }

    pub fn key(self) -> Key80 {
        Key80::splat(self.byte())
    }
}

impl std::str::FromStr for KeyPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().trim_end_matches(['b', 'B']).to_ascii_lowercase();
        match norm.as_str() {
            "00" | "0x00" | "00000000" | "zeros" => Ok(KeyPattern::AllZeros),
            "55" | "0x55" | "01010101" => Ok(KeyPattern::ZeroOne),
            "aa" | "0xaa" | "10101010" => Ok(KeyPattern::OneZero),
            "ff" | "0xff" | "11111111" | "ones" => Ok(KeyPattern::AllOnes),
            _ => Err(Error::Input(format!(
                "unknown key pattern {s:?}; expected 00, 55, aa, ff or their 8-bit forms"
            ))),
        }
    }
}

impl std::fmt::Display for KeyPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let bits = match self {
            KeyPattern::AllZeros => "00000000b",
            KeyPattern::ZeroOne => "01010101b",
            KeyPattern::OneZero => "10101010b",
            KeyPattern::AllOnes => "11111111b",
        };
        f.write_str(bits)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SrReport {
    pub pattern: KeyPattern,
    pub runs: usize,
    pub traces_per_run: usize,
    pub noise_sigma: f64,
    pub gain: f64,
    pub seed: u64,
    /// Fraction of runs in which each byte ranked first, leftmost byte first.
    pub per_byte_success: Vec<f64>,
    /// Fraction of runs in which all eight bytes ranked first at once.
    pub full_key_success: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Runs `runs` independent synthesize-and-attack rounds against a key filled
/// with `pattern` and tallies rank-1 recovery. Deterministic in `cfg.seed`:
/// run `r` uses a seed derived from `(cfg.seed, r)`.
pub fn success_rate(
    pattern: KeyPattern,
    runs: usize,
    traces_per_run: usize,
    cfg: &SynthConfig,
) -> Result<SrReport> {
    if runs == 0 {
        return Err(Error::Config("success rate needs at least one run".into()));
    }
    if traces_per_run < 2 {
        return Err(Error::Config("success rate needs at least two traces per run".into()));
    }
    let key = pattern.key();
    let mut byte_hits = [0usize; 8];
    let mut full_hits = 0usize;
    for r in 0..runs {
        let run_cfg = SynthConfig {
            seed: splitmix64(cfg.seed.wrapping_add(r as u64)),
            ..cfg.clone()
        };
        let set = synthesize_set(traces_per_run, key, &run_cfg)?;
        let report = attack_key(&set, &AttackOptions::default())?;
        let mut all = true;
        for (i, outcome) in report.bytes.iter().enumerate() {
            if outcome.recovered == key.bytes()[i] {
                byte_hits[i] += 1;
            } else {
                all = false;
            }
        }
        if all {
            full_hits += 1;
        }
    }
    Ok(SrReport {
        pattern,
        runs,
        traces_per_run,
        noise_sigma: cfg.noise_sigma,
        gain: cfg.gain,
        seed: cfg.seed,
        per_byte_success: byte_hits.iter().map(|&h| h as f64 / runs as f64).collect(),
        full_key_success: full_hits as f64 / runs as f64,
    })
}
