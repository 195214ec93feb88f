//! EMTS v1, the on-disk trace container.
//!
//! Layout (all integer/float fields little-endian; block and key fields are
//! raw byte strings, leftmost byte first):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EMTS"
//!      4     2  version (= 1)
//!      6     2  flags: bit 0 = key present, bit 1 = ciphertexts present
//!      8     4  trace count (> 0)
//!     12     4  samples per trace (> 0)
//!     16     8  sample rate in Hz (f64)
//!     24    10  key bytes (zero-filled when the key flag is clear)
//! ```
//!
//! followed by one record per trace: 8 plaintext bytes, 8 ciphertext bytes
//! (zero-filled when the flag is clear), then `samples_per_trace` f32 samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cipher::{Block64, Key80};
use crate::trace::{Trace, TraceSet};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EMTS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 34;

const FLAG_KEY: u16 = 1 << 0;
const FLAG_CIPHERTEXT: u16 = 1 << 1;

/// Exact encoded size of a set with the given shape.
pub fn expected_size(trace_count: u64, samples_per_trace: u64) -> u64 {
    HEADER_LEN + trace_count * (16 + 4 * samples_per_trace)
}

/// Serializes a set; returns the number of bytes written.
pub fn write_trace_set(set: &TraceSet, w: &mut impl Write) -> Result<u64> {
    let mut flags = 0u16;
    if set.key().is_some() {
        flags |= FLAG_KEY;
    }
    if set.has_ciphertexts() {
        flags |= FLAG_CIPHERTEXT;
    }
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(set.len() as u32).to_le_bytes())?;
    w.write_all(&(set.samples_per_trace() as u32).to_le_bytes())?;
    w.write_all(&set.sample_rate_hz().to_le_bytes())?;
    w.write_all(&set.key().unwrap_or_default().bytes())?;

    let mut record = Vec::with_capacity(16 + 4 * set.samples_per_trace());
    for trace in set.traces() {
        record.clear();
        record.extend_from_slice(&trace.plaintext.bytes());
        record.extend_from_slice(&trace.ciphertext.unwrap_or_default().bytes());
        for &s in &trace.samples {
            record.extend_from_slice(&s.to_le_bytes());
        }
        w.write_all(&record)?;
    }
    Ok(expected_size(set.len() as u64, set.samples_per_trace() as u64))
}

pub fn write_trace_set_path(set: &TraceSet, path: impl AsRef<Path>) -> Result<u64> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_trace_set(set, &mut w)?;
    w.flush()?;
    Ok(n)
}

struct CountingReader<R> {
    inner: R,
    read: u64,
}

impl<R: Read> CountingReader<R> {
    /// Fills `buf` or reports truncation against the caller's total expectation.
    fn read_exact_or_truncated(&mut self, buf: &mut [u8], expected_total: u64) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(Error::Truncated {
                        expected: expected_total,
                        actual: self.read + filled as u64,
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.read += buf.len() as u64;
        Ok(())
    }
}

/// Deserializes a set, validating the container and every sample.
pub fn read_trace_set(r: &mut impl Read) -> Result<TraceSet> {
    let mut r = CountingReader { inner: r, read: 0 };

    let mut magic = [0u8; 4];
    r.read_exact_or_truncated(&mut magic, HEADER_LEN)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02X?}, expected \"EMTS\"",
            magic
        )));
    }
    let mut u16buf = [0u8; 2];
    r.read_exact_or_truncated(&mut u16buf, HEADER_LEN)?;
    let version = u16::from_le_bytes(u16buf);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    r.read_exact_or_truncated(&mut u16buf, HEADER_LEN)?;
    let flags = u16::from_le_bytes(u16buf);
    let mut u32buf = [0u8; 4];
    r.read_exact_or_truncated(&mut u32buf, HEADER_LEN)?;
    let trace_count = u32::from_le_bytes(u32buf);
    r.read_exact_or_truncated(&mut u32buf, HEADER_LEN)?;
    let samples_per_trace = u32::from_le_bytes(u32buf);
    let mut u64buf = [0u8; 8];
    r.read_exact_or_truncated(&mut u64buf, HEADER_LEN)?;
    let sample_rate_hz = f64::from_le_bytes(u64buf);
    let mut key_bytes = [0u8; 10];
    r.read_exact_or_truncated(&mut key_bytes, HEADER_LEN)?;

    if trace_count == 0 {
        return Err(Error::Format("trace count is zero".into()));
    }
    if samples_per_trace == 0 {
        return Err(Error::Format("samples per trace is zero".into()));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::Format(format!(
            "sample rate must be finite and positive, got {sample_rate_hz}"
        )));
    }

    let total = expected_size(u64::from(trace_count), u64::from(samples_per_trace));
    let key = (flags & FLAG_KEY != 0).then(|| Key80::new(key_bytes));
    let with_ct = flags & FLAG_CIPHERTEXT != 0;

    let mut traces = Vec::with_capacity(trace_count as usize);
    let mut block = [0u8; 8];
    let mut sample_bytes = vec![0u8; 4 * samples_per_trace as usize];
    for t in 0..trace_count as usize {
        r.read_exact_or_truncated(&mut block, total)?;
        let plaintext = Block64::from_bytes(block);
        r.read_exact_or_truncated(&mut block, total)?;
        let ciphertext = with_ct.then(|| Block64::from_bytes(block));
        r.read_exact_or_truncated(&mut sample_bytes, total)?;
        let mut samples = Vec::with_capacity(samples_per_trace as usize);
        for chunk in sample_bytes.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { trace: t });
            }
            samples.push(v);
        }
        traces.push(Trace {
            plaintext,
            ciphertext,
            samples,
        });
    }
    TraceSet::new(traces, sample_rate_hz, key)
}

/// Reads a file, additionally rejecting trailing garbage after the last record.
pub fn read_trace_set_path(path: impl AsRef<Path>) -> Result<TraceSet> {
    let file = File::open(&path)?;
    let actual = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let set = read_trace_set(&mut r)?;
    let expected = expected_size(set.len() as u64, set.samples_per_trace() as u64);
    if actual != expected {
        return Err(Error::Truncated { expected, actual });
    }
    Ok(set)
}
