//! Hamming-weight leakage model over the round-1 S-box output.
//!
//! The emitted EM amplitude is modelled as `gain * HW(intermediate) + noise`:
//! radiation tracks the number of active bit lines, so guessing one key byte
//! means predicting the weight of one S-box output byte per trace.

use serde::{Deserialize, Serialize};

use crate::cipher::{sbox, Block64};
use crate::{Error, Result};

/// Number of set bits in the low `width` bits of `v`.
///
/// Precondition: `1 <= width <= 64` and `v < 2^width`.
pub fn hamming_weight(v: u64, width: u32) -> u32 {
    assert!((1..=64).contains(&width), "width {width} out of 1..=64");
    assert!(
        width == 64 || v < (1u64 << width),
        "value {v:#X} does not fit in {width} bits"
    );
    v.count_ones()
}

/// Applies the S-box independently to both nibbles of a byte.
pub fn sbox_pair(v: u8) -> u8 {
    (sbox(v >> 4) << 4) | sbox(v & 0xF)
}

/// The round-1 S-box output byte under key-byte guess `candidate`:
/// `S(hi) || S(lo)` of `pt_byte XOR candidate`.
pub fn predict_intermediate(pt_byte: u8, candidate: u8) -> u8 {
    sbox_pair(pt_byte ^ candidate)
}

/// Expected emission amplitude for one intermediate value.
pub fn leakage_energy(intermediate: u8, gain: f64, noise_baseline: f64) -> f64 {
    gain * f64::from(intermediate.count_ones()) + noise_baseline
}

/// A key-byte position within the round-1 key, 1 (leftmost) through 8.
///
/// Positions 9 and 10 exist in the full 80-bit key but are outside the
/// round-1 key, so no round-1 hypothesis can be formed for them; this type
/// makes such a request unrepresentable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ByteIndex(u8);

impl ByteIndex {
    pub fn new(i: u8) -> Result<Self> {
        if (1..=8).contains(&i) {
            Ok(ByteIndex(i))
        } else {
            Err(Error::Input(format!(
                "byte index {i} out of 1..=8: only the eight round-1 key bytes admit a hypothesis"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based offset into a block's big-endian byte array.
    pub fn offset(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn all() -> impl Iterator<Item = ByteIndex> {
        (1..=8).map(ByteIndex)
    }
}

/// Predicted Hamming weights for all 256 candidates of one key byte:
/// `row(c)[t]` is the weight (0..=8) predicted for trace `t` if the key byte
/// were `c`.
#[derive(Clone, Debug)]
pub struct HypothesisMatrix {
    byte_index: ByteIndex,
    traces: usize,
    data: Vec<u8>,
    pt_bytes: Vec<u8>,
}

impl HypothesisMatrix {
    pub fn byte_index(&self) -> ByteIndex {
        self.byte_index
    }

    pub fn traces(&self) -> usize {
        self.traces
    }

    pub fn row(&self, candidate: u8) -> &[u8] {
        let c = candidate as usize;
        &self.data[c * self.traces..(c + 1) * self.traces]
    }

    pub fn rows(&self) -> impl Iterator<Item = (u8, &[u8])> {
        self.data
            .chunks_exact(self.traces.max(1))
            .enumerate()
            .map(|(c, row)| (c as u8, row))
    }

    /// The plaintext byte each column was derived from.
    pub(crate) fn pt_bytes(&self) -> &[u8] {
        &self.pt_bytes
    }
}

/// Builds the 256-candidate hypothesis matrix for one key-byte position.
pub fn hypothesis_matrix(plaintexts: &[Block64], byte_index: ByteIndex) -> HypothesisMatrix {
    let mut weight = [0u8; 256];
    for (v, w) in weight.iter_mut().enumerate() {
        *w = sbox_pair(v as u8).count_ones() as u8;
    }
    let pt_bytes: Vec<u8> = plaintexts
        .iter()
        .map(|pt| pt.bytes()[byte_index.offset()])
        .collect();
    let traces = pt_bytes.len();
    let mut data = vec![0u8; 256 * traces];
    for c in 0..256usize {
        let row = &mut data[c * traces..(c + 1) * traces];
        for (slot, &b) in row.iter_mut().zip(&pt_bytes) {
            *slot = weight[(b ^ c as u8) as usize];
        }
    }
    HypothesisMatrix {
        byte_index,
        traces,
        data,
        pt_bytes,
    }
}
