//! Exhaustive completion of the last two key bytes.
//!
//! The correlation attack only reaches the eight key bytes that enter round 1;
//! bytes 9 and 10 never touch the first round's S-boxes. With the first eight
//! bytes fixed there are 2^16 full keys left, few enough to try them all
//! against one or more known plaintext/ciphertext pairs.

use serde::Serialize;

use crate::cipher::{encrypt, Block64, Key80};
use crate::{Error, Result};

/// The eight leading key bytes recovered by correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartialKey([u8; 8]);

impl PartialKey {
    pub const fn new(bytes: [u8; 8]) -> Self {
        PartialKey(bytes)
    }

    /// Parses exactly 16 hex digits, leftmost key byte first.
    pub fn from_hex(s: &str) -> Result<Self> {
        Ok(PartialKey(Block64::from_hex(s)?.bytes()))
    }

    pub const fn bytes(self) -> [u8; 8] {
        self.0
    }

    /// The full key with `tail` in byte positions 9 and 10.
    pub fn with_tail(self, tail: u16) -> Key80 {
        let t = tail.to_be_bytes();
        let b = self.0;
        Key80::new([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7], t[0], t[1]])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "keys", rename_all = "snake_case")]
pub enum BfaOutcome {
    /// Exactly one tail reproduced every pair.
    Found(Key80),
    /// Several tails survived; more pairs are needed to separate them.
    Ambiguous(Vec<Key80>),
    /// No tail matched: the partial key or the pairs are wrong.
    NotFound,
}

#[derive(Clone, Debug, Serialize)]
pub struct BfaReport {
    pub outcome: BfaOutcome,
    /// Candidate tails tried; the scan is exhaustive, so this is always 65536.
    pub trials: usize,
}

/// A plaintext and its ciphertext under the key being recovered.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KnownPair {
    pub plaintext: Block64,
    pub ciphertext: Block64,
}

impl KnownPair {
    pub fn matches(&self, key: Key80) -> bool {
        encrypt(self.plaintext, key) == self.ciphertext
    }
}

/// Scans all 65536 tails and keeps those consistent with every pair.
pub fn complete_key(partial: PartialKey, pairs: &[KnownPair]) -> Result<BfaReport> {
    if pairs.is_empty() {
        return Err(Error::Input(
            "key completion needs at least one plaintext/ciphertext pair".into(),
        ));
    }
    let survivors = scan(partial, pairs);
    let outcome = match survivors.len() {
        0 => BfaOutcome::NotFound,
        1 => BfaOutcome::Found(survivors[0]),
        _ => BfaOutcome::Ambiguous(survivors),
    };
    Ok(BfaReport {
        outcome,
        trials: 1 << 16,
    })
}

#[cfg(feature = "parallel")]
fn scan(partial: PartialKey, pairs: &[KnownPair]) -> Vec<Key80> {
    use rayon::prelude::*;
    let mut survivors: Vec<(u16, Key80)> = (0u32..1 << 16)
        .into_par_iter()
        .filter_map(|tail| {
            let key = partial.with_tail(tail as u16);
            pairs
                .iter()
                .all(|p| p.matches(key))
                .then_some((tail as u16, key))
        })
        .collect();
    survivors.sort_by_key(|&(tail, _)| tail);
    survivors.into_iter().map(|(_, key)| key).collect()
}

#[cfg(not(feature = "parallel"))]
fn scan(partial: PartialKey, pairs: &[KnownPair]) -> Vec<Key80> {
    (0u32..1 << 16)
        .filter_map(|tail| {
            let key = partial.with_tail(tail as u16);
            pairs.iter().all(|p| p.matches(key)).then_some(key)
        })
        .collect()
}
