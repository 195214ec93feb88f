//! EM side-channel analysis toolkit for the PRESENT-80 block cipher.
//!
//! The crate covers the full desk-scale workflow: synthesizing EM traces with a
//! Hamming-weight leakage model, storing them in a compact binary format,
//! inspecting them in time and frequency domain (SEMA / SEMFA), recovering the
//! first eight key bytes by Pearson correlation against round-1 S-box
//! hypotheses, and brute-forcing the remaining 16 key bits.

pub mod bfa;
pub mod cema;
pub mod cipher;
pub mod dsp;
pub mod emts;
mod error;
pub mod leakage;
pub mod sema;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
