//! PRESENT-80: 64-bit block, 80-bit key, 31 substitution-permutation rounds
//! followed by a final round-key addition.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// The 4-bit substitution box.
pub const SBOX: [u8; 16] = [
    0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2,
];

/// Inverse of [`SBOX`].
pub const SBOX_INV: [u8; 16] = [
    0x5, 0xE, 0xF, 0x8, 0xC, 0x1, 0x2, 0xD, 0xB, 0x4, 0x6, 0x3, 0x0, 0x7, 0x9, 0xA,
];

const fn sbox_byte_table(s: [u8; 16]) -> [u8; 256] {
    let mut t = [0u8; 256];
    let mut v = 0;
    while v < 256 {
        t[v] = (s[v >> 4] << 4) | s[v & 0xF];
        v += 1;
    }
    t
}

const SBOX_BYTE: [u8; 256] = sbox_byte_table(SBOX);
const SBOX_INV_BYTE: [u8; 256] = sbox_byte_table(SBOX_INV);

/// Bit permutation: bit `i` moves to `16 * i mod 63`, bit 63 stays.
const fn permute_bit(i: usize) -> usize {
    if i == 63 {
        63
    } else {
        (16 * i) % 63
    }
}

/// Inverse permutation: 16 * 4 = 64 ≡ 1 (mod 63).
const fn permute_bit_inv(i: usize) -> usize {
    if i == 63 {
        63
    } else {
        (4 * i) % 63
    }
}

type ByteLut = [[u64; 256]; 8];

const fn build_permutation_lut(inverse: bool) -> ByteLut {
    let mut lut = [[0u64; 256]; 8];
    let mut byte_pos = 0;
    while byte_pos < 8 {
        let mut v = 0;
        while v < 256 {
            let mut acc = 0u64;
            let mut bit = 0;
            while bit < 8 {
                if (v >> bit) & 1 == 1 {
                    let src = byte_pos * 8 + bit;
                    let dst = if inverse { permute_bit_inv(src) } else { permute_bit(src) };
                    acc |= 1u64 << dst;
                }
                bit += 1;
            }
            lut[byte_pos][v] = acc;
            v += 1;
        }
        byte_pos += 1;
    }
    lut
}

const P_LUT: ByteLut = build_permutation_lut(false);
const P_INV_LUT: ByteLut = build_permutation_lut(true);

const KEY_MASK: u128 = (1 << 80) - 1;

fn parse_hex<const N: usize>(s: &str, what: &str) -> Result<[u8; N]> {
    if s.len() != 2 * N || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::Input(format!(
            "{what} must be exactly {} hex characters, got {:?}",
            2 * N,
            s
        )));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out)
        .map_err(|e| Error::Input(format!("{what}: {e}")))?;
    Ok(out)
}

/// One 64-bit cipher state or block, most-significant bit leftmost.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Block64(u64);

impl Block64 {
    pub const fn new(v: u64) -> Self {
        Block64(v)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Big-endian bytes: `bytes()[0]` is the block's byte 1 (bits 63..56).
    pub const fn bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }

    pub const fn from_bytes(b: [u8; 8]) -> Self {
        Block64(u64::from_be_bytes(b))
    }

    /// Parses exactly 16 hex characters, most significant first.
    pub fn from_hex(s: &str) -> Result<Self> {
        Ok(Self::from_bytes(parse_hex::<8>(s, "block")?))
    }

    /// 16 uppercase hex characters.
    pub fn to_hex(self) -> String {
        format!("{:016X}", self.0)
    }
}

impl fmt::Debug for Block64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block64({:016X})", self.0)
    }
}

impl fmt::Display for Block64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016X}", self.0)
    }
}

impl Serialize for Block64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Block64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Block64::from_hex(&s).map_err(de::Error::custom)
    }
}

/// An 80-bit key, stored as ten big-endian bytes (`bytes()[0]` = bits 79..72).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Key80([u8; 10]);

impl Key80 {
    pub const fn new(bytes: [u8; 10]) -> Self {
        Key80(bytes)
    }

    pub const fn bytes(self) -> [u8; 10] {
        self.0
    }

    /// Parses exactly 20 hex characters, most significant first.
    pub fn from_hex(s: &str) -> Result<Self> {
        Ok(Key80(parse_hex::<10>(s, "key")?))
    }

    /// 20 uppercase hex characters.
    pub fn to_hex(self) -> String {
        self.0.iter().map(|b| format!("{b:02X}")).collect()
    }

    /// All ten bytes set to the same value.
    pub const fn splat(byte: u8) -> Self {
        Key80([byte; 10])
    }

    pub(crate) const fn as_u128(self) -> u128 {
        let mut v = 0u128;
        let mut i = 0;
        while i < 10 {
            v = (v << 8) | self.0[i] as u128;
            i += 1;
        }
        v
    }
}

impl fmt::Debug for Key80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key80({})", self.to_hex())
    }
}

impl fmt::Display for Key80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Key80 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Key80 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Key80::from_hex(&s).map_err(de::Error::custom)
    }
}

/// All 32 round keys; `round_key(1)` is XORed before round 1, `round_key(32)`
/// after the last substitution-permutation round.
#[derive(Clone, Copy, Debug)]
pub struct RoundKeySchedule {
    keys: [u64; 32],
}

impl RoundKeySchedule {
    /// `i` is 1-based, matching the usual K1..K32 naming.
    pub fn round_key(&self, i: usize) -> Block64 {
        assert!((1..=32).contains(&i), "round key index {i} out of 1..=32");
        Block64(self.keys[i - 1])
    }

    pub fn iter(&self) -> impl Iterator<Item = Block64> + '_ {
        self.keys.iter().map(|&k| Block64(k))
    }
}

/// Substitution on a single 4-bit value.
pub fn sbox(x: u8) -> u8 {
    SBOX[x as usize]
}

/// Inverse substitution on a single 4-bit value.
pub fn sbox_inv(x: u8) -> u8 {
    SBOX_INV[x as usize]
}

/// Applies the S-box to all sixteen nibbles.
pub fn sbox_layer(state: Block64) -> Block64 {
    let mut b = state.0.to_le_bytes();
    for byte in &mut b {
        *byte = SBOX_BYTE[*byte as usize];
    }
    Block64(u64::from_le_bytes(b))
}

/// Inverse of [`sbox_layer`].
pub fn sbox_layer_inv(state: Block64) -> Block64 {
    let mut b = state.0.to_le_bytes();
    for byte in &mut b {
        *byte = SBOX_INV_BYTE[*byte as usize];
    }
    Block64(u64::from_le_bytes(b))
}

fn apply_lut(state: u64, lut: &ByteLut) -> u64 {
    let mut out = 0u64;
    for (i, table) in lut.iter().enumerate() {
        out |= table[((state >> (8 * i)) & 0xFF) as usize];
    }
    out
}

/// The bit permutation layer.
pub fn p_layer(state: Block64) -> Block64 {
    Block64(apply_lut(state.0, &P_LUT))
}

/// Inverse of [`p_layer`].
pub fn p_layer_inv(state: Block64) -> Block64 {
    Block64(apply_lut(state.0, &P_INV_LUT))
}

/// Expands the key: K1 is the register's leftmost 64 bits; each update rotates
/// the register left by 61, substitutes the top nibble and XORs the round
/// counter into bits 19..15.
pub fn key_schedule(key: Key80) -> RoundKeySchedule {
    let mut reg = key.as_u128();
    let mut keys = [0u64; 32];
    keys[0] = (reg >> 16) as u64;
    for (i, slot) in keys.iter_mut().enumerate().skip(1) {
        reg = ((reg << 61) | (reg >> 19)) & KEY_MASK;
        let top = ((reg >> 76) & 0xF) as usize;
        reg = (reg & !(0xF << 76)) | ((SBOX[top] as u128) << 76);
        reg ^= (i as u128) << 15;
        *slot = (reg >> 16) as u64;
    }
    RoundKeySchedule { keys }
}

fn encrypt_with(pt: Block64, ks: &RoundKeySchedule) -> Block64 {
    let mut s = pt.0;
    for rk in &ks.keys[..31] {
        s ^= rk;
        s = sbox_layer(Block64(s)).0;
        s = apply_lut(s, &P_LUT);
    }
    Block64(s ^ ks.keys[31])
}

pub fn encrypt(pt: Block64, key: Key80) -> Block64 {
    encrypt_with(pt, &key_schedule(key))
}

pub fn decrypt(ct: Block64, key: Key80) -> Block64 {
    let ks = key_schedule(key);
    let mut s = ct.0 ^ ks.keys[31];
    for rk in ks.keys[..31].iter().rev() {
        s = apply_lut(s, &P_INV_LUT);
        s = sbox_layer_inv(Block64(s)).0;
        s ^= rk;
    }
    Block64(s)
}

/// Fast path for [`encrypt`] when one key is reused many times.
pub fn encrypt_scheduled(pt: Block64, ks: &RoundKeySchedule) -> Block64 {
    encrypt_with(pt, ks)
}

/// The sixteen S-box outputs of round 1: `sbox_layer(pt XOR K1)`.
///
/// This is the intermediate the leakage model targets; it involves only the
/// key's leftmost 64 bits, which is why bytes 9 and 10 stay out of reach of a
/// round-1 attack.
pub fn round1_sbox_state(pt: Block64, key: Key80) -> Block64 {
    let k1 = (key.as_u128() >> 16) as u64;
    sbox_layer(Block64(pt.0 ^ k1))
}
