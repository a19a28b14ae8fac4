//! Two-bit superdense alphabet: classical messages ↔ encoding operators ↔
//! Bell classes observed by the receiver.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::quantum::{
    apply_pauli, bell_distribution, bell_state, BellKind, Half, PauliOp, TOLERANCE,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("odd payload")]
    OddPayload,
    #[error("invalid bit pair {0:?}")]
    InvalidBitPair(String),
    #[error("invalid bit string: {0}")]
    InvalidBitString(String),
}

/// A two-bit message symbol, written high bit first (`"10"` is hi=1, lo=0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPair {
    pub hi: bool,
    pub lo: bool,
}

impl BitPair {
    pub const ALL: [BitPair; 4] = [
        BitPair::new(true, true),
        BitPair::new(true, false),
        BitPair::new(false, true),
        BitPair::new(false, false),
    ];

    pub const fn new(hi: bool, lo: bool) -> Self {
        BitPair { hi, lo }
    }

    pub fn bits(self) -> [bool; 2] {
        [self.hi, self.lo]
    }
}

impl fmt::Display for BitPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.hi as u8, self.lo as u8)
    }
}

impl FromStr for BitPair {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "11" => Ok(BitPair::new(true, true)),
            "10" => Ok(BitPair::new(true, false)),
            "01" => Ok(BitPair::new(false, true)),
            "00" => Ok(BitPair::new(false, false)),
            _ => Err(CodecError::InvalidBitPair(s.to_string())),
        }
    }
}

impl Serialize for BitPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitPair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn encode(message: BitPair) -> PauliOp {
    match (message.hi, message.lo) {
        (true, true) => PauliOp::I,
        (true, false) => PauliOp::X,
        (false, true) => PauliOp::Z,
        (false, false) => PauliOp::ZX,
    }
}

// Hand-transcribed inverse; checked against `derived_decode_table` on first use.
fn decode_literal(outcome: BellKind) -> BitPair {
    match outcome {
        BellKind::PsiMinus => BitPair::new(true, true),
        BellKind::PhiMinus => BitPair::new(true, false),
        BellKind::PsiPlus => BitPair::new(false, true),
        BellKind::PhiPlus => BitPair::new(false, false),
    }
}

/// Bell class produced by applying `op` to one half of a singlet.
///
/// Panics if the result is not a Bell basis state, which cannot happen for
/// a Pauli operator.
pub fn classify_encoded(op: PauliOp, target: Half) -> BellKind {
    let encoded = apply_pauli(&bell_state(BellKind::PsiMinus), target, op);
    let dist = bell_distribution(&encoded);
    BellKind::ALL
        .into_iter()
        .find(|k| (dist[k.index()] - 1.0).abs() < TOLERANCE)
        .expect("Pauli image of the singlet must be a Bell state")
}

/// The decode table recomputed from the physics: for each Bell class, the
/// message whose operator maps the singlet onto it.
pub fn derived_decode_table() -> [BitPair; 4] {
    let mut table = [None; 4];
    for message in BitPair::ALL {
        let kind = classify_encoded(encode(message), Half::Retained);
        assert!(table[kind.index()].is_none(), "two messages map to {kind}");
        table[kind.index()] = Some(message);
    }
    table.map(|m| m.expect("encoding is onto the Bell basis"))
}

fn decode_table() -> &'static [BitPair; 4] {
    static TABLE: OnceLock<[BitPair; 4]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let derived = derived_decode_table();
        for kind in BellKind::ALL {
            assert_eq!(
                derived[kind.index()],
                decode_literal(kind),
                "decode table disagrees with operator algebra for {kind}"
            );
        }
        derived
    })
}

pub fn decode(outcome: BellKind) -> BitPair {
    decode_table()[outcome.index()]
}

/// Whether an odd-length payload may be padded with a trailing zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Strict,
    PadWithZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedPayload {
    pub pairs: Vec<BitPair>,
    /// Number of trailing pad bits appended (0 or 1).
    pub pad_len: usize,
}

pub fn pack_bits(payload: &[bool], padding: Padding) -> Result<PackedPayload, CodecError> {
    let pad_len = payload.len() % 2;
    if pad_len == 1 && padding == Padding::Strict {
        return Err(CodecError::OddPayload);
    }
    let pairs = payload
        .chunks(2)
        .map(|c| BitPair::new(c[0], c.get(1).copied().unwrap_or(false)))
        .collect();
    Ok(PackedPayload { pairs, pad_len })
}

pub fn unpack_bits(packed: &PackedPayload) -> Vec<bool> {
    let mut bits: Vec<bool> = packed.pairs.iter().flat_map(|p| p.bits()).collect();
    bits.truncate(bits.len().saturating_sub(packed.pad_len));
    bits
}

/// Parses `"1001"` style strings.
pub fn parse_bit_string(s: &str) -> Result<Vec<bool>, CodecError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CodecError::InvalidBitString(format!(
                "unexpected character {other:?}"
            ))),
        })
        .collect()
}

pub fn render_pairs(pairs: &[BitPair]) -> String {
    pairs.iter().map(BitPair::to_string).collect()
}
