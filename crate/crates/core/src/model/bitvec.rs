// SPDX-License-Identifier: Apache-2.0
//! Fixed-width unsigned bit vectors and the four-state X marker.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Widest port the pipeline handles.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitVecError {
    #[error("width {0} is outside 1..={MAX_WIDTH}")]
    BadWidth(u32),
    #[error("value {value:#x} does not fit in {width} bits")]
    Overflow { value: u128, width: u32 },
    #[error("malformed bit-vector text `{0}`")]
    Malformed(String),
    /// The text carried an `x` or `z` digit.
    #[error("unknown (x/z) value")]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    width: u32,
    value: u64,
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u32) -> Result<(), BitVecError> {
    if width == 0 || width > MAX_WIDTH {
        Err(BitVecError::BadWidth(width))
    } else {
        Ok(())
    }
}

impl BitVec {
    pub fn new(width: u32, value: u64) -> Result<Self, BitVecError> {
        check_width(width)?;
        if value & !mask(width) != 0 {
            return Err(BitVecError::Overflow {
                value: value as u128,
                width,
            });
        }
        Ok(Self { width, value })
    }

    pub fn zero(width: u32) -> Result<Self, BitVecError> {
        Self::new(width, 0)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Flips one bit; `bit` must be below the width.
    pub fn flip_bit(&self, bit: u32) -> Self {
        assert!(bit < self.width, "bit {bit} out of range for width {}", self.width);
        Self {
            width: self.width,
            value: self.value ^ (1u64 << bit),
        }
    }

    /// Number of hex digits a simulator prints for this width with `%h`.
    pub fn hex_digits(width: u32) -> usize {
        width.div_ceil(4) as usize
    }

    /// Zero-padded lowercase hex, as `$display("%h")` prints it.
    pub fn to_sim_hex(&self) -> String {
        format!("{:0w$x}", self.value, w = Self::hex_digits(self.width))
    }

    /// Sized Verilog literal, e.g. `4'h3`.
    pub fn to_verilog(&self) -> String {
        format!("{}'h{:x}", self.width, self.value)
    }

    /// Parses `0b…` binary, `0x…` hex, `0d…` decimal, or bare hex as a
    /// simulator prints it with `%h`. Underscores are ignored.
    pub fn parse(text: &str, width: u32) -> Result<Self, BitVecError> {
        check_width(width)?;
        let t = text.trim();
        let cleaned: String = t.chars().filter(|c| *c != '_').collect();
        let lower = cleaned.to_ascii_lowercase();
        if let Some(body) = lower.strip_prefix("0b") {
            return Self::from_radix(body, 2, width, text);
        }
        if let Some(body) = lower.strip_prefix("0x") {
            return Self::from_radix(body, 16, width, text);
        }
        if let Some(body) = lower.strip_prefix("0d") {
            return Self::from_radix(body, 10, width, text);
        }
        Self::from_radix(&lower, 16, width, text)
    }

    /// Parses the digits of a `%h` field (no prefix, always hex).
    pub fn parse_hex(text: &str, width: u32) -> Result<Self, BitVecError> {
        check_width(width)?;
        let lower = text.trim().to_ascii_lowercase();
        let body = lower.strip_prefix("0x").unwrap_or(&lower);
        Self::from_radix(body, 16, width, text)
    }

    fn from_radix(body: &str, radix: u32, width: u32, original: &str) -> Result<Self, BitVecError> {
        if body.is_empty() {
            return Err(BitVecError::Malformed(original.to_string()));
        }
        if body.chars().any(|c| matches!(c, 'x' | 'z' | '?')) {
            // every other char must still be a legal digit
            let legal = body
                .chars()
                .all(|c| matches!(c, 'x' | 'z' | '?') || c.is_digit(radix));
            return if legal {
                Err(BitVecError::Unknown)
            } else {
                Err(BitVecError::Malformed(original.to_string()))
            };
        }
        let mut acc: u128 = 0;
        for c in body.chars() {
            let d = c
                .to_digit(radix)
                .ok_or_else(|| BitVecError::Malformed(original.to_string()))?;
            acc = acc * radix as u128 + d as u128;
            if acc > u64::MAX as u128 {
                return Err(BitVecError::Overflow { value: acc, width });
            }
        }
        if acc > mask(width) as u128 {
            return Err(BitVecError::Overflow { value: acc, width });
        }
        Ok(Self {
            width,
            value: acc as u64,
        })
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_verilog())
    }
}

/// `0x`-prefixed hex text that [`parse_bitvec`] reads back losslessly.
pub fn format_bitvec(bv: &BitVec) -> String {
    format!("0x{:x}", bv.value)
}

/// A sampled signal value: known bits or the X-state marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Logic {
    Known(BitVec),
    Unknown { width: u32 },
}

impl Logic {
    pub fn width(&self) -> u32 {
        match self {
            Logic::Known(b) => b.width(),
            Logic::Unknown { width } => *width,
        }
    }

    pub fn known(&self) -> Option<BitVec> {
        match self {
            Logic::Known(b) => Some(*b),
            Logic::Unknown { .. } => None,
        }
    }

    pub fn to_sim_hex(&self) -> String {
        match self {
            Logic::Known(b) => b.to_sim_hex(),
            Logic::Unknown { width } => "x".repeat(BitVec::hex_digits(*width)),
        }
    }

    /// Value as shown to a reader: decimal, or a literal `x`.
    pub fn to_human(&self) -> String {
        match self {
            Logic::Known(b) => b.value().to_string(),
            Logic::Unknown { .. } => "x".to_string(),
        }
    }
}

impl From<BitVec> for Logic {
    fn from(b: BitVec) -> Self {
        Logic::Known(b)
    }
}

/// Parses text to a [`Logic`], mapping any x/z digit to the X marker.
pub fn parse_bitvec(text: &str, width: u32) -> Result<Logic, BitVecError> {
    match BitVec::parse(text, width) {
        Ok(b) => Ok(Logic::Known(b)),
        Err(BitVecError::Unknown) => Ok(Logic::Unknown { width }),
        Err(e) => Err(e),
    }
}

/// Like [`parse_bitvec`] but for `%h` fields.
pub fn parse_sim_hex(text: &str, width: u32) -> Result<Logic, BitVecError> {
    match BitVec::parse_hex(text, width) {
        Ok(b) => Ok(Logic::Known(b)),
        Err(BitVecError::Unknown) => Ok(Logic::Unknown { width }),
        Err(e) => Err(e),
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Logic::Known(b) => write!(f, "{b}"),
            Logic::Unknown { width } => write!(f, "{width}'hx"),
        }
    }
}

fn parse_sized(s: &str) -> Result<Logic, BitVecError> {
    let (w, rest) = s
        .split_once("'h")
        .ok_or_else(|| BitVecError::Malformed(s.to_string()))?;
    let width: u32 = w.parse().map_err(|_| BitVecError::Malformed(s.to_string()))?;
    parse_sim_hex(rest, width)
}

impl FromStr for Logic {
    type Err = BitVecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sized(s)
    }
}

impl FromStr for BitVec {
    type Err = BitVecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sized(s)?.known().ok_or(BitVecError::Unknown)
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

string_serde!(BitVec);
string_serde!(Logic);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_and_all_ones() {
        assert_eq!(BitVec::parse("0", 1).unwrap(), BitVec::new(1, 0).unwrap());
        assert_eq!(BitVec::parse("0xff", 8).unwrap(), BitVec::new(8, 255).unwrap());
        assert_eq!(BitVec::parse("0XFF", 8).unwrap().value(), 255);
    }

    #[test]
    fn bare_hex_and_overflow() {
        // 0x1f = 31 < 32 = 2^5; 0x20 = 32 does not fit
        assert_eq!(BitVec::parse("1f", 5).unwrap(), BitVec::new(5, 31).unwrap());
        assert!(matches!(
            BitVec::parse("20", 5),
            Err(BitVecError::Overflow { value: 32, width: 5 })
        ));
    }

    #[test]
    fn binary_decimal_leading_zeros() {
        assert_eq!(BitVec::parse("0b0101", 4).unwrap().value(), 5);
        assert_eq!(BitVec::parse("0007", 4).unwrap().value(), 7);
        assert_eq!(BitVec::parse("000F", 4).unwrap().value(), 15);
        assert_eq!(BitVec::parse("0d20", 5).unwrap().value(), 20);
        assert_eq!(BitVec::parse("0d18446744073709551615", 64).unwrap().value(), u64::MAX);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(BitVec::parse("", 4), Err(BitVecError::Malformed(_))));
        assert!(matches!(BitVec::parse("0x", 4), Err(BitVecError::Malformed(_))));
        assert!(matches!(BitVec::parse("12g", 8), Err(BitVecError::Malformed(_))));
        assert!(matches!(BitVec::parse("0d1f", 8), Err(BitVecError::Malformed(_))));
        assert!(matches!(BitVec::parse("0b102", 8), Err(BitVecError::Malformed(_))));
        assert!(matches!(BitVec::parse("1", 0), Err(BitVecError::BadWidth(0))));
        assert!(matches!(BitVec::parse("1", 65), Err(BitVecError::BadWidth(65))));
        assert!(matches!(
            BitVec::parse("0d99999999999999999999999", 64),
            Err(BitVecError::Overflow { .. })
        ));
    }

    #[test]
    fn x_and_z_become_marker() {
        assert_eq!(parse_bitvec("x", 1).unwrap(), Logic::Unknown { width: 1 });
        assert_eq!(parse_sim_hex("xX", 8).unwrap(), Logic::Unknown { width: 8 });
        assert_eq!(parse_sim_hex("1z", 8).unwrap(), Logic::Unknown { width: 8 });
        assert_eq!(parse_bitvec("0bx1", 2).unwrap(), Logic::Unknown { width: 2 });
        assert!(matches!(BitVec::parse("x", 4), Err(BitVecError::Unknown)));
    }

    #[test]
    fn sim_hex_padding() {
        assert_eq!(BitVec::new(5, 7).unwrap().to_sim_hex(), "07");
        assert_eq!(BitVec::new(1, 1).unwrap().to_sim_hex(), "1");
        assert_eq!(Logic::Unknown { width: 9 }.to_sim_hex(), "xxx");
        assert_eq!(BitVec::new(64, u64::MAX).unwrap().to_sim_hex(), "ffffffffffffffff");
    }

    #[test]
    fn serde_as_sized_literal() {
        let b = BitVec::new(4, 10).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"4'ha\"");
        let back: BitVec = serde_json::from_str("\"4'ha\"").unwrap();
        assert_eq!(back, b);
        let x: Logic = serde_json::from_str("\"3'hx\"").unwrap();
        assert_eq!(x, Logic::Unknown { width: 3 });
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(width in 1u32..=64, raw in any::<u64>()) {
            let bv = BitVec::new(width, raw & mask(width)).unwrap();
            let text = format_bitvec(&bv);
            prop_assert_eq!(parse_bitvec(&text, width).unwrap(), Logic::Known(bv));
            prop_assert_eq!(BitVec::parse_hex(&bv.to_sim_hex(), width).unwrap(), bv);
            prop_assert_eq!(bv.to_string().parse::<BitVec>().unwrap(), bv);
        }
    }
}
