//! Computational-basis spin configurations.
//!
//! Bit `i` set means spin `i` points up (σᵢ = +1). Configurations order by
//! their unsigned integer value, which fixes the row order of every matrix
//! built over a ground manifold.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported spin count.
pub const MAX_SPINS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SpinConfig(pub u128);

impl SpinConfig {
    pub fn new(bits: u128) -> Self {
        SpinConfig(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    /// σᵢ as ±1.
    #[inline]
    pub fn spin(self, i: usize) -> i8 {
        if (self.0 >> i) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn is_up(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    #[inline]
    pub fn flip_mask(self, mask: u128) -> Self {
        SpinConfig(self.0 ^ mask)
    }

    #[inline]
    pub fn hamming(self, other: SpinConfig) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// Builds a configuration from ±1 spins.
    pub fn from_spins(spins: &[i8]) -> Self {
        let mut bits = 0u128;
        for (i, &s) in spins.iter().enumerate() {
            if s > 0 {
                bits |= 1 << i;
            }
        }
        SpinConfig(bits)
    }

    /// Parses a label such as `"11001"` or `"↑↑↓↓↑"`; the first character is spin 0.
    pub fn parse(label: &str) -> Result<Self> {
        let mut bits = 0u128;
        for (n, c) in label.chars().enumerate() {
            let up = match c {
                '1' | '↑' | '+' => true,
                '0' | '↓' | '-' => false,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "invalid spin character {c:?} in {label:?}"
                    )))
                }
            };
            if n >= MAX_SPINS {
                return Err(Error::InvalidArgument(format!("label {label:?} too long")));
            }
            if up {
                bits |= 1 << n;
            }
        }
        Ok(SpinConfig(bits))
    }

    /// `0`/`1` label of length `n`, spin 0 first.
    pub fn label(self, n: usize) -> String {
        (0..n)
            .map(|i| if self.is_up(i) { '1' } else { '0' })
            .collect()
    }

    /// Arrow label of length `n`, spin 0 first.
    pub fn arrows(self, n: usize) -> String {
        (0..n)
            .map(|i| if self.is_up(i) { '↑' } else { '↓' })
            .collect()
    }

    pub fn display(self, n: usize) -> Labeled {
        Labeled(self, n)
    }
}

pub struct Labeled(SpinConfig, usize);

impl fmt::Display for Labeled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.label(self.1))
    }
}

/// Serializes a configuration together with its spin count as a `0`/`1` label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledConfig {
    pub config: SpinConfig,
    pub num_spins: usize,
}

impl Serialize for LabeledConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.config.label(self.num_spins))
    }
}

impl<'de> Deserialize<'de> for LabeledConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        let config = SpinConfig::parse(&label).map_err(serde::de::Error::custom)?;
        Ok(LabeledConfig {
            config,
            num_spins: label.chars().count(),
        })
    }
}

/// Mask with the low `n` bits set.
pub fn full_mask(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trip() {
        let s = SpinConfig::parse("↑↑↓↓↑").unwrap();
        assert_eq!(s.bits(), 0b10011);
        assert_eq!(s.label(5), "11001");
        assert_eq!(SpinConfig::parse("11001").unwrap(), s);
        assert_eq!(s.spin(2), -1);
        assert_eq!(s.spin(4), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(SpinConfig::parse("10x").is_err());
    }

    #[test]
    fn hamming_counts_differences() {
        let a = SpinConfig::parse("11111").unwrap();
        let b = SpinConfig::parse("11001").unwrap();
        assert_eq!(a.hamming(b), 2);
    }
}
