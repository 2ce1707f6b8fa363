//! Two's-complement fixed-point words and bit-expanded input weights.
//!
//! An `n`-bit word with integer code `c` represents `c / 2^(n-1)`, so every
//! word lies in `[-1, 1)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Widest supported word; codes are held in an `i64`.
pub const MAX_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointWord {
    code: i64,
    n_bits: u32,
}

impl FixedPointWord {
    pub fn new(code: i64, n_bits: u32) -> Result<Self> {
        check_bits(n_bits)?;
        let (lo, hi) = code_range(n_bits);
        if code < lo || code > hi {
            return Err(Error::invalid(
                "fixed-point code",
                format!("{code} outside [{lo}, {hi}] for {n_bits} bits"),
            ));
        }
        Ok(Self { code, n_bits })
    }

    pub fn zero(n_bits: u32) -> Self {
        Self { code: 0, n_bits }
    }

    pub fn code(&self) -> i64 {
        self.code
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    /// The represented real value `code / 2^(n-1)`.
    pub fn value(&self) -> f64 {
        self.code as f64 / scale(self.n_bits)
    }

    /// Raw two's-complement bit pattern in the low `n_bits` bits.
    pub fn bits(&self) -> u64 {
        (self.code as u64) & mask(self.n_bits)
    }

    /// Bit `j` (0-based, LSB first).
    pub fn bit(&self, j: u32) -> bool {
        (self.bits() >> j) & 1 == 1
    }
}

fn check_bits(n_bits: u32) -> Result<()> {
    if n_bits == 0 || n_bits > MAX_BITS {
        return Err(Error::invalid(
            "bit width",
            format!("{n_bits} not in 1..={MAX_BITS}"),
        ));
    }
    Ok(())
}

fn scale(n_bits: u32) -> f64 {
    (2.0f64).powi(n_bits as i32 - 1)
}

fn mask(n_bits: u32) -> u64 {
    if n_bits >= 64 {
        u64::MAX
    } else {
        (1u64 << n_bits) - 1
    }
}

/// Smallest and largest code of an `n_bits` word.
pub fn code_range(n_bits: u32) -> (i64, i64) {
    let half = 1i64 << (n_bits - 1);
    (-half, half - 1)
}

/// Nearest representable word. Ties go toward negative infinity and values
/// outside `[-1, 1)` saturate to the extreme codes.
pub fn quantize(value: f64, n_bits: u32) -> Result<FixedPointWord> {
    check_bits(n_bits)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("quantizer input"));
    }
    let (lo, hi) = code_range(n_bits);
    let scaled = value * scale(n_bits);
    let code = (scaled - 0.5).ceil().clamp(lo as f64, hi as f64) as i64;
    Ok(FixedPointWord { code, n_bits })
}

pub fn dequantize(word: FixedPointWord) -> f64 {
    word.value()
}

/// How the per-bit input weights are scaled relative to the effective weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Bit weights carry the extra factor `2^(1-n)`, so the weighted bit sum
    /// equals `effective * value` with the value in `[-1, 1)`.
    #[default]
    Normalized,
    /// Bit weights `+2^(j-1) w` and `-2^(n-1) w` without normalisation; the
    /// weighted sum equals `effective * code`.
    Literal,
}

/// Per-bit weights (LSB first) whose weighted sum over a word's bits
/// reproduces `effective` times that word's value.
pub fn expand_input_weights(effective: f64, n_bits: u32, scaling: InputScaling) -> Vec<f64> {
    let s = match scaling {
        InputScaling::Normalized => (2.0f64).powi(1 - n_bits as i32),
        InputScaling::Literal => 1.0,
    };
    (1..=n_bits)
        .map(|j| {
            let magnitude = (2.0f64).powi(j as i32 - 1) * s * effective;
            if j == n_bits {
                -magnitude
            } else {
                magnitude
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.0, 8).unwrap().code(), 0);
        assert_eq!(quantize(-1.0, 8).unwrap().code(), -128);
        assert_eq!(quantize(0.5, 8).unwrap().code(), 64);
    }

    #[test]
    fn quantize_saturates_and_rejects_nan() {
        assert_eq!(quantize(1.0, 8).unwrap().code(), 127);
        assert_eq!(quantize(7.5, 4).unwrap().code(), 7);
        assert_eq!(quantize(-3.0, 4).unwrap().code(), -8);
        assert!(quantize(f64::NAN, 8).is_err());
        assert!(quantize(f64::INFINITY, 8).is_err());
        assert!(quantize(0.1, 0).is_err());
    }

    #[test]
    fn ties_round_down() {
        // 1.5 LSB and -0.5 LSB at 8 bits
        assert_eq!(quantize(1.5 / 128.0, 8).unwrap().code(), 1);
        assert_eq!(quantize(-0.5 / 128.0, 8).unwrap().code(), -1);
        assert_eq!(quantize(0.5 / 128.0, 8).unwrap().code(), 0);
    }

    #[test]
    fn one_bit_words() {
        assert_eq!(quantize(0.2, 1).unwrap().code(), 0);
        assert_eq!(quantize(-0.7, 1).unwrap().code(), -1);
        assert_eq!(FixedPointWord::new(-1, 1).unwrap().value(), -1.0);
        assert!(FixedPointWord::new(1, 1).is_err());
    }

    #[test]
    fn bits_are_twos_complement() {
        let w = FixedPointWord::new(-1, 4).unwrap();
        assert_eq!(w.bits(), 0b1111);
        let w = FixedPointWord::new(-8, 4).unwrap();
        assert_eq!(w.bits(), 0b1000);
        assert!(w.bit(3) && !w.bit(0));
    }

    #[test]
    fn expansion_examples() {
        let w = expand_input_weights(1.0, 2, InputScaling::Normalized);
        assert_eq!(w, vec![0.5, -1.0]);
        // code bits (1,0) -> 0.5 ; (1,1) -> -0.5
        assert_eq!(w[0], 0.5);
        assert_eq!(w[0] + w[1], -0.5);
        assert!(expand_input_weights(0.0, 8, InputScaling::Normalized)
            .iter()
            .all(|&x| x == 0.0));
        let lit = expand_input_weights(0.5, 3, InputScaling::Literal);
        assert_eq!(lit, vec![0.5, 1.0, -2.0]);
    }

    #[test]
    fn literal_scaling_sums_to_code() {
        let w = expand_input_weights(0.25, 5, InputScaling::Literal);
        for code in -16..16 {
            let word = FixedPointWord::new(code, 5).unwrap();
            let sum: f64 = (0..5).filter(|&j| word.bit(j)).map(|j| w[j as usize]).sum();
            assert!((sum - 0.25 * code as f64).abs() < 1e-12);
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quantization_error_bounded(n in 1u32..=12, frac in 0.0f64..1.0) {
            let lo = -1.0;
            let hi = 1.0 - (2.0f64).powi(1 - n as i32);
            let x = lo + frac * (hi - lo);
            let w = quantize(x, n).unwrap();
            prop_assert!((w.value() - x).abs() <= (2.0f64).powi(-(n as i32)) + 1e-15);
            // idempotent
            prop_assert_eq!(quantize(w.value(), n).unwrap(), w);
        }
    }
}
