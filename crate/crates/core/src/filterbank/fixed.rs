//! Integer MAD-NCC.
//!
//! Bit-exact contract for a window `p` of `n ≤ 4096` pixels, each an
//! unsigned 16-bit count. All divisions truncate toward zero.
//!
//! 1. `S = Σ p_i` (32-bit unsigned).
//! 2. `μ₄ = (S << 4) / n` — the mean with 4 fractional bits (32-bit).
//! 3. `d_i = (p_i << 4) − μ₄` (32-bit signed, `|d_i| < 2²⁰`).
//! 4. `A = Σ |d_i|` (32-bit unsigned). `A = 16·n·mad`; `A = 0` flags a
//!    degenerate window and the score is 0.
//! 5. `C = Σ d_i·t_i` with 32-bit products and a 48-bit accumulator, where
//!    `t_i` are the filter taps (see below).
//! 6. `score = (C · 2^(e + 10 − frac)) / A`, the one division of the
//!    pipeline, computed exactly and saturated to 16 bits. The result is in
//!    Q(16,10): `value = score / 1024`, range `[−32, 32)`.
//!
//! The filter is prepared offline in floating point: it is centred and
//! divided by its own MAD, then stored as `t_i · 2^(e − frac)` with the
//! smallest exponent `e` that fits the tap format (see
//! [`QuantizedFilter`]). No square root is taken anywhere.

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::patchmath::{patch_mad, patch_mean, Deviation};

use super::kernels::{FilterSpec, Precision};
use super::quant::{QFormat, QuantizedFilter};

/// Fractional bits of the reported score.
pub const SCORE_FRAC_BITS: u32 = 10;

/// Largest supported window.
pub const MAX_FIXED_PIXELS: usize = 4096;

const ACCUMULATOR_BITS: u32 = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedScore {
    /// Score in Q(16,10).
    pub raw: i16,
    pub degenerate: bool,
}

impl FixedScore {
    pub fn value(&self) -> f64 {
        f64::from(self.raw) / f64::from(1u32 << SCORE_FRAC_BITS)
    }
}

/// A filter prepared for the integer MAD-NCC pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedMadNcc {
    filter: QuantizedFilter,
}

impl FixedMadNcc {
    /// Centres `filter`, divides by its MAD and quantizes the result in `q`.
    pub fn new(filter: &Patch, q: QFormat) -> Result<Self> {
        let mad = patch_mad(filter);
        if mad == 0.0 {
            return Err(Error::FlatFilter);
        }
        let mu = patch_mean(filter);
        let normalized = filter.map(|v| (v - mu) / mad);
        Self::from_quantized(QuantizedFilter::from_patch(&normalized, q)?)
    }

    /// Uses the precision of `spec`, which must be fixed-point.
    pub fn from_spec(spec: &FilterSpec) -> Result<Self> {
        match spec.precision {
            Precision::Fixed(q) => Self::new(&spec.grid, q),
            Precision::Ideal => Err(Error::InvalidConfig(format!(
                "filter `{}` has no fixed-point format",
                spec.name
            ))),
        }
    }

    /// Wraps taps that are already MAD-normalized and quantized.
    pub fn from_quantized(filter: QuantizedFilter) -> Result<Self> {
        let n = filter.raw.len();
        let tb = filter.format.total_bits();
        if n > MAX_FIXED_PIXELS {
            return Err(Error::InvalidShape(format!(
                "fixed-point windows are limited to {MAX_FIXED_PIXELS} pixels, got {n}"
            )));
        }
        // products |d|·|t| < 2^20 · 2^(tb−1) must fit 32 bits
        if tb > 12 {
            return Err(Error::InvalidConfig(format!(
                "fixed-point MAD-NCC supports taps up to 12 bits, got {}",
                filter.format
            )));
        }
        debug_assert!((n as u64) << (19 + tb) < 1u64 << (ACCUMULATOR_BITS - 1));
        Ok(Self { filter })
    }

    pub fn quantized(&self) -> &QuantizedFilter {
        &self.filter
    }

    pub fn side(&self) -> usize {
        self.filter.side
    }

    /// The filter the pipeline effectively correlates with.
    pub fn effective_filter(&self) -> Patch {
        self.filter.values()
    }

    pub fn score(&self, window: &[u16]) -> Result<FixedScore> {
        let n = self.filter.raw.len();
        if window.len() != n {
            return Err(Error::SizeMismatch(format!(
                "window has {} pixels, filter has {n}",
                window.len()
            )));
        }
        let sum: u32 = window.iter().map(|&p| u32::from(p)).sum();
        let mean4 = ((sum << 4) / n as u32) as i32;
        let mut abs_sum: u32 = 0;
        let mut acc: i64 = 0;
        for (&p, &t) in window.iter().zip(&self.filter.raw) {
            let d = (i32::from(p) << 4) - mean4;
            abs_sum += d.unsigned_abs();
            let product: i32 = d * t as i32;
            acc += i64::from(product);
        }
        debug_assert!(acc.unsigned_abs() < 1u64 << (ACCUMULATOR_BITS - 1));
        if abs_sum == 0 {
            return Ok(FixedScore {
                raw: 0,
                degenerate: true,
            });
        }
        let shift = self.filter.exponent + SCORE_FRAC_BITS as i32 - self.filter.format.frac_bits() as i32;
        let (num, den) = if shift >= 0 {
            (i128::from(acc) << shift, i128::from(abs_sum))
        } else {
            (i128::from(acc), i128::from(abs_sum) << -shift)
        };
        let q = num / den;
        let raw = q.clamp(i128::from(i16::MIN), i128::from(i16::MAX)) as i16;
        Ok(FixedScore {
            raw,
            degenerate: false,
        })
    }

    /// Scores a patch whose pixels are integers in `[0, 65535]`.
    pub fn score_patch(&self, p: &Patch) -> Result<FixedScore> {
        self.score(&to_counts(p)?)
    }
}

/// Converts integral pixel values to 16-bit counts.
pub fn to_counts(p: &Patch) -> Result<Vec<u16>> {
    p.values()
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..=65535.0).contains(&v) {
                Ok(v as u16)
            } else {
                Err(Error::OutOfRange(format!("pixel {v} is not a 16-bit count")))
            }
        })
        .collect()
}

/// Integer MAD-NCC of `p` against a prepared filter.
pub fn mad_ncc_fixed_score(p: &Patch, f: &FixedMadNcc) -> Result<FixedScore> {
    f.score_patch(p)
}

/// Floating-point counterpart: MAD-NCC against the effective (dequantized)
/// filter.
pub fn mad_ncc_float_reference(p: &Patch, f: &FixedMadNcc) -> Result<f64> {
    crate::patchmath::ncc_score(p, &f.effective_filter(), Deviation::Mad)
}
