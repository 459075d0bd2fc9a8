//! Signed fixed-point formats and quantized filters.
//!
//! Quantized filter file:
//!
//! ```text
//! qfilter 1
//! format <total_bits> <frac_bits>
//! exponent <e>
//! <rows> <cols>
//! <raw integer taps, one row per line>
//! ```
//!
//! Tap `i` stands for `raw_i · 2^(e − frac_bits)`.

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::patch::{int_grid_text, LineReader, Patch};

use super::kernels::{FilterSpec, Precision};

/// Two's-complement format with `frac_bits` fractional bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl QFormat {
    /// 8-bit taps in `[−1, 1)`.
    pub const Q8_7: QFormat = QFormat {
        total_bits: 8,
        frac_bits: 7,
    };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(2..=32).contains(&total_bits) || frac_bits >= total_bits {
            return Err(Error::InvalidConfig(format!(
                "fixed-point format needs 2 <= total <= 32 and frac < total, got ({total_bits}, {frac_bits})"
            )));
        }
        Ok(Self {
            total_bits,
            frac_bits,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Value of one raw step, `2^−frac_bits`.
    pub fn ulp(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Largest representable value, `1 − 2^−frac_bits` for `frac = total − 1`.
    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.ulp()
    }

    /// Round half to even, then saturate.
    pub fn quantize(&self, value: f64) -> i64 {
        let scaled = (value * (self.frac_bits as f64).exp2()).round_ties_even();
        scaled.clamp(self.min_raw() as f64, self.max_raw() as f64) as i64
    }

    pub fn dequantize(&self, raw: i64) -> f64 {
        raw as f64 * self.ulp()
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q({},{})", self.total_bits, self.frac_bits)
    }
}

/// Integer taps with a shared power-of-two scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedFilter {
    pub format: QFormat,
    pub exponent: i32,
    pub side: usize,
    pub raw: Vec<i64>,
}

const QFILTER_VERSION: u32 = 1;

impl QuantizedFilter {
    /// Picks the smallest exponent `e` with `max|tap|·2^−e ≤ max_value`, then
    /// quantizes `tap·2^−e`.
    pub fn from_patch(grid: &Patch, format: QFormat) -> Result<Self> {
        if !grid.is_square() {
            return Err(Error::InvalidShape("quantized filters must be square".into()));
        }
        let peak = grid.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let exponent = if peak == 0.0 {
            0
        } else {
            let mut e = (peak / format.max_value()).log2().ceil() as i32;
            // correct for log2 rounding at exact powers of two
            while peak * (-e as f64).exp2() > format.max_value() {
                e += 1;
            }
            while peak * (-(e - 1) as f64).exp2() <= format.max_value() {
                e -= 1;
            }
            e
        };
        let scale = (-exponent as f64).exp2();
        let raw = grid.values().iter().map(|v| format.quantize(v * scale)).collect();
        Ok(Self {
            format,
            exponent,
            side: grid.width(),
            raw,
        })
    }

    /// Taps in `[−1, 1)` before the shared scale is applied.
    pub fn mantissas(&self) -> Patch {
        let values = self.raw.iter().map(|&r| self.format.dequantize(r)).collect();
        Patch::new(self.side, self.side, values).expect("validated on construction")
    }

    /// Taps in the units of the original filter.
    pub fn values(&self) -> Patch {
        let scale = (self.exponent as f64).exp2();
        self.mantissas().map(|v| v * scale)
    }

    pub fn to_text(&self) -> String {
        format!(
            "qfilter {QFILTER_VERSION}\nformat {} {}\nexponent {}\n{}",
            self.format.total_bits,
            self.format.frac_bits,
            self.exponent,
            int_grid_text(self.side, self.side, &self.raw)
        )
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = LineReader::new(input);
        let (line, text) = lines.expect_line("`qfilter` header")?;
        let version = text
            .strip_prefix("qfilter ")
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::parse(line, "expected `qfilter <version>`"))?;
        if version != QFILTER_VERSION {
            return Err(Error::VersionMismatch {
                found: version as u16,
                expected: QFILTER_VERSION as u16,
            });
        }
        let (line, text) = lines.expect_line("`format` line")?;
        let bits: Vec<u32> = text
            .strip_prefix("format ")
            .map(|r| r.split_whitespace().filter_map(|t| t.parse().ok()).collect())
            .unwrap_or_default();
        let format = match bits.as_slice() {
            [t, f] => QFormat::new(*t, *f).map_err(|e| Error::parse(line, e.to_string()))?,
            _ => return Err(Error::parse(line, "expected `format <total> <frac>`")),
        };
        let (line, text) = lines.expect_line("`exponent` line")?;
        let exponent = text
            .strip_prefix("exponent ")
            .and_then(|v| v.trim().parse::<i32>().ok())
            .ok_or_else(|| Error::parse(line, "expected `exponent <e>`"))?;
        let grid_line = line + 1;
        let (rows, cols, raw) = lines.read_tokens::<i64>()?;
        if rows != cols {
            return Err(Error::parse(grid_line, "quantized filters must be square"));
        }
        if let Some(bad) = raw
            .iter()
            .find(|&&r| r < format.min_raw() || r > format.max_raw())
        {
            return Err(Error::parse(
                grid_line,
                format!("tap {bad} does not fit {format}"),
            ));
        }
        if let Some((line, _)) = lines.next_nonempty()? {
            return Err(Error::parse(line, "trailing content"));
        }
        Ok(Self {
            format,
            exponent,
            side: rows,
            raw,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Rescales the taps by a positive power of two so they fit `q`, then
/// rounds each to the format grid. NCC scores ignore the rescale.
pub fn quantize_filter(f: &FilterSpec, q: QFormat) -> Result<FilterSpec> {
    let quantized = QuantizedFilter::from_patch(&f.grid, q)?;
    Ok(FilterSpec {
        grid: quantized.mantissas(),
        precision: Precision::Fixed(q),
        ..f.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{ricker_hat_filter, HatParams};
    use crate::patchmath::{ncc_score, Deviation};
    use proptest::prelude::*;

    #[test]
    fn format_examples() {
        let q = QFormat::Q8_7;
        assert_eq!(q.quantize(0.5), 64);
        assert_eq!(q.quantize(-1.0), -128);
        assert_eq!(q.quantize(1.0), 127);
        assert_eq!(q.quantize(-3.0), -128);
        // ties go to even
        assert_eq!(q.quantize(0.5 / 128.0), 0);
        assert_eq!(q.quantize(1.5 / 128.0), 2);
        assert_eq!(q.to_string(), "Q(8,7)");
        assert!(QFormat::new(1, 0).is_err());
        assert!(QFormat::new(33, 0).is_err());
        assert!(QFormat::new(8, 8).is_err());
    }

    proptest! {
        #[test]
        fn rounding_error_is_half_an_ulp(v in -1.0f64..1.0, t in 4u32..=16) {
            let q = QFormat::new(t, t - 1).unwrap();
            prop_assume!(v <= q.max_value());
            let back = q.dequantize(q.quantize(v));
            prop_assert!((back - v).abs() <= q.ulp() / 2.0);
        }

        #[test]
        fn filter_taps_fit_and_round_trip(seed in any::<u64>(), scale in 1e-3f64..1e3) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid = Patch::from_fn(9, 9, |_, _| scale * rng.random_range(-1.0..1.0));
            let qf = QuantizedFilter::from_patch(&grid, QFormat::Q8_7).unwrap();
            let peak = grid.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let step = (qf.exponent as f64).exp2();
            // the exponent is the tightest that fits
            prop_assert!(peak / step <= QFormat::Q8_7.max_value());
            prop_assert!(peak / (step / 2.0) > QFormat::Q8_7.max_value());
            for (a, b) in qf.values().values().iter().zip(grid.values()) {
                prop_assert!((a - b).abs() <= step * QFormat::Q8_7.ulp() / 2.0);
            }
            let back = QuantizedFilter::read(qf.to_text().as_bytes()).unwrap();
            prop_assert_eq!(back, qf);
        }
    }

    #[test]
    fn quantized_hat_scores_close_to_ideal() {
        use rand::{Rng, SeedableRng};
        let hat = crate::filterbank::crop_filter(&ricker_hat_filter(15, &HatParams::default()).unwrap(), 9)
            .unwrap();
        let q = QFormat::Q8_7;
        let fixed = quantize_filter(&hat, q).unwrap();
        assert_eq!(fixed.precision, Precision::Fixed(q));
        assert!(fixed.grid.values().iter().all(|v| v.abs() <= q.max_value()));
        // measure C in |Δscore| ≤ C·2^−frac over random windows
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let w = Patch::from_fn(9, 9, |_, _| rng.random_range(0.0..1000.0));
            for mode in [Deviation::Std, Deviation::Mad] {
                let a = ncc_score(&w, &hat.grid, mode).unwrap();
                let b = ncc_score(&w, &fixed.grid, mode).unwrap();
                worst = worst.max((a - b).abs());
            }
        }
        let c = worst / q.ulp();
        eprintln!("quantization score constant C = {c:.3}");
        assert!(c < 4.0);
    }

    #[test]
    fn file_errors() {
        let qf = QuantizedFilter::from_patch(&Patch::filled(3, 3, 0.25), QFormat::Q8_7).unwrap();
        let text = qf.to_text();
        assert!(matches!(
            QuantizedFilter::read(text.replace("qfilter 1", "qfilter 2").as_bytes()),
            Err(Error::VersionMismatch { .. })
        ));
        assert!(QuantizedFilter::read(text.replace("format 8 7", "format 8 9").as_bytes()).is_err());
        assert_eq!(qf.raw[0], 64);
        let wide = text.replacen("64 64 64", "64 64 999", 1);
        assert!(QuantizedFilter::read(wide.as_bytes()).is_err());
    }
}
