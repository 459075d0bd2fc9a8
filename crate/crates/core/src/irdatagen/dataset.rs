//! Binary sample file, little-endian throughout:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 4     | magic `4E 43 43 44` (`NCCD`)            |
//! | 2     | version, `1`                            |
//! | 2     | core size, `15`                         |
//! | 2     | context size, `19`                      |
//! | 8     | sample count                            |
//!
//! then per sample: label `i8` (`+1`/`−1`), flags `u8` (bit 0: margin
//! valid), and `19 × 19` `f32` context values, row-major.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::patch::Patch;

use super::samples::{Label, LabeledSample, CONTEXT_SIZE, CORE_SIZE};

pub const DATASET_MAGIC: [u8; 4] = *b"NCCD";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 2 + 8;
const RECORD_LEN: usize = 2 + 4 * CONTEXT_SIZE * CONTEXT_SIZE;
const FLAG_MARGIN_VALID: u8 = 1;

/// Serializes samples. Every value must be exactly representable as `f32`
/// so that reading the file back is lossless.
pub fn encode_dataset(samples: &[LabeledSample]) -> Result<Vec<u8>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * RECORD_LEN);
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(CORE_SIZE as u16).to_le_bytes());
    out.extend_from_slice(&(CONTEXT_SIZE as u16).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        let label: i8 = match s.label {
            Label::Positive => 1,
            Label::Negative => -1,
        };
        out.push(label as u8);
        out.push(if s.margin_valid { FLAG_MARGIN_VALID } else { 0 });
        for &v in s.context.values() {
            let f = v as f32;
            if f64::from(f) != v {
                return Err(Error::OutOfRange(format!(
                    "{v} is not exactly representable as f32"
                )));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<LabeledSample>> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != DATASET_MAGIC {
            return Err(Error::CorruptHeader("bad magic".into()));
        }
        return Err(Error::TruncatedFile(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[..4] != DATASET_MAGIC {
        return Err(Error::CorruptHeader("bad magic".into()));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let version = u16_at(4);
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let (core, context) = (u16_at(6), u16_at(8));
    if usize::from(core) != CORE_SIZE || usize::from(context) != CONTEXT_SIZE {
        return Err(Error::CorruptHeader(format!(
            "expected core {CORE_SIZE} and context {CONTEXT_SIZE}, found {core} and {context}"
        )));
    }
    let count = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    let expected = (count as u128) * RECORD_LEN as u128;
    if (body.len() as u128) < expected {
        return Err(Error::TruncatedFile(format!(
            "header announces {count} samples but only {} complete records are present",
            body.len() / RECORD_LEN
        )));
    }
    if (body.len() as u128) > expected {
        return Err(Error::CorruptHeader(format!(
            "{} trailing bytes after {count} samples",
            body.len() as u128 - expected
        )));
    }
    body.chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let label = match rec[0] as i8 {
                1 => Label::Positive,
                -1 => Label::Negative,
                other => return Err(Error::CorruptHeader(format!("sample {i} has label {other}"))),
            };
            let values: Vec<f64> = rec[2..]
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
                .collect();
            let context = Patch::new(CONTEXT_SIZE, CONTEXT_SIZE, values)
                .map_err(|e| Error::CorruptHeader(format!("sample {i}: {e}")))?;
            Ok(LabeledSample {
                label,
                context,
                margin_valid: rec[1] & FLAG_MARGIN_VALID != 0,
            })
        })
        .collect()
}

pub fn write_dataset(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_dataset(samples)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}
