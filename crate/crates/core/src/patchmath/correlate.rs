use crate::error::{Error, Result};
use crate::patch::{dot, Patch};

use super::normalize::{normalize_into, Normalized};

/// Output of a valid-mode correlation: `(H − h + 1) × (W − w + 1)` scores,
/// row-major, where entry `(r, c)` belongs to the window whose top-left
/// corner sits at `(r, c)` in the input.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ResponseMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Position and value of the largest score; the first one in row-major
    /// order wins ties.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 / self.width, best.0 % self.width, best.1)
    }
}

/// Sliding dot product without padding or kernel flip.
pub fn cross_correlate_valid(image: &Patch, filter: &Patch) -> Result<ResponseMap> {
    let (fh, fw) = (filter.height(), filter.width());
    if fh > image.height() || fw > image.width() {
        return Err(Error::SizeMismatch(format!(
            "{fh}x{fw} filter does not fit in {}x{} image",
            image.height(),
            image.width()
        )));
    }
    let oh = image.height() - fh + 1;
    let ow = image.width() - fw + 1;
    let iw = image.width();
    let img = image.values();
    let taps = filter.values();
    let mut values = Vec::with_capacity(oh * ow);
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (fr, frow) in taps.chunks_exact(fw).enumerate() {
                let start = (r + fr) * iw + c;
                acc += crate::patch::dot(&img[start..start + fw], frow);
            }
            values.push(acc);
        }
    }
    Ok(ResponseMap {
        height: oh,
        width: ow,
        values,
    })
}

/// NCC of `filter` against each non-overlapping `f × f` tile of `image`,
/// tiles laid out from the top-left corner; a partial strip at the right or
/// bottom edge is skipped. Each tile is normalized once, which is the
/// per-tile cost model of [`crate::filterbank::op_count`]. Flat tiles score 0.
pub fn tiled_ncc(image: &Patch, filter: &Normalized, side: usize) -> Result<ResponseMap> {
    if side == 0 || side * side != filter.values().len() {
        return Err(Error::SizeMismatch(format!(
            "filter has {} taps, not {side}x{side}",
            filter.values().len()
        )));
    }
    let (th, tw) = (image.height() / side, image.width() / side);
    if th == 0 || tw == 0 {
        return Err(Error::SizeMismatch(format!(
            "{side}x{side} tile does not fit in {}x{} image",
            image.height(),
            image.width()
        )));
    }
    let iw = image.width();
    let px = image.values();
    let mut window = Vec::with_capacity(side * side);
    let mut unit = Vec::with_capacity(side * side);
    let mut values = Vec::with_capacity(th * tw);
    for tr in 0..th {
        for tc in 0..tw {
            window.clear();
            for r in 0..side {
                let start = (tr * side + r) * iw + tc * side;
                window.extend_from_slice(&px[start..start + side]);
            }
            values.push(match normalize_into(&window, filter.mode(), &mut unit) {
                Ok(_) => dot(&unit, filter.values()),
                Err(Error::DegeneratePatch(_)) => 0.0,
                Err(e) => return Err(e),
            });
        }
    }
    Ok(ResponseMap {
        height: th,
        width: tw,
        values,
    })
}
