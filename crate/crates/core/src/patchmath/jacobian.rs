//! Derivatives of the two normalizations.
//!
//! Writing `c = p − μ` and `C = I − 11ᵀ/n` (the centering matrix):
//!
//! * STD: `p̄ = c/‖c‖`, `∂p̄/∂p = (C − p̄p̄ᵀ)/‖c‖`. The projections `C` and
//!   `I − p̄p̄ᵀ` commute because `p̄ ⟂ 1`, so their product is `C − p̄p̄ᵀ`.
//! * MAD: `p̃ = c/(√n·m)` with `m = Σ|c|/n` and `s = sign(c)`,
//!   `∂p̃/∂p = (C − c·(s − s̄1)ᵀ/(n·m)) / (√n·m)`. The `s̄` term comes from
//!   differentiating `m` through the centering; it is what makes every row
//!   sum to zero.
//!
//! The explicit matrices exist for validation. Training goes through
//! [`backprop_normalization`], which applies the same derivative in O(n).

use crate::error::{Error, Result};
use crate::patch::{dot, Patch};

use super::normalize::{Deviation, Normalized};

/// `|p(i) − μ| ≤ KINK_TOL × mad` counts as sitting on the sign kink.
pub const KINK_TOL: f64 = 1e-8;

/// How the MAD derivative treats pixels exactly at the patch mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KinkPolicy {
    /// Report [`Error::KinkProximity`].
    Strict,
    /// Use `sign(0) = 0`.
    Subgradient,
}

/// Dense `n × n` Jacobian, row-major; entry `(i, j)` is
/// `∂(normalized pixel i)/∂(raw pixel j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
}

impl JacobianMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    /// `J·v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.n).map(|r| dot(r, v)).collect()
    }

    /// `gᵀ·J`, the vector-Jacobian product used by backprop.
    pub fn vjp(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (gi, row) in g.iter().zip(self.entries.chunks(self.n)) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += gi * r;
            }
        }
        out
    }
}

pub fn jacobian_normalize_std(p: &Patch) -> Result<JacobianMatrix> {
    let norm = Normalized::of(p.values(), Deviation::Std)?;
    let n = p.len();
    let u = &norm.unit;
    let inv = 1.0 / norm.scale;
    let inv_n = 1.0 / n as f64;
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let centering = if i == j { 1.0 - inv_n } else { -inv_n };
            entries.push((centering - u[i] * u[j]) * inv);
        }
    }
    Ok(JacobianMatrix { n, entries })
}

pub fn jacobian_normalize_mad(p: &Patch) -> Result<JacobianMatrix> {
    let norm = Normalized::of(p.values(), Deviation::Mad)?;
    let n = p.len();
    let signs = mad_signs(&norm, KinkPolicy::Strict)?;
    let s_bar = signs.iter().sum::<f64>() / n as f64;
    let sqrt_n = (n as f64).sqrt();
    let inv = 1.0 / norm.scale;
    let inv_n = 1.0 / n as f64;
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        // c_i / (n·m) = p̃_i / √n
        let ci = norm.unit[i] / sqrt_n;
        for (j, &sj) in signs.iter().enumerate() {
            let centering = if i == j { 1.0 - inv_n } else { -inv_n };
            entries.push((centering - ci * (sj - s_bar)) * inv);
        }
    }
    Ok(JacobianMatrix { n, entries })
}

/// `sign(p − μ)` recovered from the normalized vector.
pub(crate) fn mad_signs(norm: &Normalized, policy: KinkPolicy) -> Result<Vec<f64>> {
    // |c_i| ≤ δ·m  ⇔  |p̃_i| ≤ δ/√n
    let tol = KINK_TOL / (norm.unit.len() as f64).sqrt();
    norm.unit
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            if u.abs() <= tol {
                match policy {
                    KinkPolicy::Strict => Err(Error::KinkProximity {
                        index: i,
                        delta: KINK_TOL,
                    }),
                    KinkPolicy::Subgradient => Ok(0.0),
                }
            } else {
                Ok(u.signum())
            }
        })
        .collect()
}

/// `upstream · ∂(normalized)/∂p` in O(n) from an existing normalization.
pub fn backprop_normalized(upstream: &[f64], norm: &Normalized, policy: KinkPolicy) -> Result<Vec<f64>> {
    let n = norm.unit.len();
    if upstream.len() != n {
        return Err(Error::SizeMismatch(format!(
            "upstream gradient has {} entries, patch has {n}",
            upstream.len()
        )));
    }
    let inv = 1.0 / norm.scale;
    let g_mean = upstream.iter().sum::<f64>() / n as f64;
    let g_dot_u = dot(upstream, &norm.unit);
    match norm.mode {
        Deviation::Std => Ok(upstream
            .iter()
            .zip(&norm.unit)
            .map(|(g, u)| (g - g_mean - g_dot_u * u) * inv)
            .collect()),
        Deviation::Mad => {
            let signs = mad_signs(norm, policy)?;
            let s_bar = signs.iter().sum::<f64>() / n as f64;
            let k = g_dot_u / (n as f64).sqrt();
            Ok(upstream
                .iter()
                .zip(&signs)
                .map(|(g, s)| (g - g_mean - k * (s - s_bar)) * inv)
                .collect())
        }
    }
}

/// Chain rule through a normalization: returns `upstream · ∂(normalized)/∂p`.
/// MAD kinks are an error here; training uses [`backprop_normalized`] with
/// [`KinkPolicy::Subgradient`].
pub fn backprop_normalization(upstream: &[f64], p: &Patch, mode: Deviation) -> Result<Vec<f64>> {
    let norm = Normalized::of(p.values(), mode)?;
    backprop_normalized(upstream, &norm, KinkPolicy::Strict)
}
