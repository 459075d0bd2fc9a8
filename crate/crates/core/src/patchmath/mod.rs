//! Patch statistics, the STD and MAD normalizations, valid-mode correlation
//! and the analytic derivatives of both normalizations.

mod correlate;
mod jacobian;
mod normalize;
mod stats;

pub use correlate::{cross_correlate_valid, tiled_ncc, ResponseMap};
pub use jacobian::{
    backprop_normalization, backprop_normalized, jacobian_normalize_mad, jacobian_normalize_std,
    JacobianMatrix, KinkPolicy, KINK_TOL,
};
pub use normalize::{
    ncc_score, normalize, normalize_into, normalize_mad, normalize_std, Deviation, Normalized,
};
pub use stats::{
    counted_sqrt, patch_mad, patch_mean, patch_std, reset_sqrt_calls, sqrt_calls, PatchStats, DEGENERACY_EPS,
};

#[cfg(test)]
pub(crate) use jacobian::tests as jacobian_oracle;
