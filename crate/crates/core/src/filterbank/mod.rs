//! Hand-built detectors: Gaussian and hat filters, cropping and
//! quantization, the integer MAD-NCC scorer, the MAD-ratio detector and
//! per-method operation counts.

mod fixed;
mod kernels;
mod madratio;
mod opcount;
mod quant;

pub use fixed::{
    mad_ncc_fixed_score, mad_ncc_float_reference, to_counts, FixedMadNcc, FixedScore, MAX_FIXED_PIXELS,
    SCORE_FRAC_BITS,
};
pub use kernels::{
    crop_filter, fit_hat, gaussian_filter, ricker_hat_filter, FilterSpec, HatFit, HatParams, Precision,
};
pub use madratio::{center_mad_ratio, mad_ratio_detect, mad_ratios, DEFAULT_MAD_RATIO_THRESHOLD};
pub use opcount::{op_count, op_count_csv, CountedMethod, OpCount};
pub use quant::{quantize_filter, QFormat, QuantizedFilter};
