//! Orthogonal 2D wavelet analysis/synthesis and wavelet-domain masking.
//!
//! Frames handled here are `[H, W, C]` tensors. Each decomposition level
//! filters rows and columns with the low-pass `alpha` and high-pass `beta`
//! vectors of a [`FilterBank`] and decimates by two, giving the four
//! subbands of the separable kernels `alpha alpha^T`, `alpha beta^T`,
//! `beta alpha^T` and `beta beta^T`. Signals are extended periodically inside
//! a level, which keeps every supported bank exactly orthonormal.

mod curriculum;
mod dwt;
mod filter;
mod wmim;

pub use curriculum::{curriculum_ratio, CurriculumSchedule};
pub use dwt::{
    band_energies, chw_to_hwc, dwt2d_level, dwt2d_multi, hwc_to_chw, idwt2d_level, idwt2d_multi,
    Band, Subbands, WaveletPyramid,
};
pub use filter::{FilterBank, WaveletKind};
pub use wmim::{apply_wmim, lowpass, reflect_pad, spatial_mask, BitGrid, MaskConfig, MaskedFrame};
