//! Wavelet-domain masking pretext task.
//!
//! All high-frequency bands at every level are zeroed, and a random subset of
//! the deepest low-frequency band positions is zeroed as well (the same
//! positions in every color channel). The masked pyramid is synthesised back
//! into a frame.

use alloc::vec;
use alloc::vec::Vec;

use super::dwt::{dwt2d_multi, idwt2d_multi};
use super::filter::FilterBank;
use crate::error::{config_err, dim_err, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskConfig {
    /// Decomposition depth N.
    pub levels: usize,
    /// Fraction of deepest low-band positions to zero.
    pub low_freq_ratio: f64,
    /// Mask granularity in deepest-band positions (square cells).
    pub mask_cell: usize,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { levels: 3, low_freq_ratio: 0.0, mask_cell: 1, seed: 0 }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.low_freq_ratio) {
            return Err(config_err!("mask ratio {} outside [0, 1]", self.low_freq_ratio));
        }
        if self.levels == 0 {
            return Err(config_err!("decomposition depth must be at least 1"));
        }
        if self.mask_cell == 0 {
            return Err(config_err!("mask cell must be at least 1"));
        }
        Ok(())
    }
}

/// Row-major boolean grid; `true` marks a masked position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGrid {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl BitGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedFrame {
    pub frame: Tensor,
    /// Mask applied to the deepest low band.
    pub mask: BitGrid,
}

#[inline]
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Reflect-pads an `[H, W, C]` frame at the bottom/right up to `(h, w)`.
pub fn reflect_pad(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let &[xh, xw, c] = x.shape() else {
        return Err(dim_err!("expected [H, W, C], got {:?}", x.shape()));
    };
    if h < xh || w < xw {
        return Err(dim_err!("cannot pad {xh}x{xw} down to {h}x{w}"));
    }
    let src = x.data();
    let mut out = Vec::with_capacity(h * w * c);
    for y in 0..h {
        let sy = reflect_index(y as isize, xh);
        for xx in 0..w {
            let sx = reflect_index(xx as isize, xw);
            out.extend_from_slice(&src[(sy * xw + sx) * c..][..c]);
        }
    }
    Tensor::new(&[h, w, c], out)
}

fn crop(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let &[_, xw, c] = x.shape() else {
        return Err(dim_err!("expected [H, W, C], got {:?}", x.shape()));
    };
    let src = x.data();
    let mut out = Vec::with_capacity(h * w * c);
    for y in 0..h {
        out.extend_from_slice(&src[y * xw * c..][..w * c]);
    }
    Tensor::new(&[h, w, c], out)
}

/// Applies wavelet-domain masking to an `[H, W, C]` frame.
///
/// Frames whose extents are not multiples of `2^levels` are reflect-padded
/// before analysis and cropped back afterwards.
pub fn apply_wmim(x: &Tensor, cfg: &MaskConfig, fb: &FilterBank) -> Result<MaskedFrame> {
    cfg.validate()?;
    let &[h, w, c] = x.shape() else {
        return Err(dim_err!("expected [H, W, C], got {:?}", x.shape()));
    };
    let m = 1usize << cfg.levels;
    let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    let padded;
    let input = if (ph, pw) == (h, w) {
        x
    } else {
        padded = reflect_pad(x, ph, pw)?;
        &padded
    };
    let mut pyr = dwt2d_multi(input, fb, cfg.levels)?;
    for level in pyr.levels.iter_mut() {
        level.zero_high();
    }
    let (lh, lw) = (ph / m, pw / m);
    let mut mask = BitGrid::new(lh, lw);
    let mut rng = SeededRng::new(cfg.seed);
    let cell = cfg.mask_cell;
    for cy in 0..lh.div_ceil(cell) {
        for cx in 0..lw.div_ceil(cell) {
            if !rng.bernoulli(cfg.low_freq_ratio) {
                continue;
            }
            for y in cy * cell..((cy + 1) * cell).min(lh) {
                for xx in cx * cell..((cx + 1) * cell).min(lw) {
                    mask.bits[y * lw + xx] = true;
                }
            }
        }
    }
    let low = pyr.deepest_low_mut();
    for (i, &masked) in mask.bits.iter().enumerate() {
        if masked {
            low.data_mut()[i * c..(i + 1) * c].fill(0.0);
        }
    }
    let frame = idwt2d_multi(&pyr, fb)?;
    let frame = if (ph, pw) == (h, w) { frame } else { crop(&frame, h, w)? };
    Ok(MaskedFrame { frame, mask })
}

/// Projection onto the deepest low band (all detail bands zeroed, no random
/// mask).
pub fn lowpass(x: &Tensor, levels: usize, fb: &FilterBank) -> Result<Tensor> {
    let cfg = MaskConfig { levels, low_freq_ratio: 0.0, mask_cell: 1, seed: 0 };
    Ok(apply_wmim(x, &cfg, fb)?.frame)
}

/// Spatial-domain masking: zeroes a random `ratio` of pixels (all channels).
pub fn spatial_mask(x: &Tensor, ratio: f64, seed: u64) -> Result<MaskedFrame> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(config_err!("mask ratio {ratio} outside [0, 1]"));
    }
    let &[h, w, c] = x.shape() else {
        return Err(dim_err!("expected [H, W, C], got {:?}", x.shape()));
    };
    let mut rng = SeededRng::new(seed);
    let mut mask = BitGrid::new(h, w);
    let mut frame = x.detached();
    for i in 0..h * w {
        if rng.bernoulli(ratio) {
            mask.bits[i] = true;
            frame.data_mut()[i * c..(i + 1) * c].fill(0.0);
        }
    }
    Ok(MaskedFrame { frame, mask })
}
