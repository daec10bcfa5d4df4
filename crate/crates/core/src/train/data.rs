use alloc::vec::Vec;

use crate::error::{config_err, dim_err, Result};
use crate::ops;
use crate::tensor::Tensor;

/// A clip of adjacent frames cut at one spatial window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clip {
    /// First frame index.
    pub start: usize,
    pub len: usize,
    /// Top-left corner of the window.
    pub y: usize,
    pub x: usize,
    pub size: usize,
}

/// Top-left corners of all `size x size` windows at `stride`, row-major.
///
/// Each axis holds `floor((extent - size) / stride) + 1` windows.
pub fn patch_origins(height: usize, width: usize, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if size == 0 || stride == 0 {
        return Err(config_err!("patch size and stride must be positive"));
    }
    if size > height || size > width {
        return Err(dim_err!("patch {size} does not fit a {height}x{width} frame"));
    }
    let ny = (height - size) / stride + 1;
    let nx = (width - size) / stride + 1;
    Ok((0..ny).flat_map(|i| (0..nx).map(move |j| (i * stride, j * stride))).collect())
}

/// Every clip of `clip_len` frames (non-overlapping, in frame order) at every
/// window, ordered by start frame then window.
pub fn crop_patches(
    num_frames: usize,
    height: usize,
    width: usize,
    size: usize,
    stride: usize,
    clip_len: usize,
) -> Result<Vec<Clip>> {
    if clip_len == 0 || clip_len > num_frames {
        return Err(config_err!("clip length {clip_len} for {num_frames} frames"));
    }
    let origins = patch_origins(height, width, size, stride)?;
    let mut out = Vec::new();
    for start in (0..=num_frames - clip_len).step_by(clip_len) {
        for &(y, x) in &origins {
            out.push(Clip { start, len: clip_len, y, x, size });
        }
    }
    Ok(out)
}

/// Stacks the clip's windows of `[3, H, W]` frames into `[T, 3, s, s]`.
pub fn gather_clip(frames: &[Tensor], clip: &Clip) -> Result<Tensor> {
    let mut parts = Vec::with_capacity(clip.len);
    for f in &frames[clip.start..clip.start + clip.len] {
        let rows = ops::narrow(f, 1, clip.y, clip.size)?;
        let win = ops::narrow(&rows, 2, clip.x, clip.size)?;
        parts.push(win.reshaped(&[1, 3, clip.size, clip.size])?);
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    ops::concat(&refs, 0)
}

/// Stacks whole frames into `[T, 3, H, W]`.
pub fn stack_frames(frames: &[Tensor]) -> Result<Tensor> {
    let mut parts = Vec::with_capacity(frames.len());
    for f in frames {
        let mut shape = alloc::vec![1];
        shape.extend_from_slice(f.shape());
        parts.push(f.reshaped(&shape)?);
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    ops::concat(&refs, 0)
}

/// Splits `[T, ...]` into `T` frames.
pub fn unstack_frames(clip: &Tensor) -> Result<Vec<Tensor>> {
    let t = clip.shape()[0];
    let inner = &clip.shape()[1..];
    (0..t).map(|i| ops::narrow(clip, 0, i, 1)?.reshaped(inner)).collect()
}
