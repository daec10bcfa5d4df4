use alloc::vec::Vec;

use super::config::ModelConfig;
use super::params::Encoder;
use crate::error::{dim_err, Result};
use crate::graph::{Graph, Var};

#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// Activation after the last residual block of each group, `[T, C, H/2, W/2]`.
    pub group_outputs: Vec<Var>,
    /// Output of the last residual block (equal to the last group output).
    pub last: Var,
}

/// Stride-2 stem convolution followed by residual blocks
/// `x + conv2(relu(conv1(x)))`.
pub fn encoder_forward(g: &mut Graph, x: Var, p: &Encoder<Var>, cfg: &ModelConfig) -> Result<EncoderOutput> {
    let s = g.shape(x);
    if s.len() != 4 || s[1] != 3 {
        return Err(dim_err!("encoder expects [T, 3, H, W], got {:?}", s));
    }
    if !s[2].is_multiple_of(2) || !s[3].is_multiple_of(2) {
        return Err(dim_err!("encoder needs even spatial extents, got {}x{}", s[2], s[3]));
    }
    let mut h = g.conv2d(x, p.stem.weight, p.stem.bias, 2, 1)?;
    let per_group = cfg.blocks_per_group();
    let mut group_outputs = Vec::with_capacity(cfg.groups);
    for (i, block) in p.blocks.iter().enumerate() {
        let a = g.conv2d(h, block.conv1.weight, block.conv1.bias, 1, 1)?;
        let a = g.relu(a);
        let a = g.conv2d(a, block.conv2.weight, block.conv2.bias, 1, 1)?;
        h = g.add(h, a)?;
        if (i + 1) % per_group == 0 {
            group_outputs.push(h);
        }
    }
    Ok(EncoderOutput { group_outputs, last: h })
}
