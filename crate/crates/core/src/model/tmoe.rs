use alloc::vec::Vec;

use super::params::Tmoe;
use crate::error::{dim_err, Result};
use crate::graph::{Graph, Var};
use crate::ops::Padding3;

#[derive(Debug, Clone, Copy)]
pub struct TmoeOutput {
    /// Fused features `[T, C, h, w]`.
    pub fused: Var,
    /// Gating weights `[D, C, T, h, w]`, normalised over the first axis.
    pub gates: Var,
}

fn to_volume(g: &mut Graph, z: Var) -> Result<Var> {
    let s = g.shape(z).to_vec();
    let v = g.permute(z, &[1, 0, 2, 3])?;
    g.reshape(v, &[1, s[1], s[0], s[2], s[3]])
}

/// Temporal mixture of experts over the residual group outputs.
///
/// Each expert turns its group's features into gating logits with a 3D
/// convolution; a softmax across experts weights the features, and a
/// residual 3D convolution refines the weighted sum.
pub fn tmoe_forward(g: &mut Graph, groups: &[Var], p: &Tmoe<Var>, kt: usize) -> Result<TmoeOutput> {
    if groups.is_empty() || groups.len() != p.experts.len() {
        return Err(dim_err!("{} group outputs for {} experts", groups.len(), p.experts.len()));
    }
    let shape = g.shape(groups[0]).to_vec();
    if shape.len() != 4 {
        return Err(dim_err!("expected [T, C, h, w], got {:?}", shape));
    }
    if let Some(&bad) = groups.iter().find(|&&z| g.shape(z) != shape.as_slice()) {
        return Err(dim_err!("group outputs disagree: {:?} vs {:?}", shape, g.shape(bad)));
    }
    let pad = Padding3::same_temporal(kt, 1, 1)?;
    let mut vols = Vec::with_capacity(groups.len());
    let mut logits = Vec::with_capacity(groups.len());
    for (&z, expert) in groups.iter().zip(&p.experts) {
        let v = to_volume(g, z)?;
        logits.push(g.conv3d(v, expert.weight, expert.bias, 1, pad)?);
        vols.push(v);
    }
    let stacked = g.concat(&logits, 0)?;
    let gates = g.softmax(stacked, 0)?;
    let mut fused = None;
    for (d, &v) in vols.iter().enumerate() {
        let w = g.narrow(gates, 0, d, 1)?;
        let term = g.mul(w, v)?;
        fused = Some(match fused {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    let fused = fused.expect("at least one expert");
    let refined = g.conv3d(fused, p.refine.weight, p.refine.bias, 1, pad)?;
    let out = g.add(refined, fused)?;
    let out = g.reshape(out, &[shape[1], shape[0], shape[2], shape[3]])?;
    let out = g.permute(out, &[1, 0, 2, 3])?;
    Ok(TmoeOutput { fused: out, gates })
}
