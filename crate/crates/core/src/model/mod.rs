//! The reconstruction network: residual encoder, temporal mixture of experts,
//! scene memory and pixel-shuffle decoder.
//!
//! Forward functions record onto a [`Graph`] and take parameters bound as
//! graph leaves (see [`ModelParams::bind`]). Clips are laid out `[T, 3, H, W]`.

mod config;
mod decoder;
mod dmm;
mod encoder;
mod memory;
mod params;
mod tmoe;

pub use config::ModelConfig;
pub use decoder::decoder_forward;
pub use dmm::dmm_forward;
pub use encoder::{encoder_forward, EncoderOutput};
pub use memory::MemoryStore;
pub use params::{
    param_shapes, transfer_phase1_weights, Decoder, Dmm, Encoder, Layer, ModelParams, Params, ResBlock, Tmoe,
};
pub use tmoe::{tmoe_forward, TmoeOutput};

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Pretraining path: encoder then decoder.
pub fn phase1_forward(g: &mut Graph, x: Var, p: &Params<Var>, cfg: &ModelConfig) -> Result<Var> {
    let enc = encoder_forward(g, x, &p.encoder, cfg)?;
    decoder_forward(g, enc.last, &p.decoder)
}

/// Full path: encoder, temporal fusion, scene memory, decoder. The two
/// middle stages can be switched off through the config.
pub fn phase2_forward(
    g: &mut Graph,
    x: Var,
    scene: &str,
    store: &mut MemoryStore,
    p: &Params<Var>,
    cfg: &ModelConfig,
) -> Result<Var> {
    let enc = encoder_forward(g, x, &p.encoder, cfg)?;
    let fused = if cfg.use_tmoe {
        tmoe_forward(g, &enc.group_outputs, &p.tmoe, cfg.temporal_kernel)?.fused
    } else {
        enc.last
    };
    let z = if cfg.use_dmm { dmm_forward(g, fused, scene, store, &p.dmm)? } else { fused };
    decoder_forward(g, z, &p.decoder)
}

/// Gradient-free Phase I inference.
pub fn infer_phase1(params: &ModelParams, x: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let xv = g.constant(x.detached());
    let y = phase1_forward(&mut g, xv, &p, &params.config)?;
    Ok(g.value(y).detached())
}

/// Gradient-free Phase II inference; updates `store`.
pub fn infer_phase2(params: &ModelParams, x: &Tensor, scene: &str, store: &mut MemoryStore) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let xv = g.constant(x.detached());
    let y = phase2_forward(&mut g, xv, scene, store, &p, &params.config)?;
    Ok(g.value(y).detached())
}
