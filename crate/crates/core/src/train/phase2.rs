use alloc::vec::Vec;

use super::adam::{adam_step, OptimState};
use super::data::{gather_clip, stack_frames, unstack_frames, Clip};
use super::phase1::all_clips;
use super::{collect_grads, lr_at, LogRow, TrainConfig};
use crate::error::{config_err, Error, Result};
use crate::graph::Graph;
use crate::loss::total_loss;
use crate::metrics::psnr;
use crate::model::{infer_phase2, phase2_forward, transfer_phase1_weights, MemoryStore, ModelConfig, ModelParams};
use crate::rng::SeededRng;
use crate::synth::Scene;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRow {
    pub step: usize,
    pub psnr: f64,
}

/// Outcome of fine-tuning.
#[derive(Debug, Clone)]
pub struct Phase2Run {
    /// Weights with the best validation PSNR (the final weights when no
    /// validation scenes were given).
    pub params: ModelParams,
    pub final_params: ModelParams,
    /// Training memory at the end of the run.
    pub store: MemoryStore,
    pub log: Vec<LogRow>,
    pub validation: Vec<ValidationRow>,
    pub failure: Option<Error>,
}

/// Runs a scene through the full network clip by clip, in frame order,
/// returning the predicted frames.
pub fn predict_scene(params: &ModelParams, scene: &Scene, store: &mut MemoryStore) -> Result<Vec<Tensor>> {
    let t = params.config.frames_per_clip;
    let mut out = Vec::with_capacity(scene.len());
    let mut start = 0;
    while start < scene.len() {
        let end = (start + t).min(scene.len());
        let clip = stack_frames(&scene.frames_ldr[start..end])?;
        out.extend(unstack_frames(&infer_phase2(params, &clip, &scene.scene_id, store)?)?);
        start = end;
    }
    Ok(out)
}

/// Mean per-frame PSNR (peak 1) against the HDR frames, each scene starting
/// with empty memory.
pub fn evaluate_psnr(params: &ModelParams, scenes: &[Scene]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for scene in scenes {
        let mut store = MemoryStore::new(params.config.memory_len);
        let pred = predict_scene(params, scene, &mut store)?;
        for (p, y) in pred.iter().zip(&scene.frames_hdr) {
            total += psnr(p, y, 1.0)?.min(100.0);
            count += 1;
        }
    }
    if count == 0 {
        return Err(config_err!("no validation frames"));
    }
    Ok(total / count as f64)
}

/// Initial output bias of the fine-tuned decoder. Mid-range starting
/// predictions keep every channel mean positive; from near-zero outputs a
/// channel can settle on the negated target, which global SSIM rewards.
pub const OUTPUT_BIAS_INIT: f64 = 0.5;

/// The clip sequence of one epoch: scenes in order, clips in frame order,
/// one randomly chosen window per clip.
fn epoch_order(clips: &[Vec<Clip>], rng: &mut SeededRng) -> Vec<(usize, Clip)> {
    let mut order = Vec::new();
    for (s, cs) in clips.iter().enumerate() {
        let mut i = 0;
        while i < cs.len() {
            let start = cs[i].start;
            let j = cs[i..].iter().position(|c| c.start != start).map_or(cs.len(), |k| i + k);
            order.push((s, cs[i + rng.index(j - i)]));
            i = j;
        }
    }
    order
}

/// Fine-tunes the full network on LDR to HDR pairs with `L1 + lambda (1 - SSIM)`.
///
/// With `pretrained`, the encoder starts from its weights; everything else
/// starts from a seeded initialisation (output bias [`OUTPUT_BIAS_INIT`])
/// either way, so runs with and without pretraining differ only in the
/// encoder. Scenes are visited in order with
/// clips in frame order; memory persists within an epoch and is cleared
/// between epochs. Validation runs every tenth of the budget and the best
/// weights are kept.
pub fn train_phase2(
    train: &[Scene],
    val: &[Scene],
    pretrained: Option<&ModelParams>,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<Phase2Run> {
    cfg.validate()?;
    let clips = all_clips(train, cfg, model_cfg.frames_per_clip)?;
    let mut fresh = ModelParams::init(*model_cfg, cfg.seed.wrapping_add(0x5eed))?;
    fresh.set("decoder.conv2.bias", Tensor::full(&[3], OUTPUT_BIAS_INIT))?;
    let mut params = match pretrained {
        Some(p1) => transfer_phase1_weights(p1, &fresh)?,
        None => fresh,
    };
    let mut state = OptimState::new(&params);
    let mut rng = SeededRng::derived(cfg.seed, 2);
    let mut store = MemoryStore::new(model_cfg.memory_len);
    let mut log = Vec::with_capacity(cfg.total_iters);
    let mut validation = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;
    let every = cfg.validation_every();

    let mut queue: Vec<(usize, Clip)> = Vec::new();
    let mut cursor = 0;
    for step in 0..cfg.total_iters {
        let lr = lr_at(step, cfg);
        let mut g = Graph::new();
        let bound = params.bind(&mut g, true);
        let mut terms = Vec::with_capacity(cfg.batch_clips);
        for _ in 0..cfg.batch_clips {
            if cursor == queue.len() {
                // new epoch
                queue = epoch_order(&clips, &mut rng);
                cursor = 0;
                store.clear();
            }
            let (s, clip) = queue[cursor];
            cursor += 1;
            let x = g.constant(gather_clip(&train[s].frames_ldr, &clip)?);
            let y = g.constant(gather_clip(&train[s].frames_hdr, &clip)?);
            let pred = phase2_forward(&mut g, x, &train[s].scene_id, &mut store, &bound, model_cfg)?;
            terms.push(total_loss(&mut g, pred, y, &cfg.loss)?);
        }
        let mut acc = [terms[0].total, terms[0].l1, terms[0].ssim];
        for t in &terms[1..] {
            acc = [g.add(acc[0], t.total)?, g.add(acc[1], t.l1)?, g.add(acc[2], t.ssim)?];
        }
        let inv = 1.0 / terms.len() as f64;
        let loss = g.scale(acc[0], inv);
        let (total, l1, ssim) = (g.value(loss).item(), g.value(acc[1]).item() * inv, g.value(acc[2]).item() * inv);
        if !total.is_finite() {
            let failure = Error::NonFinite(alloc::format!("loss {total} at step {step}"));
            let best_params = best.map_or_else(|| params.clone(), |(_, p)| p);
            return Ok(Phase2Run { params: best_params, final_params: params, store, log, validation, failure: Some(failure) });
        }
        g.backward(loss)?;
        let grads = collect_grads(&g, &bound);
        if let Err(e) = adam_step(&mut params, &grads, &mut state, lr) {
            let best_params = best.map_or_else(|| params.clone(), |(_, p)| p);
            return Ok(Phase2Run { params: best_params, final_params: params, store, log, validation, failure: Some(e) });
        }
        log.push(LogRow { step, lr, mask_ratio: 0.0, l1, ssim: Some(ssim), total });

        if !val.is_empty() && ((step + 1) % every == 0 || step + 1 == cfg.total_iters) {
            let score = evaluate_psnr(&params, val)?;
            validation.push(ValidationRow { step: step + 1, psnr: score });
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, params.clone()));
            }
        }
    }
    let best_params = best.map_or_else(|| params.clone(), |(_, p)| p);
    Ok(Phase2Run { params: best_params, final_params: params, store, log, validation, failure: None })
}
