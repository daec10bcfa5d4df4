use alloc::vec::Vec;

use super::adam::{adam_step, OptimState};
use super::data::{crop_patches, gather_clip, stack_frames, unstack_frames, Clip};
use super::{collect_grads, lr_at, LogRow, TrainConfig};
use crate::error::{config_err, Error, Result};
use crate::graph::Graph;
use crate::loss::l1_loss;
use crate::model::{phase1_forward, ModelConfig, ModelParams};
use crate::ops;
use crate::rng::SeededRng;
use crate::synth::Scene;
use crate::tensor::Tensor;
use crate::wavelet::{apply_wmim, chw_to_hwc, curriculum_ratio, hwc_to_chw, CurriculumSchedule, FilterBank, MaskConfig};

/// Outcome of pretraining. On failure `params` holds the last weights that
/// produced a finite loss and `failure` says what went wrong.
#[derive(Debug, Clone)]
pub struct Phase1Run {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
    pub failure: Option<Error>,
}

pub(crate) fn all_clips(scenes: &[Scene], cfg: &TrainConfig, clip_len: usize) -> Result<Vec<Vec<Clip>>> {
    if scenes.is_empty() {
        return Err(config_err!("no training scenes"));
    }
    scenes
        .iter()
        .map(|s| {
            let (h, w) = s.extent();
            crop_patches(s.len(), h, w, cfg.patch_size, cfg.patch_stride, clip_len)
        })
        .collect()
}

/// Masks every frame of a `[T, 3, H, W]` clip independently.
fn mask_clip(clip: &Tensor, ratio: f64, cfg: &TrainConfig, fb: &FilterBank, rng: &mut SeededRng) -> Result<Tensor> {
    let mut masked = Vec::with_capacity(clip.shape()[0]);
    for frame in unstack_frames(clip)? {
        let mcfg = MaskConfig { levels: cfg.levels, low_freq_ratio: ratio, mask_cell: 1, seed: rng.next_u64() };
        let out = apply_wmim(&chw_to_hwc(&frame)?, &mcfg, fb)?;
        masked.push(hwc_to_chw(&out.frame)?);
    }
    stack_frames(&masked)
}

/// Pretrains encoder and decoder to reconstruct LDR clips from their
/// wavelet-masked versions, minimising the L1 loss.
pub fn train_phase1(
    scenes: &[Scene],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    sched: &CurriculumSchedule,
) -> Result<Phase1Run> {
    cfg.validate()?;
    let clips = all_clips(scenes, cfg, model_cfg.frames_per_clip)?;
    let pool: Vec<(usize, Clip)> =
        clips.iter().enumerate().flat_map(|(s, cs)| cs.iter().map(move |&c| (s, c))).collect();
    let fb = FilterBank::new(cfg.wavelet);
    let mut params = ModelParams::init(*model_cfg, cfg.seed)?;
    let mut state = OptimState::new(&params);
    let mut rng = SeededRng::derived(cfg.seed, 1);
    let mut log = Vec::with_capacity(cfg.total_iters);

    for step in 0..cfg.total_iters {
        let ratio = curriculum_ratio(step, sched);
        let lr = lr_at(step, cfg);
        let mut inputs = Vec::with_capacity(cfg.batch_clips);
        let mut targets = Vec::with_capacity(cfg.batch_clips);
        for _ in 0..cfg.batch_clips {
            let (s, clip) = pool[rng.index(pool.len())];
            let target = gather_clip(&scenes[s].frames_ldr, &clip)?;
            inputs.push(mask_clip(&target, ratio, cfg, &fb, &mut rng)?);
            targets.push(target);
        }
        let input = ops::concat(&inputs.iter().collect::<Vec<_>>(), 0)?;
        let target = ops::concat(&targets.iter().collect::<Vec<_>>(), 0)?;

        let mut g = Graph::new();
        let bound = params.bind(&mut g, true);
        let x = g.constant(input);
        let y = g.constant(target);
        let pred = phase1_forward(&mut g, x, &bound, model_cfg)?;
        let loss = l1_loss(&mut g, pred, y)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            let failure = Error::NonFinite(alloc::format!("loss {value} at step {step}"));
            return Ok(Phase1Run { params, log, failure: Some(failure) });
        }
        g.backward(loss)?;
        let grads = collect_grads(&g, &bound);
        if let Err(e) = adam_step(&mut params, &grads, &mut state, lr) {
            return Ok(Phase1Run { params, log, failure: Some(e) });
        }
        log.push(LogRow { step, lr, mask_ratio: ratio, l1: value, ssim: None, total: value });
    }
    Ok(Phase1Run { params, log, failure: None })
}
