//! Two-phase training: masked self-reconstruction pretraining, then
//! supervised LDR to HDR fine-tuning with the full network.

mod adam;
mod data;
mod phase1;
mod phase2;

pub use adam::{adam_step, OptimState};
pub use data::{crop_patches, gather_clip, patch_origins, stack_frames, unstack_frames, Clip};
pub use phase1::{train_phase1, Phase1Run};
pub use phase2::{evaluate_psnr, predict_scene, train_phase2, Phase2Run, ValidationRow, OUTPUT_BIAS_INIT};

use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::graph::{Graph, Var};
use crate::loss::LossConfig;
use crate::model::Params;
use crate::wavelet::WaveletKind;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_iters: usize,
    /// Iterations between learning-rate halvings.
    pub lr_halving_period: usize,
    pub base_lr: f64,
    /// Clips per optimizer step.
    pub batch_clips: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub seed: u64,
    pub wavelet: WaveletKind,
    /// Wavelet decomposition depth used for masking.
    pub levels: usize,
    /// Final low-frequency mask ratio of the curriculum.
    pub max_mask_ratio: f64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_iters: 2000,
            lr_halving_period: 400,
            base_lr: 2e-4,
            batch_clips: 1,
            patch_size: 16,
            patch_stride: 8,
            seed: 0,
            wavelet: WaveletKind::Haar,
            levels: 3,
            max_mask_ratio: 0.5,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_iters == 0 || self.lr_halving_period == 0 || self.batch_clips == 0 || self.patch_stride == 0 {
            return Err(config_err!("iteration counts, batch size and stride must be positive"));
        }
        if !(self.base_lr > 0.0) {
            return Err(config_err!("learning rate must be positive, got {}", self.base_lr));
        }
        if self.levels == 0 || self.patch_size == 0 || !self.patch_size.is_multiple_of(1 << self.levels) {
            return Err(config_err!(
                "patch size {} must be a positive multiple of 2^{}",
                self.patch_size,
                self.levels
            ));
        }
        if !(0.0..=1.0).contains(&self.max_mask_ratio) {
            return Err(config_err!("mask ratio {} outside [0, 1]", self.max_mask_ratio));
        }
        self.loss.validate()
    }

    /// Iterations between validation passes (a tenth of the run).
    pub fn validation_every(&self) -> usize {
        (self.total_iters / 10).max(1)
    }
}

/// `base_lr * 0.5^floor(step / period)`.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    let halvings = (step / cfg.lr_halving_period).min(1074) as i32;
    cfg.base_lr * libm::pow(0.5, halvings as f64)
}

/// One line of the loss log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub lr: f64,
    pub mask_ratio: f64,
    pub l1: f64,
    /// Structural term `1 - SSIM`; absent in pretraining.
    pub ssim: Option<f64>,
    pub total: f64,
}

/// Gradients of every bound parameter in canonical order (zeros where a
/// parameter did not take part in the loss).
pub(crate) fn collect_grads(g: &Graph, bound: &Params<Var>) -> Vec<Vec<f64>> {
    bound
        .named()
        .into_iter()
        .map(|(_, &v)| match g.grad(v) {
            Some(gr) => gr.to_vec(),
            None => alloc::vec![0.0; g.value(v).numel()],
        })
        .collect()
}
