use wmnet_core::loss::{ssim_global, LossConfig};
use wmnet_core::metrics::{delta_e_itp, psnr, ssim_windowed};
use wmnet_core::model::MemoryStore;
use wmnet_core::synth::Scene;
use wmnet_core::train::predict_scene;
use wmnet_core::Tensor;

use super::Tsv;
use crate::checkpoint::load_checkpoint;
use crate::config::RunConfig;
use crate::dataset::{load_dataset, save_scene_dir};
use crate::error::{CliError, Result};

/// Metrics of one predicted frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub psnr: f64,
    pub ssim_global: f64,
    pub ssim_windowed: f64,
    pub delta_e_itp: f64,
    pub clamped: usize,
}

pub fn frame_metrics(pred: &Tensor, target: &Tensor, loss: &LossConfig, peak_nits: f64) -> Result<FrameMetrics> {
    let de = delta_e_itp(pred, target, peak_nits)?;
    Ok(FrameMetrics {
        psnr: psnr(pred, target, 1.0)?,
        ssim_global: ssim_global(pred, target, loss)?,
        ssim_windowed: ssim_windowed(pred, target)?,
        delta_e_itp: de.mean,
        clamped: de.clamped,
    })
}

/// Scores predicted HDR frames against the `data` scenes, writing
/// `metrics.tsv` (one row per frame) and `summary.tsv` (means; an infinite
/// PSNR is written as `inf`). Predictions come from `pred` (scene
/// directories) or from running the `checkpoint` model, whose outputs can be
/// dumped with `dump`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let gt = load_dataset(cfg.require_data()?)?;
    let loss = LossConfig { lambda: cfg.lambda, c1: cfg.c1, c2: cfg.c2 };
    loss.validate()?;
    let preds: Vec<Vec<Tensor>> = match (&cfg.pred, &cfg.checkpoint) {
        (Some(dir), _) => {
            let scenes = load_dataset(dir)?;
            gt.iter()
                .map(|g| {
                    let p = scenes
                        .iter()
                        .find(|s| s.scene_id == g.scene_id)
                        .ok_or_else(|| CliError::dataset(dir, format!("missing scene {}", g.scene_id)))?;
                    Ok(p.frames_hdr.clone())
                })
                .collect::<Result<_>>()?
        }
        (None, Some(ckpt)) => {
            let params = load_checkpoint(ckpt)?;
            gt.iter()
                .map(|s| predict_scene(&params, s, &mut MemoryStore::new(params.config.memory_len)).map_err(Into::into))
                .collect::<Result<_>>()?
        }
        (None, None) => return Err(CliError::Usage("eval needs --pred DIR or --checkpoint DIR".into())),
    };
    cfg.write_resolved()?;

    let mut table = Tsv::new(&["scene", "frame", "psnr", "ssim_global", "ssim_windowed", "delta_e_itp", "clamped"]);
    let mut sums = [0.0; 4];
    let mut count = 0usize;
    for (scene, pred) in gt.iter().zip(&preds) {
        if pred.len() != scene.len() {
            return Err(CliError::Config(format!(
                "scene {}: {} predicted frames for {} targets",
                scene.scene_id,
                pred.len(),
                scene.len()
            )));
        }
        for (t, (p, y)) in pred.iter().zip(&scene.frames_hdr).enumerate() {
            let m = frame_metrics(p, y, &loss, cfg.peak_nits)?;
            table.row(&[&scene.scene_id, &t, &m.psnr, &m.ssim_global, &m.ssim_windowed, &m.delta_e_itp, &m.clamped]);
            for (s, v) in sums.iter_mut().zip([m.psnr, m.ssim_global, m.ssim_windowed, m.delta_e_itp]) {
                *s += v;
            }
            count += 1;
        }
        if cfg.dump && cfg.pred.is_none() {
            let out = Scene { scene_id: scene.scene_id.clone(), frames_ldr: scene.frames_ldr.clone(), frames_hdr: pred.clone() };
            save_scene_dir(&cfg.out.join("pred"), &out)?;
        }
    }
    table.write(&cfg.out.join("metrics.tsv"))?;
    let mut summary = Tsv::new(&["metric", "mean"]);
    for (name, s) in ["psnr", "ssim_global", "ssim_windowed", "delta_e_itp"].iter().zip(sums) {
        summary.row(&[name, &(s / count as f64)]);
    }
    summary.write(&cfg.out.join("summary.tsv"))
}
