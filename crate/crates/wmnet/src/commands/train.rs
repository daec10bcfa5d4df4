use wmnet_core::train::{train_phase1, train_phase2, LogRow};
use wmnet_core::wavelet::CurriculumSchedule;

use super::Tsv;
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::error::{CliError, Result};

fn loss_table(log: &[LogRow]) -> Tsv {
    let mut t = Tsv::new(&["step", "lr", "mask_ratio", "l1", "ssim_loss", "total"]);
    for r in log {
        let ssim = r.ssim.map_or_else(|| "-".to_string(), |v| v.to_string());
        t.row(&[&r.step, &r.lr, &r.mask_ratio, &r.l1, &ssim, &r.total]);
    }
    t
}

/// Phase I: masked self-reconstruction. Writes `loss.tsv` and `checkpoint/`.
/// A non-finite loss still saves the last good weights, then fails.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let tc = cfg.train_config()?;
    tc.validate()?;
    let mc = cfg.model_config();
    mc.validate()?;
    let scenes = load_dataset(cfg.require_data()?)?;
    cfg.write_resolved()?;
    let sched = CurriculumSchedule { total_steps: tc.total_iters, max_ratio: tc.max_mask_ratio };
    let run = train_phase1(&scenes, &mc, &tc, &sched)?;
    loss_table(&run.log).write(&cfg.out.join("loss.tsv"))?;
    save_checkpoint(&cfg.out.join("checkpoint"), &run.params)?;
    match run.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// Phase II: supervised fine-tuning from a Phase I checkpoint. Writes
/// `loss.tsv`, `validation.tsv` and the best weights to `checkpoint/`.
pub fn cmd_finetune(cfg: &RunConfig) -> Result<()> {
    let ckpt = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::Usage("finetune needs --checkpoint DIR from a pretraining run".into()))?;
    let tc = cfg.train_config()?;
    tc.validate()?;
    let mc = cfg.model_config();
    mc.validate()?;
    let pretrained = load_checkpoint(ckpt)?;
    let mut train = load_dataset(cfg.require_data()?)?;
    let val = match &cfg.val_data {
        Some(dir) => load_dataset(dir)?,
        None => {
            if cfg.val_scenes >= train.len() {
                return Err(CliError::Config(format!(
                    "cannot hold out {} of {} scenes for validation",
                    cfg.val_scenes,
                    train.len()
                )));
            }
            train.split_off(train.len() - cfg.val_scenes)
        }
    };
    cfg.write_resolved()?;
    let run = train_phase2(&train, &val, Some(&pretrained), &mc, &tc)?;
    loss_table(&run.log).write(&cfg.out.join("loss.tsv"))?;
    let mut v = Tsv::new(&["step", "psnr"]);
    for row in &run.validation {
        v.row(&[&row.step, &row.psnr]);
    }
    v.write(&cfg.out.join("validation.tsv"))?;
    save_checkpoint(&cfg.out.join("checkpoint"), &run.params)?;
    match run.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
