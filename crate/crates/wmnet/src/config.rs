//! Run configuration: a flat JSON object merged with `--key value`
//! overrides. Every run writes the resolved configuration to
//! `<out>/config.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use wmnet_core::loss::LossConfig;
use wmnet_core::model::ModelConfig;
use wmnet_core::synth::SynthConfig;
use wmnet_core::train::TrainConfig;
use wmnet_core::wavelet::WaveletKind;

use crate::error::{read_file, write_file, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// Dataset root or single scene directory.
    pub data: Option<PathBuf>,
    /// Validation scenes for fine-tuning; without it the last `val_scenes`
    /// scenes of `data` are held out.
    pub val_data: Option<PathBuf>,
    pub val_scenes: usize,
    pub checkpoint: Option<PathBuf>,
    /// Directory of predicted scenes to score instead of running a model.
    pub pred: Option<PathBuf>,
    /// Write reconstructed frames during evaluation.
    pub dump: bool,
    pub peak_nits: f64,

    pub num_scenes: usize,
    pub frames_per_scene: usize,
    pub height: usize,
    pub width: usize,
    pub motion: f64,
    pub gamma: f64,
    pub clip_knee: f64,
    pub flicker: f64,

    pub channels: usize,
    pub num_resblocks: usize,
    pub groups: usize,
    pub frames_per_clip: usize,
    pub memory_len: usize,
    pub temporal_kernel: usize,
    pub use_tmoe: bool,
    pub use_dmm: bool,

    pub total_iters: usize,
    pub lr_halving_period: usize,
    pub base_lr: f64,
    pub batch_clips: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub wavelet: String,
    pub levels: usize,
    pub max_mask_ratio: f64,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,

    /// Low-band mask ratio for the `mask` command.
    pub mask_ratio: f64,
    pub mask_cell: usize,
    /// Which frames the `mask` command reads: `ldr` or `hdr`.
    pub mask_source: String,

    /// Operation whose adjoint the gradient audit deliberately breaks.
    pub fault: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SynthConfig::default();
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            out: PathBuf::from("wmnet-out"),
            seed: 0,
            data: None,
            val_data: None,
            val_scenes: 2,
            checkpoint: None,
            pred: None,
            dump: false,
            peak_nits: 1000.0,
            num_scenes: s.num_scenes,
            frames_per_scene: s.frames_per_scene,
            height: s.height,
            width: s.width,
            motion: s.motion,
            gamma: s.gamma,
            clip_knee: s.clip_knee,
            flicker: s.flicker,
            channels: m.channels,
            num_resblocks: m.num_resblocks,
            groups: m.groups,
            frames_per_clip: m.frames_per_clip,
            memory_len: m.memory_len,
            temporal_kernel: m.temporal_kernel,
            use_tmoe: m.use_tmoe,
            use_dmm: m.use_dmm,
            total_iters: t.total_iters,
            lr_halving_period: t.lr_halving_period,
            base_lr: t.base_lr,
            batch_clips: t.batch_clips,
            patch_size: t.patch_size,
            patch_stride: t.patch_stride,
            wavelet: t.wavelet.name().to_string(),
            levels: t.levels,
            max_mask_ratio: t.max_mask_ratio,
            lambda: t.loss.lambda,
            c1: t.loss.c1,
            c2: t.loss.c2,
            mask_ratio: 0.5,
            mask_cell: 1,
            mask_source: "ldr".to_string(),
            fault: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Converts `--some-key value` / `--some-key=value` pairs into JSON values,
/// typed after the defaults (numbers and booleans are parsed, everything
/// else stays a string).
pub fn parse_overrides(args: &[String]) -> Result<Map<String, Value>> {
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serialises");
    let defaults = defaults.as_object().expect("config is an object");
    let mut out = Map::new();
    let mut i = 0;
    while i < args.len() {
        let flag = args[i]
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("expected --key, found {:?}", args[i])))?;
        let (key, raw) = match flag.split_once('=') {
            Some((k, v)) => (k.replace('-', "_"), v.to_string()),
            None => {
                let v = args.get(i + 1).ok_or_else(|| CliError::Usage(format!("--{flag} needs a value")))?;
                i += 1;
                (flag.replace('-', "_"), v.clone())
            }
        };
        i += 1;
        let value = match defaults.get(&key) {
            None => return Err(CliError::Usage(format!("unknown option --{key}"))),
            Some(Value::Number(_) | Value::Bool(_)) => serde_json::from_str(&raw)
                .map_err(|_| CliError::Usage(format!("--{key}: cannot parse {raw:?}")))?,
            Some(_) => Value::String(raw),
        };
        out.insert(key, value);
    }
    Ok(out)
}

impl RunConfig {
    /// Merges an optional config file with overrides (overrides win).
    pub fn resolve(file: Option<&Path>, overrides: Map<String, Value>) -> Result<Self> {
        let mut merged = match file {
            Some(path) => {
                let bytes = read_file(path)?;
                match serde_json::from_slice::<Value>(&bytes) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(config_err(format!("{}: expected a JSON object", path.display()))),
                    Err(e) => return Err(config_err(format!("{}: {e}", path.display()))),
                }
            }
            None => Map::new(),
        };
        merged.extend(overrides);
        let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| config_err(e.to_string()))?;
        cfg.wavelet_kind()?;
        if !matches!(cfg.mask_source.as_str(), "ldr" | "hdr") {
            return Err(config_err(format!("mask_source must be ldr or hdr, got {:?}", cfg.mask_source)));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    /// Writes `<out>/config.json`.
    pub fn write_resolved(&self) -> Result<()> {
        write_file(&self.out.join("config.json"), self.to_json().as_bytes())
    }

    pub fn wavelet_kind(&self) -> Result<WaveletKind> {
        Ok(self.wavelet.parse()?)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            num_scenes: self.num_scenes,
            frames_per_scene: self.frames_per_scene,
            height: self.height,
            width: self.width,
            seed: self.seed,
            motion: self.motion,
            gamma: self.gamma,
            clip_knee: self.clip_knee,
            flicker: self.flicker,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            channels: self.channels,
            num_resblocks: self.num_resblocks,
            groups: self.groups,
            frames_per_clip: self.frames_per_clip,
            memory_len: self.memory_len,
            temporal_kernel: self.temporal_kernel,
            use_tmoe: self.use_tmoe,
            use_dmm: self.use_dmm,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            total_iters: self.total_iters,
            lr_halving_period: self.lr_halving_period,
            base_lr: self.base_lr,
            batch_clips: self.batch_clips,
            patch_size: self.patch_size,
            patch_stride: self.patch_stride,
            seed: self.seed,
            wavelet: self.wavelet_kind()?,
            levels: self.levels,
            max_mask_ratio: self.max_mask_ratio,
            loss: LossConfig { lambda: self.lambda, c1: self.c1, c2: self.c2 },
        })
    }

    pub fn require_data(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| CliError::Usage("--data DIR is required".into()))
    }
}
