//! Model checkpoints: a directory holding `manifest.txt` and one 64-bit
//! WTNS file per parameter tensor.

use std::fmt::Write as _;
use std::path::Path;

use wmnet_core::model::{ModelConfig, ModelParams};

use crate::error::{read_file, write_file, CliError, Result};
use crate::wtns::{read_wtns, write_wtns, Dtype};

const HEADER: &str = "wmnet-checkpoint 1";

pub fn save_checkpoint(dir: &Path, params: &ModelParams) -> Result<()> {
    let c = &params.config;
    let mut manifest = format!("{HEADER}\n");
    for (key, value) in [
        ("channels", c.channels.to_string()),
        ("num_resblocks", c.num_resblocks.to_string()),
        ("groups", c.groups.to_string()),
        ("frames_per_clip", c.frames_per_clip.to_string()),
        ("memory_len", c.memory_len.to_string()),
        ("temporal_kernel", c.temporal_kernel.to_string()),
        ("use_tmoe", c.use_tmoe.to_string()),
        ("use_dmm", c.use_dmm.to_string()),
    ] {
        writeln!(manifest, "{key} {value}").expect("string write");
    }
    for (name, t) in params.tensors.named() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        writeln!(manifest, "param {name} {}", dims.join("x")).expect("string write");
        write_wtns(&dir.join(format!("{name}.wtns")), t, Dtype::F64)?;
    }
    write_file(&dir.join("manifest.txt"), manifest.as_bytes())
}

pub fn load_checkpoint(dir: &Path) -> Result<ModelParams> {
    let path = dir.join("manifest.txt");
    let text = String::from_utf8(read_file(&path)?).map_err(|_| CliError::dataset(&path, "manifest is not UTF-8"))?;
    let bad = |line: &str| CliError::dataset(&path, format!("bad manifest line {line:?}"));
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(CliError::dataset(&path, "not a wmnet checkpoint"));
    }
    let mut cfg = ModelConfig::default();
    let mut names = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        let (Some(key), Some(value)) = (parts.next(), parts.next()) else { return Err(bad(line)) };
        let num = || value.parse::<usize>().map_err(|_| bad(line));
        let flag = || value.parse::<bool>().map_err(|_| bad(line));
        match key {
            "channels" => cfg.channels = num()?,
            "num_resblocks" => cfg.num_resblocks = num()?,
            "groups" => cfg.groups = num()?,
            "frames_per_clip" => cfg.frames_per_clip = num()?,
            "memory_len" => cfg.memory_len = num()?,
            "temporal_kernel" => cfg.temporal_kernel = num()?,
            "use_tmoe" => cfg.use_tmoe = flag()?,
            "use_dmm" => cfg.use_dmm = flag()?,
            "param" => names.push(value.to_string()),
            _ => return Err(bad(line)),
        }
    }
    let mut params = ModelParams::zeros(cfg)?;
    let expected: Vec<String> = params.tensors.named().into_iter().map(|(n, _)| n).collect();
    if names != expected {
        return Err(CliError::dataset(&path, "parameter list does not match the model configuration"));
    }
    for name in names {
        let t = read_wtns(&dir.join(format!("{name}.wtns")))?;
        params.set(&name, t)?;
    }
    Ok(params)
}
