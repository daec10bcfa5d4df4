//! Scene directories: `<scene_id>/ldr/NNNN.pfm` and `<scene_id>/hdr/NNNN.pfm`.

use std::path::{Path, PathBuf};

use wmnet_core::synth::Scene;
use wmnet_core::Tensor;

use crate::error::{CliError, Result};
use crate::pfm::{read_pfm, write_pfm};

/// Numbered `.pfm` files of a directory, sorted by frame number.
fn numbered_frames(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pfm") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let index = stem
            .parse::<u64>()
            .map_err(|_| CliError::dataset(&path, "frame files must be named by frame number"))?;
        frames.push((index, path));
    }
    frames.sort();
    Ok(frames)
}

fn load_frames(dir: &Path) -> Result<Vec<Tensor>> {
    numbered_frames(dir)?
        .iter()
        .map(|(_, p)| {
            let t = read_pfm(p)?;
            if t.shape()[0] != 3 {
                return Err(CliError::dataset(p, "expected an RGB frame"));
            }
            Ok(t)
        })
        .collect()
}

/// Loads one scene; the directory name becomes the scene id.
pub fn load_scene_dir(dir: &Path) -> Result<Scene> {
    let (ldr_dir, hdr_dir) = (dir.join("ldr"), dir.join("hdr"));
    let ldr_names: Vec<u64> = numbered_frames(&ldr_dir)?.into_iter().map(|(i, _)| i).collect();
    let hdr_names: Vec<u64> = numbered_frames(&hdr_dir)?.into_iter().map(|(i, _)| i).collect();
    if ldr_names.len() != hdr_names.len() {
        return Err(CliError::dataset(
            dir,
            format!("frame count mismatch: {} LDR vs {} HDR", ldr_names.len(), hdr_names.len()),
        ));
    }
    if ldr_names != hdr_names {
        return Err(CliError::dataset(dir, "LDR and HDR frame numbers differ"));
    }
    if ldr_names.is_empty() {
        return Err(CliError::dataset(dir, "scene has no frames"));
    }
    let frames_ldr = load_frames(&ldr_dir)?;
    let frames_hdr = load_frames(&hdr_dir)?;
    let shape = frames_ldr[0].shape().to_vec();
    if let Some(bad) = frames_ldr.iter().chain(&frames_hdr).position(|f| f.shape() != shape) {
        return Err(CliError::dataset(dir, format!("frame {bad} differs in shape from frame 0 {shape:?}")));
    }
    let scene_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::dataset(dir, "scene directory needs a UTF-8 name"))?
        .to_string();
    Ok(Scene { scene_id, frames_ldr, frames_hdr })
}

/// Loads a single scene directory, or every scene below a dataset root
/// (sorted by name).
pub fn load_dataset(root: &Path) -> Result<Vec<Scene>> {
    if root.join("ldr").is_dir() {
        return Ok(vec![load_scene_dir(root)?]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(root, e))?.path();
        if path.join("ldr").is_dir() {
            dirs.push(path);
        }
    }
    if dirs.is_empty() {
        return Err(CliError::dataset(root, "no scene directories found"));
    }
    dirs.sort();
    dirs.iter().map(|d| load_scene_dir(d)).collect()
}

pub fn frame_name(index: usize) -> String {
    format!("{index:04}.pfm")
}

/// Writes `scene` below `root/<scene_id>/`.
pub fn save_scene_dir(root: &Path, scene: &Scene) -> Result<PathBuf> {
    let dir = root.join(&scene.scene_id);
    for (sub, frames) in [("ldr", &scene.frames_ldr), ("hdr", &scene.frames_hdr)] {
        for (i, f) in frames.iter().enumerate() {
            write_pfm(&dir.join(sub).join(frame_name(i)), f)?;
        }
    }
    Ok(dir)
}
