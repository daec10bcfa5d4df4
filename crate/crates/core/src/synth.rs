//! Synthetic paired LDR/HDR scenes.
//!
//! HDR frames are smooth drifting colour fields plus a bright moving
//! highlight, in normalised linear light. LDR frames are derived from them by
//! a per-frame exposure flicker, gamma compression, a soft clip above a knee
//! and 8-bit quantisation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{config_err, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// A sequence of paired frames `[3, H, W]` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub frames_ldr: Vec<Tensor>,
    pub frames_hdr: Vec<Tensor>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.frames_hdr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames_hdr.is_empty()
    }

    /// Spatial extents `(H, W)` of the frames.
    pub fn extent(&self) -> (usize, usize) {
        let s = self.frames_hdr[0].shape();
        (s[1], s[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_scenes: usize,
    pub frames_per_scene: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Displacement of the colour field and highlight, in pixels per frame.
    pub motion: f64,
    /// Display gamma of the LDR rendering.
    pub gamma: f64,
    /// Gamma-domain level above which LDR values are soft-clipped.
    pub clip_knee: f64,
    /// Per-frame exposure flicker of the LDR rendering: each frame's linear
    /// values are scaled by `1 + flicker * u`, `u ~ U(-1, 1)`, before
    /// degradation. HDR frames are unaffected.
    pub flicker: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_scenes: 10,
            frames_per_scene: 8,
            height: 32,
            width: 32,
            seed: 0,
            motion: 1.0,
            gamma: 2.2,
            clip_knee: 0.8,
            flicker: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_per_scene < 8 {
            return Err(config_err!("scenes need at least 8 frames, got {}", self.frames_per_scene));
        }
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(8) || !self.width.is_multiple_of(8) {
            return Err(config_err!("frame size {}x{} must be a positive multiple of 8", self.height, self.width));
        }
        if !(self.gamma > 0.0) {
            return Err(config_err!("gamma must be positive"));
        }
        if !(self.clip_knee > 0.0 && self.clip_knee < 1.0) {
            return Err(config_err!("clip knee must lie in (0, 1), got {}", self.clip_knee));
        }
        if !(0.0..1.0).contains(&self.flicker) {
            return Err(config_err!("flicker must lie in [0, 1), got {}", self.flicker));
        }
        Ok(())
    }
}

/// LDR rendering of one linear value: gamma, soft clip, 8-bit quantisation.
pub fn degrade(v: f64, gamma: f64, knee: f64) -> f64 {
    let g = libm::pow(v.clamp(0.0, 1.0), 1.0 / gamma);
    let c = if g <= knee { g } else { knee + (1.0 - knee) * libm::tanh(3.0 * (g - knee) / (1.0 - knee)) };
    libm::round(c * 255.0) / 255.0
}

struct Wave {
    amp: f64,
    fx: f64,
    fy: f64,
    phase: f64,
}

/// Generates scene `index` of the dataset described by `cfg`.
pub fn synth_scene(cfg: &SynthConfig, index: usize) -> Result<Scene> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let mut rng = SeededRng::derived(cfg.seed, index as u64);
    let base: Vec<f64> = (0..3).map(|_| rng.uniform(0.2, 0.35)).collect();
    let waves: Vec<Vec<Wave>> = (0..3)
        .map(|_| {
            (0..3)
                .map(|_| Wave {
                    amp: rng.uniform(0.02, 0.08),
                    fx: rng.uniform(-0.8, 0.8),
                    fy: rng.uniform(-0.8, 0.8),
                    phase: rng.uniform(0.0, TAU),
                })
                .collect()
        })
        .collect();
    let angle = rng.uniform(0.0, TAU);
    let (vx, vy) = (cfg.motion * libm::cos(angle), cfg.motion * libm::sin(angle));
    let (hx, hy) = (rng.uniform(0.2, 0.8) * w as f64, rng.uniform(0.2, 0.8) * h as f64);
    let hangle = rng.uniform(0.0, TAU);
    let (hvx, hvy) = (cfg.motion * libm::cos(hangle), cfg.motion * libm::sin(hangle));
    let radius = 0.25 * h.min(w) as f64;
    let peak = rng.uniform(0.55, 0.7);
    let tint: Vec<f64> = (0..3).map(|_| rng.uniform(0.85, 1.0)).collect();
    let gains: Vec<f64> =
        (0..cfg.frames_per_scene).map(|_| 1.0 + cfg.flicker * rng.uniform(-1.0, 1.0)).collect();

    let mut frames_hdr = Vec::with_capacity(cfg.frames_per_scene);
    let mut frames_ldr = Vec::with_capacity(cfg.frames_per_scene);
    for (t, &gain) in gains.iter().enumerate() {
        let tf = t as f64;
        let (cx, cy) = (hx + hvx * tf, hy + hvy * tf);
        let hdr = Tensor::from_fn(&[3, h, w], |i| {
            let (c, y, x) = (i / (h * w), (i / w) % h, i % w);
            let (px, py) = (x as f64 - vx * tf, y as f64 - vy * tf);
            let mut v = base[c];
            for wave in &waves[c] {
                v += wave.amp * libm::sin(TAU * (wave.fx * px / w as f64 + wave.fy * py / h as f64) + wave.phase);
            }
            let d2 = (x as f64 - cx) * (x as f64 - cx) + (y as f64 - cy) * (y as f64 - cy);
            v += peak * tint[c] * libm::exp(-d2 / (2.0 * radius * radius));
            v.clamp(0.0, 1.0)
        });
        frames_ldr.push(hdr.map(|v| degrade(v * gain, cfg.gamma, cfg.clip_knee)));
        frames_hdr.push(hdr);
    }
    Ok(Scene { scene_id: format!("scene_{index:03}"), frames_ldr, frames_hdr })
}

/// All `cfg.num_scenes` scenes.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<Scene>> {
    (0..cfg.num_scenes).map(|i| synth_scene(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ldr_on_8bit_grid() {
        let s = synth_scene(&SynthConfig::default(), 0).unwrap();
        for f in &s.frames_ldr {
            for &v in f.data() {
                let q = v * 255.0;
                assert!((q - libm::round(q)).abs() < 1e-9);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert_eq!(s.frames_ldr.len(), 8);
        assert_eq!(s.frames_hdr[0].shape(), &[3, 32, 32]);
    }

    #[test]
    fn deterministic_and_distinct() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_scene(&cfg, 3).unwrap(), synth_scene(&cfg, 3).unwrap());
        assert_ne!(synth_scene(&cfg, 3).unwrap(), synth_scene(&cfg, 4).unwrap());
    }

    #[test]
    fn degradation_monotone_and_plateau() {
        let mut prev = -1.0;
        for i in 0..=1000 {
            let v = degrade(i as f64 / 1000.0, 2.2, 0.8);
            assert!(v >= prev);
            prev = v;
        }
        // near-peak values land on the clipped plateau
        assert_eq!(degrade(0.97, 2.2, 0.8), degrade(1.0, 2.2, 0.8));
    }

    #[test]
    fn flicker_scales_ldr_exposure_only() {
        let steady = SynthConfig { flicker: 0.0, ..SynthConfig::default() };
        let s = synth_scene(&steady, 2).unwrap();
        for (l, h) in s.frames_ldr.iter().zip(&s.frames_hdr) {
            assert_eq!(*l, h.map(|v| degrade(v, 2.2, 0.8)));
        }
        let f = synth_scene(&SynthConfig::default(), 2).unwrap();
        assert_eq!(f.frames_hdr, s.frames_hdr);
        assert_ne!(f.frames_ldr, s.frames_ldr);
    }

    #[test]
    fn rejects_short_scenes() {
        let cfg = SynthConfig { frames_per_scene: 4, ..SynthConfig::default() };
        assert!(synth_scene(&cfg, 0).is_err());
    }
}
