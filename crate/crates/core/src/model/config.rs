use crate::error::{config_err, Result};

/// Network hyper-parameters. Defaults are the desk-scale toy sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Feature channels C.
    pub channels: usize,
    pub num_resblocks: usize,
    /// Residual block groups D feeding the temporal mixture of experts.
    pub groups: usize,
    /// Frames per clip T.
    pub frames_per_clip: usize,
    /// Per-scene memory queue length l.
    pub memory_len: usize,
    /// Temporal extent of the 3D expert kernels.
    pub temporal_kernel: usize,
    /// Phase II uses the temporal mixture of experts (ablation switch).
    pub use_tmoe: bool,
    /// Phase II uses the scene memory (ablation switch).
    pub use_dmm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            num_resblocks: 6,
            groups: 3,
            frames_per_clip: 4,
            memory_len: 2,
            temporal_kernel: 3,
            use_tmoe: true,
            use_dmm: true,
        }
    }
}

impl ModelConfig {
    /// Full-size settings (64 channels, 15 residual blocks, 8-frame clips).
    pub fn full_scale() -> Self {
        Self { channels: 64, num_resblocks: 15, frames_per_clip: 8, ..Self::default() }
    }

    /// Tiny configuration used by the gradient audit.
    pub fn audit() -> Self {
        Self { channels: 4, num_resblocks: 3, frames_per_clip: 2, ..Self::default() }
    }

    /// Channels of the reduced memory features, `C / 2`.
    pub fn reduced_channels(&self) -> usize {
        self.channels / 2
    }

    pub fn blocks_per_group(&self) -> usize {
        self.num_resblocks / self.groups
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels < 2 || !self.channels.is_multiple_of(2) {
            return Err(config_err!("channels must be even and >= 2, got {}", self.channels));
        }
        if self.groups == 0 || self.num_resblocks == 0 || !self.num_resblocks.is_multiple_of(self.groups) {
            return Err(config_err!(
                "{} residual blocks cannot be split into {} groups",
                self.num_resblocks,
                self.groups
            ));
        }
        if self.temporal_kernel.is_multiple_of(2) {
            return Err(config_err!("temporal kernel must be odd, got {}", self.temporal_kernel));
        }
        if self.memory_len == 0 {
            return Err(config_err!("memory length must be at least 1"));
        }
        if self.frames_per_clip == 0 {
            return Err(config_err!("clips need at least one frame"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::full_scale().validate().unwrap();
        ModelConfig::audit().validate().unwrap();
    }

    #[test]
    fn rejects_bad_groups_and_kernel() {
        let c = ModelConfig { num_resblocks: 5, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { temporal_kernel: 2, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { memory_len: 0, ..ModelConfig::default() };
        assert!(c.validate().is_err());
    }
}
