use wmnet_core::synth::synth_scene;

use crate::config::RunConfig;
use crate::dataset::save_scene_dir;
use crate::error::Result;

/// Writes `num_scenes` synthetic scenes below the output directory.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let sc = cfg.synth_config();
    sc.validate()?;
    cfg.write_resolved()?;
    for i in 0..sc.num_scenes {
        save_scene_dir(&cfg.out, &synth_scene(&sc, i)?)?;
    }
    Ok(())
}
