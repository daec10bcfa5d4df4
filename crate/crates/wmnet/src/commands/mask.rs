use wmnet_core::metrics::gamut_hull_area;
use wmnet_core::rng::SeededRng;
use wmnet_core::wavelet::{
    apply_wmim, band_energies, chw_to_hwc, dwt2d_multi, hwc_to_chw, reflect_pad, FilterBank, MaskConfig,
};
use wmnet_core::Tensor;

use super::Tsv;
use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::error::{write_file, Result};
use crate::pfm::write_pfm;

fn padded(x: &Tensor, levels: usize) -> Result<Tensor> {
    let m = 1usize << levels;
    let (h, w) = (x.shape()[0], x.shape()[1]);
    Ok(reflect_pad(x, h.div_ceil(m) * m, w.div_ceil(m) * m)?)
}

/// Masks every frame of the dataset in the wavelet domain. Writes the masked
/// frames with a text sidecar of the low-band mask, `gamut.tsv` (hull area
/// before and after) and `bands.tsv` (per-band energy before and after).
pub fn cmd_mask(cfg: &RunConfig) -> Result<()> {
    let scenes = load_dataset(cfg.require_data()?)?;
    let fb = FilterBank::new(cfg.wavelet_kind()?);
    let base = MaskConfig { levels: cfg.levels, low_freq_ratio: cfg.mask_ratio, mask_cell: cfg.mask_cell, seed: 0 };
    base.validate()?;
    cfg.write_resolved()?;
    let mut gamut = Tsv::new(&["scene", "frame", "area_original", "area_masked"]);
    let mut bands = Tsv::new(&["scene", "frame", "level", "band", "energy_original", "energy_masked"]);
    let mut counter = 0u64;
    for scene in &scenes {
        let frames = if cfg.mask_source == "hdr" { &scene.frames_hdr } else { &scene.frames_ldr };
        for (t, frame) in frames.iter().enumerate() {
            let seed = SeededRng::derived(cfg.seed, counter).next_u64();
            counter += 1;
            let x = chw_to_hwc(frame)?;
            let out = apply_wmim(&x, &MaskConfig { seed, ..base.clone() }, &fb)?;
            let masked = hwc_to_chw(&out.frame)?;
            let dir = cfg.out.join(&scene.scene_id);
            write_pfm(&dir.join(format!("{t:04}.pfm")), &masked)?;
            let mut sidecar = format!("{} {} {}\n", out.mask.height, out.mask.width, cfg.mask_ratio);
            for y in 0..out.mask.height {
                sidecar.extend((0..out.mask.width).map(|x| if out.mask.get(y, x) { '1' } else { '0' }));
                sidecar.push('\n');
            }
            write_file(&dir.join(format!("{t:04}.mask.txt")), sidecar.as_bytes())?;

            gamut.row(&[&scene.scene_id, &t, &gamut_hull_area(frame)?, &gamut_hull_area(&masked)?]);
            let before = band_energies(&dwt2d_multi(&padded(&x, cfg.levels)?, &fb, cfg.levels)?);
            let after = band_energies(&dwt2d_multi(&padded(&out.frame, cfg.levels)?, &fb, cfg.levels)?);
            for ((level, band, e0), (_, _, e1)) in before.iter().zip(&after) {
                bands.row(&[&scene.scene_id, &t, level, &band.name(), e0, e1]);
            }
        }
    }
    gamut.write(&cfg.out.join("gamut.tsv"))?;
    bands.write(&cfg.out.join("bands.tsv"))
}
