use alloc::vec;
use alloc::vec::Vec;

use super::filter::FilterBank;
use crate::error::{dim_err, Result};
use crate::ops;
use crate::tensor::Tensor;

/// Subband orientation, named after the separable kernel that produces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// `alpha alpha^T`
    LL,
    /// `alpha beta^T`: low-pass vertically, high-pass horizontally.
    LH,
    /// `beta alpha^T`
    HL,
    /// `beta beta^T`
    HH,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::LL => "LL",
            Band::LH => "LH",
            Band::HL => "HL",
            Band::HH => "HH",
        }
    }
}

/// One decomposition level, each band `[H/2, W/2, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl Subbands {
    pub fn band(&self, b: Band) -> &Tensor {
        match b {
            Band::LL => &self.ll,
            Band::LH => &self.lh,
            Band::HL => &self.hl,
            Band::HH => &self.hh,
        }
    }

    pub fn band_mut(&mut self, b: Band) -> &mut Tensor {
        match b {
            Band::LL => &mut self.ll,
            Band::LH => &mut self.lh,
            Band::HL => &mut self.hl,
            Band::HH => &mut self.hh,
        }
    }

    pub fn energy(&self) -> f64 {
        [&self.ll, &self.lh, &self.hl, &self.hh]
            .iter()
            .map(|t| t.data().iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Zeroes the three high-frequency bands.
    pub fn zero_high(&mut self) {
        for b in [Band::LH, Band::HL, Band::HH] {
            self.band_mut(b).data_mut().fill(0.0);
        }
    }
}

/// Levels `1..=N`; `levels[n - 1]` holds the subbands of level `n`, whose
/// input was the LL band of level `n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub levels: Vec<Subbands>,
}

impl WaveletPyramid {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Low-pass band of the deepest level.
    pub fn deepest_low(&self) -> &Tensor {
        &self.levels.last().expect("non-empty pyramid").ll
    }

    pub fn deepest_low_mut(&mut self) -> &mut Tensor {
        &mut self.levels.last_mut().expect("non-empty pyramid").ll
    }
}

fn hwc(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(dim_err!("expected an [H, W, C] frame, got {:?}", x.shape())),
    }
}

fn plane(x: &Tensor, c: usize) -> Vec<f64> {
    let (_, _, nc) = hwc(x).expect("checked");
    x.data().iter().skip(c).step_by(nc).copied().collect()
}

fn scatter_plane(dst: &mut [f64], src: &[f64], c: usize, nc: usize) {
    for (i, &v) in src.iter().enumerate() {
        dst[i * nc + c] = v;
    }
}

/// Periodic analysis along rows: returns (low, high), each `h x w/2`.
fn analyze_rows(p: &[f64], h: usize, w: usize, fb: &FilterBank) -> (Vec<f64>, Vec<f64>) {
    let half = w / 2;
    let mut lo = vec![0.0; h * half];
    let mut hi = vec![0.0; h * half];
    for y in 0..h {
        let row = &p[y * w..(y + 1) * w];
        for k in 0..half {
            let (mut l, mut s) = (0.0, 0.0);
            for (i, (a, b)) in fb.alpha.iter().zip(&fb.beta).enumerate() {
                let v = row[(2 * k + i) % w];
                l += a * v;
                s += b * v;
            }
            lo[y * half + k] = l;
            hi[y * half + k] = s;
        }
    }
    (lo, hi)
}

/// Periodic analysis along columns: returns (low, high), each `h/2 x w`.
fn analyze_cols(p: &[f64], h: usize, w: usize, fb: &FilterBank) -> (Vec<f64>, Vec<f64>) {
    let half = h / 2;
    let mut lo = vec![0.0; half * w];
    let mut hi = vec![0.0; half * w];
    for k in 0..half {
        for (i, (a, b)) in fb.alpha.iter().zip(&fb.beta).enumerate() {
            let src = &p[((2 * k + i) % h) * w..][..w];
            let (lrow, hrow) = (&mut lo[k * w..(k + 1) * w], &mut hi[k * w..(k + 1) * w]);
            for x in 0..w {
                lrow[x] += a * src[x];
                hrow[x] += b * src[x];
            }
        }
    }
    (lo, hi)
}

/// Adjoint of [`analyze_rows`].
fn synth_rows(lo: &[f64], hi: &[f64], h: usize, w: usize, fb: &FilterBank) -> Vec<f64> {
    let half = w / 2;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for k in 0..half {
            let (l, s) = (lo[y * half + k], hi[y * half + k]);
            for (i, (a, b)) in fb.alpha.iter().zip(&fb.beta).enumerate() {
                out[y * w + (2 * k + i) % w] += a * l + b * s;
            }
        }
    }
    out
}

/// Adjoint of [`analyze_cols`].
fn synth_cols(lo: &[f64], hi: &[f64], h: usize, w: usize, fb: &FilterBank) -> Vec<f64> {
    let half = h / 2;
    let mut out = vec![0.0; h * w];
    for k in 0..half {
        for (i, (a, b)) in fb.alpha.iter().zip(&fb.beta).enumerate() {
            let y = (2 * k + i) % h;
            for x in 0..w {
                out[y * w + x] += a * lo[k * w + x] + b * hi[k * w + x];
            }
        }
    }
    out
}

/// Single-level 2D analysis of an `[H, W, C]` frame (H and W even).
pub fn dwt2d_level(x: &Tensor, fb: &FilterBank) -> Result<Subbands> {
    let (h, w, nc) = hwc(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(dim_err!("DWT needs even extents, got {h}x{w}; pad first"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let n = oh * ow * nc;
    let mut bands = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for c in 0..nc {
        let p = plane(x, c);
        let (rl, rh) = analyze_rows(&p, h, w, fb);
        let (ll, hl) = analyze_cols(&rl, h, ow, fb);
        let (lh, hh) = analyze_cols(&rh, h, ow, fb);
        for (dst, src) in bands.iter_mut().zip([ll, lh, hl, hh]) {
            scatter_plane(dst, &src, c, nc);
        }
    }
    let [ll, lh, hl, hh] = bands;
    let shape = [oh, ow, nc];
    Ok(Subbands {
        ll: Tensor::new(&shape, ll)?,
        lh: Tensor::new(&shape, lh)?,
        hl: Tensor::new(&shape, hl)?,
        hh: Tensor::new(&shape, hh)?,
    })
}

/// Single-level synthesis; exact inverse of [`dwt2d_level`].
pub fn idwt2d_level(bands: &Subbands, fb: &FilterBank) -> Result<Tensor> {
    let shape = bands.ll.shape();
    for b in [&bands.lh, &bands.hl, &bands.hh] {
        if b.shape() != shape {
            return Err(dim_err!("inconsistent subband shapes {:?} vs {:?}", b.shape(), shape));
        }
    }
    let (oh, ow, nc) = hwc(&bands.ll)?;
    let (h, w) = (oh * 2, ow * 2);
    let mut out = vec![0.0; h * w * nc];
    for c in 0..nc {
        let rl = synth_cols(&plane(&bands.ll, c), &plane(&bands.hl, c), h, ow, fb);
        let rh = synth_cols(&plane(&bands.lh, c), &plane(&bands.hh, c), h, ow, fb);
        let p = synth_rows(&rl, &rh, h, w, fb);
        scatter_plane(&mut out, &p, c, nc);
    }
    Tensor::new(&[h, w, nc], out)
}

/// `levels`-deep decomposition, recursing on the LL band.
pub fn dwt2d_multi(x: &Tensor, fb: &FilterBank, levels: usize) -> Result<WaveletPyramid> {
    let (h, w, _) = hwc(x)?;
    if levels == 0 {
        return Err(dim_err!("decomposition depth must be at least 1"));
    }
    let m = 1usize << levels;
    if h % m != 0 || w % m != 0 {
        return Err(dim_err!("{h}x{w} frame is not divisible by 2^{levels}"));
    }
    let mut out = Vec::with_capacity(levels);
    let mut cur = dwt2d_level(x, fb)?;
    for _ in 1..levels {
        let next = dwt2d_level(&cur.ll, fb)?;
        out.push(cur);
        cur = next;
    }
    out.push(cur);
    Ok(WaveletPyramid { levels: out })
}

/// Synthesis from the deepest LL band upward. Intermediate LL bands stored in
/// the pyramid are ignored; they are recomputed from the level below.
pub fn idwt2d_multi(pyr: &WaveletPyramid, fb: &FilterBank) -> Result<Tensor> {
    let mut iter = pyr.levels.iter().rev();
    let deepest = iter.next().ok_or_else(|| dim_err!("empty pyramid"))?;
    let mut low = idwt2d_level(deepest, fb)?;
    for level in iter {
        if low.shape() != level.lh.shape() {
            return Err(dim_err!(
                "reconstructed low band {:?} does not match level bands {:?}",
                low.shape(),
                level.lh.shape()
            ));
        }
        let bands = Subbands {
            ll: low,
            lh: level.lh.clone(),
            hl: level.hl.clone(),
            hh: level.hh.clone(),
        };
        low = idwt2d_level(&bands, fb)?;
    }
    Ok(low)
}

/// Sum of squared coefficients per (level, band). Intermediate LL bands are
/// skipped since their energy is carried by the next level.
pub fn band_energies(pyr: &WaveletPyramid) -> Vec<(usize, Band, f64)> {
    let mut out = Vec::new();
    let depth = pyr.depth();
    for (i, level) in pyr.levels.iter().enumerate() {
        for b in [Band::LL, Band::LH, Band::HL, Band::HH] {
            if b == Band::LL && i + 1 != depth {
                continue;
            }
            let e = level.band(b).data().iter().map(|v| v * v).sum();
            out.push((i + 1, b, e));
        }
    }
    out
}

/// `[C, H, W]` to `[H, W, C]`.
pub fn chw_to_hwc(x: &Tensor) -> Result<Tensor> {
    ops::permute(x, &[1, 2, 0])
}

/// `[H, W, C]` to `[C, H, W]`.
pub fn hwc_to_chw(x: &Tensor) -> Result<Tensor> {
    ops::permute(x, &[2, 0, 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::wavelet::WaveletKind;

    #[test]
    fn constant_frame_haar() {
        let x = Tensor::full(&[4, 6, 3], 0.75);
        let s = dwt2d_level(&x, &FilterBank::haar()).unwrap();
        assert!(s.ll.data().iter().all(|&v| (v - 1.5).abs() < 1e-15));
        for b in [&s.lh, &s.hl, &s.hh] {
            assert!(b.data().iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn two_by_two_block_haar() {
        let (a, b, c, d) = (0.3, -1.2, 2.0, 0.5);
        let x = Tensor::new(&[2, 2, 1], alloc::vec![a, b, c, d]).unwrap();
        let s = dwt2d_level(&x, &FilterBank::haar()).unwrap();
        // explicit kernels: alpha = [1, 1]/sqrt2, beta = [-1, 1]/sqrt2
        assert!((s.ll.item() - (a + b + c + d) / 2.0).abs() < 1e-15);
        assert!((s.lh.item() - (-a + b - c + d) / 2.0).abs() < 1e-15);
        assert!((s.hl.item() - (-a - b + c + d) / 2.0).abs() < 1e-15);
        assert!((s.hh.item() - (a - b - c + d) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn odd_extent_rejected() {
        let x = Tensor::zeros(&[3, 4, 1]);
        assert!(dwt2d_level(&x, &FilterBank::haar()).is_err());
        let x = Tensor::zeros(&[12, 12, 1]);
        assert!(dwt2d_multi(&x, &FilterBank::haar(), 3).is_err());
    }

    #[test]
    fn perfect_reconstruction_and_energy() {
        let mut rng = SeededRng::new(3);
        for kind in WaveletKind::ALL {
            let fb = FilterBank::new(kind);
            let x = rng.uniform_tensor(&[16, 16, 3], -1.0, 1.0);
            let s = dwt2d_level(&x, &fb).unwrap();
            let e0: f64 = x.data().iter().map(|v| v * v).sum();
            assert!((s.energy() - e0).abs() / e0 < 1e-10, "{kind}");
            for n in 1..=3 {
                let pyr = dwt2d_multi(&x, &fb, n).unwrap();
                let y = idwt2d_multi(&pyr, &fb).unwrap();
                assert!(y.max_abs_diff(&x) < 1e-10, "{kind} N={n}");
            }
        }
    }

    #[test]
    fn single_level_pyramid_matches_level() {
        let mut rng = SeededRng::new(5);
        let x = rng.uniform_tensor(&[8, 8, 2], 0.0, 1.0);
        let fb = FilterBank::haar();
        assert_eq!(dwt2d_multi(&x, &fb, 1).unwrap().levels[0], dwt2d_level(&x, &fb).unwrap());
    }

    #[test]
    fn zero_pyramid_gives_zero_frame() {
        let x = Tensor::zeros(&[8, 8, 3]);
        let fb = FilterBank::new(WaveletKind::Db2);
        let pyr = dwt2d_multi(&x, &fb, 3).unwrap();
        assert!(idwt2d_multi(&pyr, &fb).unwrap().data().iter().all(|&v| v == 0.0));
    }
}
