//! Evaluation metrics on single frames `[3, H, W]` (PSNR also accepts clips).

use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

fn check_pair(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(dim_err!("shape mismatch: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

fn check_frame(a: &Tensor) -> Result<(usize, usize)> {
    match a.shape() {
        &[3, h, w] => Ok((h, w)),
        s => Err(dim_err!("expected a [3, H, W] frame, got {:?}", s)),
    }
}

/// `10 log10(peak^2 / MSE)`; identical inputs give `f64::INFINITY`.
pub fn psnr(pred: &Tensor, target: &Tensor, peak: f64) -> Result<f64> {
    check_pair(pred, target)?;
    let mse = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        / pred.numel() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(peak * peak / mse))
}

/// Side length of the SSIM window.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the Gaussian SSIM window.
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size).map(|i| libm::exp(-(i as f64 - c) * (i as f64 - c) / (2.0 * sigma * sigma))).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Mean of local SSIM over all fully-contained Gaussian windows, averaged
/// over channels, for data in `[0, 1]`.
///
/// Frames narrower than 11 pixels use a window as large as the frame allows.
pub fn ssim_windowed(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_pair(pred, target)?;
    let (h, w) = check_frame(pred)?;
    let size = SSIM_WINDOW.min(h).min(w);
    let win = gaussian_window(size, SSIM_SIGMA);
    let (c1, c2) = (0.01 * 0.01, 0.03 * 0.03);
    let (oh, ow) = (h - size + 1, w - size + 1);
    let mut total = 0.0;
    for ch in 0..3 {
        let a = &pred.data()[ch * h * w..(ch + 1) * h * w];
        let b = &target.data()[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (i, wy) in win.iter().enumerate() {
                    for (j, wx) in win.iter().enumerate() {
                        let k = wy * wx;
                        let (va, vb) = (a[(y + i) * w + x + j], b[(y + i) * w + x + j]);
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
    }
    Ok(total / (3 * oh * ow) as f64)
}

const RGB_TO_LMS: [[f64; 3]; 3] = [
    [1688.0 / 4096.0, 2146.0 / 4096.0, 262.0 / 4096.0],
    [683.0 / 4096.0, 2951.0 / 4096.0, 462.0 / 4096.0],
    [99.0 / 4096.0, 309.0 / 4096.0, 3688.0 / 4096.0],
];

/// SMPTE ST 2084 inverse EOTF for absolute luminance in cd/m^2.
pub fn pq_encode(nits: f64) -> f64 {
    const M1: f64 = 2610.0 / 16384.0;
    const M2: f64 = 2523.0 / 4096.0 * 128.0;
    const C1: f64 = 3424.0 / 4096.0;
    const C2: f64 = 2413.0 / 4096.0 * 32.0;
    const C3: f64 = 2392.0 / 4096.0 * 32.0;
    let y = libm::pow(nits / 10000.0, M1);
    libm::pow((C1 + C2 * y) / (1.0 + C3 * y), M2)
}

/// ICtCp coordinates with the T axis halved (`I, 0.5 Ct, Cp`) for linear
/// BT.2020 RGB given in nits.
pub fn rgb_to_itp(rgb: [f64; 3]) -> [f64; 3] {
    let mut lms = [0.0; 3];
    for (o, row) in lms.iter_mut().zip(RGB_TO_LMS) {
        *o = pq_encode(row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]);
    }
    let [l, m, s] = lms;
    let i = 0.5 * l + 0.5 * m;
    let ct = (6610.0 * l - 13613.0 * m + 7003.0 * s) / 4096.0;
    let cp = (17933.0 * l - 17390.0 * m - 543.0 * s) / 4096.0;
    [i, 0.5 * ct, cp]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEItp {
    /// Mean per-pixel colour difference.
    pub mean: f64,
    /// Number of negative channel values that were clamped to zero.
    pub clamped: usize,
}

/// Mean ΔE_ITP between two linear-light frames, where 1.0 maps to
/// `peak_nits`.
pub fn delta_e_itp(pred: &Tensor, target: &Tensor, peak_nits: f64) -> Result<DeltaEItp> {
    check_pair(pred, target)?;
    let (h, w) = check_frame(pred)?;
    let n = h * w;
    let mut clamped = 0;
    let mut pixel = |t: &Tensor, i: usize| -> [f64; 3] {
        let mut rgb = [0.0; 3];
        for (c, v) in rgb.iter_mut().enumerate() {
            let raw = t.data()[c * n + i];
            if raw < 0.0 {
                clamped += 1;
            }
            *v = raw.max(0.0) * peak_nits;
        }
        rgb
    };
    let mut total = 0.0;
    for i in 0..n {
        let a = rgb_to_itp(pixel(pred, i));
        let b = rgb_to_itp(pixel(target, i));
        let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        total += 720.0 * libm::sqrt(d2);
    }
    Ok(DeltaEItp { mean: total / n as f64, clamped })
}

/// Pixels whose channel sum is below this are left out of the chromaticity
/// projection.
pub const CHROMA_EPS: f64 = 1e-6;

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// One chain of the monotone-chain hull, without its final point.
fn half_hull(points: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut chain: Vec<(f64, f64)> = Vec::new();
    for p in points {
        while chain.len() >= 2 && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= 0.0 {
            chain.pop();
        }
        chain.push(p);
    }
    chain.pop();
    chain
}

/// Area of the convex hull of a point set (monotone chain).
pub fn convex_hull_area(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let mut hull = half_hull(pts.iter().copied());
    hull.extend(half_hull(pts.iter().rev().copied()));
    let mut area = 0.0;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        area += a.0 * b.1 - b.0 * a.1;
    }
    libm::fabs(area) / 2.0
}

/// Convex hull area of the frame's `(R/S, G/S)` chromaticities, `S = R+G+B`.
pub fn gamut_hull_area(frame: &Tensor) -> Result<f64> {
    let (h, w) = check_frame(frame)?;
    let n = h * w;
    let d = frame.data();
    let pts = (0..n)
        .filter_map(|i| {
            let (r, g, b) = (d[i], d[n + i], d[2 * n + i]);
            let s = r + g + b;
            (s >= CHROMA_EPS).then(|| (r / s, g / s))
        })
        .collect();
    Ok(convex_hull_area(pts))
}
