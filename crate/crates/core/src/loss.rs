//! Differentiable training losses over clips `[T, 3, H, W]`.

use crate::error::{config_err, dim_err, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the structural term in the total loss.
    pub lambda: f64,
    /// SSIM mean stabiliser, `(0.01 L)^2` for dynamic range `L = 1`.
    pub c1: f64,
    /// SSIM variance stabiliser, `(0.03 L)^2`.
    pub c2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 1.0, c1: 0.01 * 0.01, c2: 0.03 * 0.03 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(config_err!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(config_err!("SSIM constants must be positive"));
        }
        Ok(())
    }
}

fn check_pair(g: &Graph, a: Var, b: Var) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(dim_err!("prediction {:?} vs target {:?}", g.shape(a), g.shape(b)));
    }
    Ok(())
}

/// Mean absolute difference over every element.
pub fn l1_loss(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    check_pair(g, pred, target)?;
    let d = g.sub(pred, target)?;
    let d = g.abs(d);
    Ok(g.mean_all(d))
}

/// SSIM from whole-image statistics, one value per `(frame, channel)`.
///
/// Inputs are `[..., H, W]`; the result has the same leading extents with the
/// spatial axes reduced to 1. Variances and covariance use the population
/// (1/N) normalisation.
pub fn ssim_global_map(g: &mut Graph, a: Var, b: Var, cfg: &LossConfig) -> Result<Var> {
    check_pair(g, a, b)?;
    let rank = g.shape(a).len();
    if rank < 2 {
        return Err(dim_err!("SSIM needs at least two spatial axes, got {:?}", g.shape(a)));
    }
    let axes = [rank - 2, rank - 1];
    let mu_a = g.mean_axes(a, &axes)?;
    let mu_b = g.mean_axes(b, &axes)?;
    let da = g.sub(a, mu_a)?;
    let db = g.sub(b, mu_b)?;
    let sq_a = g.mul(da, da)?;
    let var_a = g.mean_axes(sq_a, &axes)?;
    let sq_b = g.mul(db, db)?;
    let var_b = g.mean_axes(sq_b, &axes)?;
    let cross = g.mul(da, db)?;
    let cov = g.mean_axes(cross, &axes)?;

    let mu_ab = g.mul(mu_a, mu_b)?;
    let num1 = g.scale(mu_ab, 2.0);
    let num1 = g.add_scalar(num1, cfg.c1);
    let num2 = g.scale(cov, 2.0);
    let num2 = g.add_scalar(num2, cfg.c2);
    let mu_a2 = g.mul(mu_a, mu_a)?;
    let mu_b2 = g.mul(mu_b, mu_b)?;
    let den1 = g.add(mu_a2, mu_b2)?;
    let den1 = g.add_scalar(den1, cfg.c1);
    let den2 = g.add(var_a, var_b)?;
    let den2 = g.add_scalar(den2, cfg.c2);
    let num = g.mul(num1, num2)?;
    let den = g.mul(den1, den2)?;
    g.div(num, den)
}

/// `1 - mean SSIM` over frames (each frame's SSIM is its channel average).
pub fn ssim_loss(g: &mut Graph, pred: Var, target: Var, cfg: &LossConfig) -> Result<Var> {
    let map = ssim_global_map(g, pred, target, cfg)?;
    let mean = g.mean_all(map);
    let neg = g.scale(mean, -1.0);
    Ok(g.add_scalar(neg, 1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub l1: Var,
    pub ssim: Var,
}

/// `l1 + lambda * (1 - SSIM)`.
pub fn total_loss(g: &mut Graph, pred: Var, target: Var, cfg: &LossConfig) -> Result<LossTerms> {
    let l1 = l1_loss(g, pred, target)?;
    let ssim = ssim_loss(g, pred, target, cfg)?;
    let weighted = g.scale(ssim, cfg.lambda);
    let total = g.add(l1, weighted)?;
    Ok(LossTerms { total, l1, ssim })
}

/// Global SSIM of one `[3, H, W]` frame pair (channel average).
pub fn ssim_global(a: &Tensor, b: &Tensor, cfg: &LossConfig) -> Result<f64> {
    let mut g = Graph::new();
    let (av, bv) = (g.constant(a.detached()), g.constant(b.detached()));
    let map = ssim_global_map(&mut g, av, bv, cfg)?;
    Ok(g.value(map).mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn value(f: impl FnOnce(&mut Graph, Var, Var) -> Result<Var>, a: &Tensor, b: &Tensor) -> f64 {
        let mut g = Graph::new();
        let (av, bv) = (g.constant(a.clone()), g.constant(b.clone()));
        let out = f(&mut g, av, bv).unwrap();
        g.value(out).item()
    }

    #[test]
    fn l1_cases() {
        let a = SeededRng::new(1).uniform_tensor(&[2, 3, 4, 4], 0.0, 1.0);
        assert_eq!(value(l1_loss, &a, &a), 0.0);
        let b = a.map(|v| v + 0.5);
        assert!((value(l1_loss, &b, &a) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_constants() {
        let cfg = LossConfig::default();
        let a = SeededRng::new(2).uniform_tensor(&[3, 8, 8], 0.0, 1.0);
        assert!((ssim_global(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-9);
        let (ca, cb) = (0.3, 0.7);
        let s = ssim_global(&Tensor::full(&[3, 4, 4], ca), &Tensor::full(&[3, 4, 4], cb), &cfg).unwrap();
        let expect = (2.0 * ca * cb + cfg.c1) / (ca * ca + cb * cb + cfg.c1);
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_symmetric_exactly() {
        let cfg = LossConfig::default();
        let mut rng = SeededRng::new(3);
        let a = rng.uniform_tensor(&[3, 8, 8], 0.0, 1.0);
        let b = rng.uniform_tensor(&[3, 8, 8], 0.0, 1.0);
        assert_eq!(ssim_global(&a, &b, &cfg).unwrap(), ssim_global(&b, &a, &cfg).unwrap());
    }

    #[test]
    fn total_with_zero_lambda_is_l1() {
        let cfg = LossConfig { lambda: 0.0, ..LossConfig::default() };
        let mut rng = SeededRng::new(4);
        let a = rng.uniform_tensor(&[2, 3, 4, 4], 0.0, 1.0);
        let b = rng.uniform_tensor(&[2, 3, 4, 4], 0.0, 1.0);
        let total = value(|g, x, y| Ok(total_loss(g, x, y, &cfg)?.total), &a, &b);
        assert_eq!(total, value(l1_loss, &a, &b));
        assert_eq!(value(|g, x, y| Ok(total_loss(g, x, y, &cfg)?.total), &a, &a), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[1, 3, 4, 4]));
        let b = g.constant(Tensor::zeros(&[1, 3, 4, 2]));
        assert!(l1_loss(&mut g, a, b).is_err());
        assert!(LossConfig { lambda: -1.0, ..LossConfig::default() }.validate().is_err());
    }
}
