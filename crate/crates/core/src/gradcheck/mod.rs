//! Central finite differences as an independent gradient oracle.

mod audit;

pub use audit::{audit_model, audit_ops, run_audit, AuditEntry, AuditReport};

use alloc::vec::Vec;

use crate::tensor::Tensor;

/// Step used by the audits.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Largest accepted relative error between adjoint and finite differences.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Smallest gradient scale used to normalise errors. Central differences at
/// `h = 1e-4` carry roundoff near `1e-12 |f|`, so gradients below this are in
/// effect compared with absolute tolerance `DEFAULT_TOLERANCE * GRAD_FLOOR`.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Central-difference gradient of a scalar function at `x`:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every element `i`.
pub fn finite_diff_grad(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut probe = x.detached();
    let mut out = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Tensor::new(x.shape(), out).expect("shape preserved")
}

/// Central differences for piecewise-smooth functions.
///
/// `f` returns its value together with the kink pattern of the evaluation
/// (see [`crate::Graph::kink_pattern`]). When the probes `x ± h e_i` land in a
/// different smooth piece than `x`, the step for that element is divided by
/// ten until both probes stay in the piece of `x` (down to `h * 1e-4`).
/// Returns the gradient and the number of elements that needed a smaller
/// step.
pub fn finite_diff_grad_piecewise(
    mut f: impl FnMut(&Tensor) -> (f64, Vec<bool>),
    x: &Tensor,
    h: f64,
) -> (Tensor, usize) {
    let (_, base) = f(x);
    let mut probe = x.detached();
    let mut out = Vec::with_capacity(x.numel());
    let mut refined = 0;
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        let mut step = h;
        let mut value = 0.0;
        for attempt in 0..5 {
            probe.data_mut()[i] = orig + step;
            let (plus, pp) = f(&probe);
            probe.data_mut()[i] = orig - step;
            let (minus, pm) = f(&probe);
            value = (plus - minus) / (2.0 * step);
            if pp == base && pm == base {
                if attempt > 0 {
                    refined += 1;
                }
                break;
            }
            step /= 10.0;
        }
        probe.data_mut()[i] = orig;
        out.push(value);
    }
    (Tensor::new(x.shape(), out).expect("shape preserved"), refined)
}

/// Relative error of an analytic gradient against a numeric one.
///
/// The largest element-wise deviation is normalised by the largest gradient
/// magnitude in either tensor, so entries that are near zero do not blow up
/// the ratio. Two all-zero gradients have error 0.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    relative_error_floored(analytic, numeric, 0.0)
}

/// [`relative_error`] with the normalising scale bounded below by `floor`.
pub fn relative_error_floored(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (&a, &n) in analytic.iter().zip(numeric) {
        diff = diff.max(libm::fabs(a - n));
        scale = scale.max(libm::fabs(a)).max(libm::fabs(n));
    }
    let scale = scale.max(floor);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
