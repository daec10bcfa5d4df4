use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{config_err, Error};

/// Supported orthogonal wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaveletKind {
    #[default]
    Haar,
    Db2,
    Sym4,
}

impl WaveletKind {
    pub const ALL: [WaveletKind; 3] = [WaveletKind::Haar, WaveletKind::Db2, WaveletKind::Sym4];

    pub fn name(self) -> &'static str {
        match self {
            WaveletKind::Haar => "haar",
            WaveletKind::Db2 => "db2",
            WaveletKind::Sym4 => "sym4",
        }
    }
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "haar" => Ok(WaveletKind::Haar),
            "db2" => Ok(WaveletKind::Db2),
            "sym4" => Ok(WaveletKind::Sym4),
            other => Err(config_err!("unknown wavelet '{other}' (haar, db2, sym4)")),
        }
    }
}

// Daubechies/symlet reconstruction low-pass coefficients.
const SYM4: [f64; 8] = [
    0.032_223_100_604_042_7,
    -0.012_603_967_262_037_833,
    -0.099_219_543_576_847_22,
    0.297_857_795_605_277_36,
    0.803_738_751_805_916_1,
    0.497_618_667_632_015_45,
    -0.029_635_527_645_998_51,
    -0.075_765_714_789_273_33,
];

/// Orthonormal two-channel filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub kind: WaveletKind,
    /// Low-pass analysis vector.
    pub alpha: Vec<f64>,
    /// High-pass analysis vector, `beta[i] = (-1)^(i+1) alpha[L-1-i]`.
    pub beta: Vec<f64>,
}

impl FilterBank {
    pub fn new(kind: WaveletKind) -> Self {
        let alpha: Vec<f64> = match kind {
            WaveletKind::Haar => {
                let s = core::f64::consts::FRAC_1_SQRT_2;
                alloc::vec![s, s]
            }
            WaveletKind::Db2 => {
                let r3 = libm::sqrt(3.0);
                let d = 4.0 * core::f64::consts::SQRT_2;
                alloc::vec![(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d]
            }
            WaveletKind::Sym4 => SYM4.to_vec(),
        };
        let len = alpha.len();
        let beta = (0..len)
            .map(|i| {
                let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
                sign * alpha[len - 1 - i]
            })
            .collect();
        Self { kind, alpha, beta }
    }

    pub fn haar() -> Self {
        Self::new(WaveletKind::Haar)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Largest deviation from the orthonormality conditions
    /// `|alpha| = |beta| = 1`, `alpha . beta = 0`, and orthogonality of
    /// even shifts.
    pub fn orthonormality_defect(&self) -> f64 {
        let corr = |a: &[f64], b: &[f64], shift: usize| -> f64 {
            a.iter().skip(shift).zip(b).map(|(x, y)| x * y).sum()
        };
        let mut worst: f64 = 0.0;
        worst = worst.max(libm::fabs(corr(&self.alpha, &self.alpha, 0) - 1.0));
        worst = worst.max(libm::fabs(corr(&self.beta, &self.beta, 0) - 1.0));
        worst = worst.max(libm::fabs(corr(&self.alpha, &self.beta, 0)));
        for shift in (2..self.len()).step_by(2) {
            worst = worst.max(libm::fabs(corr(&self.alpha, &self.alpha, shift)));
            worst = worst.max(libm::fabs(corr(&self.beta, &self.beta, shift)));
            worst = worst.max(libm::fabs(corr(&self.alpha, &self.beta, shift)));
            worst = worst.max(libm::fabs(corr(&self.beta, &self.alpha, shift)));
        }
        worst
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        Self::haar()
    }
}
