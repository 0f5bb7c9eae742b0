//! DAFT-domain pulse shaping.
//!
//! A shaping window `w[n]` defines the pulse every chirp carries. Acting on a
//! DAFT-domain frame it is the operator
//!
//! ```text
//! X -> conj(L2) * F * diag(g) * F^H * L2 * X,      L2 = exp(j2pi c2 m^2)
//! ```
//!
//! i.e. a `c2`-twisted circular convolution of the frame with the spectrum of
//! the weights `g`. It does not depend on `c1`. Transmit shaping and the
//! receive matched filter each use `g = sqrt(w / mean(w))`, so the cascade has
//! eigenvalues `w / mean(w)` and mean gain one. The pulse seen in the DAFT
//! domain is the window's spectrum, which is what suppresses the spreading of
//! fractional-Doppler paths.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::daft::{check_len, DaftPlan};
use crate::error::{AfdmError, Result};

pub const DEFAULT_CHEBYSHEV_SIDELOBE_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    Hamming,
    DolphChebyshev { sidelobe_db: f64 },
}

impl WindowKind {
    pub fn chebyshev() -> Self {
        WindowKind::DolphChebyshev {
            sidelobe_db: DEFAULT_CHEBYSHEV_SIDELOBE_DB,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WindowKind::Rectangular => "rect",
            WindowKind::Hamming => "hamming",
            WindowKind::DolphChebyshev { .. } => "chebyshev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    TxShape,
    RxMatched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapingWindow {
    kind: WindowKind,
    coefficients: Vec<f64>,
    /// Factor applied to the raw window to reach total energy `N`.
    normalization: f64,
    /// Per-side weights `sqrt(w / mean(w))`.
    side_weights: Vec<f64>,
}

impl ShapingWindow {
    pub fn new(kind: WindowKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(AfdmError::InvalidParams(format!("window length {n} < 2")));
        }
        let raw = match kind {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hamming => hamming(n),
            WindowKind::DolphChebyshev { sidelobe_db } => {
                if !(sidelobe_db.is_finite() && sidelobe_db > 0.0) {
                    return Err(AfdmError::InvalidParams(format!(
                        "Dolph-Chebyshev attenuation must be positive, got {sidelobe_db}"
                    )));
                }
                chebyshev(n, sidelobe_db)
            }
        };
        let energy: f64 = raw.iter().map(|w| w * w).sum();
        let normalization = (n as f64 / energy).sqrt();
        let coefficients: Vec<f64> = raw.iter().map(|w| (w * normalization).max(0.0)).collect();
        let mean = coefficients.iter().sum::<f64>() / n as f64;
        let side_weights = coefficients.iter().map(|w| (w / mean).sqrt()).collect();
        Ok(Self {
            kind,
            coefficients,
            normalization,
            side_weights,
        })
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_rectangular(&self) -> bool {
        matches!(self.kind, WindowKind::Rectangular)
    }

    /// Window coefficients with total energy `N`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Weights applied by each side, `sqrt(w / mean(w))`.
    pub fn side_weights(&self) -> &[f64] {
        &self.side_weights
    }

    /// Eigenvalues of transmit shaping followed by the matched filter over an
    /// identity channel: `w / mean(w)`. Positive, with mean one.
    pub fn cascade_gain(&self) -> Vec<f64> {
        self.side_weights.iter().map(|g| g * g).collect()
    }
}

fn hamming(n: usize) -> Vec<f64> {
    let d = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / d).cos())
        .collect()
}

/// Symmetric Dolph-Chebyshev window built from its equiripple spectrum.
fn chebyshev(n: usize, sidelobe_db: f64) -> Vec<f64> {
    let order = (n - 1) as f64;
    let nf = n as f64;
    let beta = ((10f64.powf(sidelobe_db / 20.0)).acosh() / order).cosh();
    let spectrum: Vec<f64> = (0..n)
        .map(|k| {
            let x = beta * (PI * k as f64 / nf).cos();
            if x > 1.0 {
                (order * x.acosh()).cosh()
            } else if x < -1.0 {
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                sign * (order * (-x).acosh()).cosh()
            } else {
                (order * x.acos()).cos()
            }
        })
        .collect();
    // real part of the DFT of the (phase-shifted, for even n) spectrum
    let dft_re = |i: usize| -> f64 {
        spectrum
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let shift = if n % 2 == 0 { PI * k as f64 / nf } else { 0.0 };
                let ang = shift - 2.0 * PI * (k * i % n) as f64 / nf;
                p * ang.cos()
            })
            .sum()
    };
    let half: Vec<f64>;
    let w: Vec<f64> = if n % 2 == 1 {
        let h = n.div_ceil(2);
        half = (0..h).map(dft_re).collect();
        half[1..].iter().rev().chain(half.iter()).copied().collect()
    } else {
        let h = n / 2 + 1;
        half = (0..h).map(dft_re).collect();
        half[1..h].iter().rev().chain(half[1..h].iter()).copied().collect()
    };
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    w.into_iter().map(|v| v / peak).collect()
}

/// Applies transmit shaping or the receive matched filter to a DAFT-domain
/// frame. Rectangular windows are the identity.
pub fn apply_window(
    plan: &DaftPlan,
    window: &ShapingWindow,
    frame: &[Complex64],
    side: Side,
) -> Result<Vec<Complex64>> {
    let n = plan.n();
    check_len(n, frame.len())?;
    check_len(n, window.len())?;
    if window.is_rectangular() {
        return Ok(frame.to_vec());
    }
    let weights = match side {
        Side::TxShape => window.side_weights(),
        // conjugate of real weights
        Side::RxMatched => window.side_weights(),
    };
    Ok(twisted_circulant(plan, weights, frame))
}

/// Undoes the cascade of [`Side::TxShape`] and [`Side::RxMatched`].
pub fn invert_cascade(
    plan: &DaftPlan,
    window: &ShapingWindow,
    frame: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_len(plan.n(), frame.len())?;
    let inv: Vec<f64> = window.cascade_gain().iter().map(|g| 1.0 / g).collect();
    Ok(twisted_circulant(plan, &inv, frame))
}

fn twisted_circulant(plan: &DaftPlan, weights: &[f64], frame: &[Complex64]) -> Vec<Complex64> {
    let n = plan.n() as f64;
    let sub = plan.sub_chirp();
    let mut buf: Vec<Complex64> = frame.iter().zip(sub).map(|(x, c)| x * c).collect();
    plan.fft_inverse(&mut buf);
    for (v, w) in buf.iter_mut().zip(weights) {
        *v *= *w / n;
    }
    plan.fft_forward(&mut buf);
    for (v, c) in buf.iter_mut().zip(sub) {
        *v *= c.conj();
    }
    buf
}
