//! Discrete affine Fourier transform and the chirp-periodic prefix.
//!
//! The inverse transform maps DAFT-domain symbols `X[m]` to time samples
//!
//! ```text
//! x[n] = 1/sqrt(N) * sum_m X[m] * exp(+j2pi (c1 n^2 + c2 m^2 + n m / N))
//! ```
//!
//! and is evaluated as chirp multiply, inverse FFT, chirp multiply. The
//! forward transform uses the conjugate kernel, so the pair is unitary.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{AfdmError, Result};
use crate::params::AfdmParams;

/// `exp(j 2 pi turns)`, reducing the argument first so large quadratic
/// phases keep their precision.
#[inline]
pub fn cis_turns(turns: f64) -> Complex64 {
    let r = turns - turns.round();
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(AfdmError::LengthMismatch { expected, actual })
    }
}

/// Precomputed chirps and FFTs for one parameter set. Immutable; each call
/// allocates its own scratch, so a plan can be shared across threads.
#[derive(Clone)]
pub struct DaftPlan {
    params: AfdmParams,
    /// `exp(j2pi c1 n^2)`
    time_chirp: Vec<Complex64>,
    /// `exp(j2pi c2 m^2)`
    sub_chirp: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DaftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DaftPlan").field("params", &self.params).finish()
    }
}

impl DaftPlan {
    pub fn new(params: AfdmParams) -> Self {
        let n = params.n_sub();
        let quad = |c: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let sq = (i * i) as f64;
                    cis_turns(c * sq)
                })
                .collect()
        };
        let mut planner = FftPlanner::new();
        Self {
            time_chirp: quad(params.c1()),
            sub_chirp: quad(params.c2()),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            params,
        }
    }

    pub fn params(&self) -> &AfdmParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n_sub()
    }

    pub fn time_chirp(&self) -> &[Complex64] {
        &self.time_chirp
    }

    pub fn sub_chirp(&self) -> &[Complex64] {
        &self.sub_chirp
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// DAFT-domain symbols to time samples.
    pub fn idaft(&self, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n(), symbols.len())?;
        let scale = 1.0 / (self.n() as f64).sqrt();
        let mut buf: Vec<Complex64> = symbols
            .iter()
            .zip(&self.sub_chirp)
            .map(|(x, c)| x * c)
            .collect();
        self.inverse.process(&mut buf);
        for (v, c) in buf.iter_mut().zip(&self.time_chirp) {
            *v *= c * scale;
        }
        Ok(buf)
    }

    /// Time samples to DAFT-domain symbols; exact inverse of [`idaft`](Self::idaft).
    pub fn daft(&self, signal: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n(), signal.len())?;
        let scale = 1.0 / (self.n() as f64).sqrt();
        let mut buf: Vec<Complex64> = signal
            .iter()
            .zip(&self.time_chirp)
            .map(|(x, c)| x * c.conj())
            .collect();
        self.forward.process(&mut buf);
        for (v, c) in buf.iter_mut().zip(&self.sub_chirp) {
            *v *= c.conj() * scale;
        }
        Ok(buf)
    }
}

/// Phase factors applied to the copied tail samples, one per prefix position
/// `n = -l_cpp, ..., -1`: `exp(-j2pi c1 (N^2 + 2 N n))`.
pub fn cpp_phase_factors(params: &AfdmParams) -> Vec<Complex64> {
    let n = params.n_sub() as i64;
    let l = params.l_cpp() as i64;
    // c1 (N^2 + 2 N n) = 2Nc1 (N + 2n) / 2; the integer part of 2Nc1 is
    // reduced exactly, and in integer-mapping mode it is all there is
    let s = params.two_n_c1();
    let (q, f) = match params.integer_shift() {
        Some(q) => (q, 0.0),
        None => (s.round() as i64, s - s.round()),
    };
    (-l..0)
        .map(|pos| {
            let m = n + 2 * pos;
            let whole = (q as i128 * m as i128).rem_euclid(2) as f64 / 2.0;
            cis_turns(-(whole + f * m as f64 / 2.0))
        })
        .collect()
}

/// Prepends the chirp-periodic prefix.
pub fn add_cpp(params: &AfdmParams, signal: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = params.n_sub();
    check_len(n, signal.len())?;
    let l = params.l_cpp();
    let mut out = Vec::with_capacity(n + l);
    out.extend(
        signal[n - l..]
            .iter()
            .zip(cpp_phase_factors(params))
            .map(|(x, f)| x * f),
    );
    out.extend_from_slice(signal);
    Ok(out)
}

/// Drops the prefix, keeping the last `N` samples.
pub fn remove_cpp(params: &AfdmParams, rx: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = params.n_sub();
    check_len(n + params.l_cpp(), rx.len())?;
    Ok(rx[params.l_cpp()..].to_vec())
}
