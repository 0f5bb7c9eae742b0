#![allow(dead_code)]

use std::f64::consts::PI;

use afdm::profile::{DdPath, DdProfile};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Direct O(N^2) inverse DAFT: x[n] = 1/sqrt(N) sum_m X[m] e^{j2pi(c1 n^2 + c2 m^2 + nm/N)}.
/// Phases are reduced with exact integer arithmetic where possible.
pub fn idaft_direct(x: &[Complex64], c1: f64, c2: f64) -> Vec<Complex64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|t| {
            let s: Complex64 = (0..n)
                .map(|m| {
                    let turns = frac(c1 * (t * t) as f64) + frac(c2 * (m * m) as f64) + ((t * m) % n) as f64 / nf;
                    x[m] * cis(2.0 * PI * turns)
                })
                .sum();
            s / nf.sqrt()
        })
        .collect()
}

/// Direct forward DAFT with the conjugate kernel.
pub fn daft_direct(x: &[Complex64], c1: f64, c2: f64) -> Vec<Complex64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|m| {
            let s: Complex64 = (0..n)
                .map(|t| {
                    let turns = frac(c1 * (t * t) as f64) + frac(c2 * (m * m) as f64) + ((t * m) % n) as f64 / nf;
                    x[t] * cis(-2.0 * PI * turns)
                })
                .sum();
            s / nf.sqrt()
        })
        .collect()
}

fn frac(v: f64) -> f64 {
    v - v.round()
}

/// Unitary DFT, textbook sum.
pub fn dft_direct(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * cis(-2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum::<Complex64>()
                / (n as f64).sqrt()
        })
        .collect()
}

/// Discrete Fresnel transform of OCDM, `Phi(m, n) = e^{-j pi/4}/sqrt(N) e^{j pi (m-n)^2 / N}`, N even.
pub fn dfnt_direct(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|m| {
            let s: Complex64 = (0..n)
                .map(|t| {
                    let d = m as i64 - t as i64;
                    let sq = (d * d) as u64 % (2 * n as u64);
                    x[t] * cis(PI * sq as f64 / nf)
                })
                .sum();
            cis(-PI / 4.0) * s / nf.sqrt()
        })
        .collect()
}

/// Full transmit chain evaluated sample by sample: direct IDAFT, chirp-periodic
/// prefix, delay-Doppler channel `r[i] = sum g e^{j2pi nu (i-L)/N} s[i-l]`,
/// prefix removal, direct DAFT.
pub fn chain_oracle(x: &[Complex64], c1: f64, c2: f64, l_cpp: usize, profile: &DdProfile) -> Vec<Complex64> {
    let n = x.len();
    let nf = n as f64;
    let s = idaft_direct(x, c1, c2);
    let mut tx = Vec::with_capacity(n + l_cpp);
    for pos in -(l_cpp as i64)..0 {
        let p = pos as f64;
        let phase = -2.0 * PI * (frac(c1 * nf * nf) + frac(c1 * 2.0 * nf * p));
        tx.push(s[(n as i64 + pos) as usize] * cis(phase));
    }
    tx.extend_from_slice(&s);
    let mut rx = vec![Complex64::default(); n + l_cpp];
    for path in profile.paths() {
        for (i, r) in rx.iter_mut().enumerate() {
            if i >= path.delay {
                let t = i as f64 - l_cpp as f64;
                *r += path.gain * cis(2.0 * PI * path.doppler * t / nf) * tx[i - path.delay];
            }
        }
    }
    daft_direct(&rx[l_cpp..], c1, c2)
}

/// Distinct integer `(l, k)` cells with complex Gaussian-ish gains.
pub fn random_integer_profile(rng: &mut ChaCha8Rng, paths: usize, l_max: usize, k_max: usize) -> DdProfile {
    let width = 2 * k_max + 1;
    let mut cells: Vec<usize> = (0..(l_max + 1) * width).collect();
    for i in 0..paths {
        let j = rng.random_range(i..cells.len());
        cells.swap(i, j);
    }
    let list = cells[..paths]
        .iter()
        .map(|&cell| {
            let gain = loop {
                let g = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if g.norm() > 0.1 {
                    break g;
                }
            };
            DdPath::new(gain, cell / width, (cell % width) as f64 - k_max as f64)
        })
        .collect();
    DdProfile::new(list).unwrap()
}

pub fn unit(n: usize, m: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::default(); n];
    v[m] = c(1.0, 0.0);
    v
}
