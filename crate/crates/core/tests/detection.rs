mod common;

use afdm::channel::{add_awgn, build_ecm, NoiseSpec};
use afdm::constellation::{Constellation, ConstellationKind};
use afdm::detection::{
    ber, detect, detect_lmmse, detect_ml, detect_mp, detect_single_tap, detect_zf, DetectorConfig, DetectorKind,
};
use afdm::params::AfdmParams;
use afdm::profile::{complex_gaussian, DdPath, DdProfile};
use afdm::AfdmError;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use common::*;

fn random_symbols(r: &mut rand_chacha::ChaCha8Rng, cons: &Constellation, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| cons.points()[r.random_range(0..cons.len())]).collect()
}

fn apply(h: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    (h * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
}

/// Exhaustive search written out independently: every index vector in base-q.
fn brute_force(h: &DMatrix<Complex64>, y: &[Complex64], cons: &Constellation) -> Vec<Complex64> {
    let n = h.ncols();
    let q = cons.len();
    let mut best = (f64::INFINITY, vec![]);
    for code in 0..q.pow(n as u32) {
        let x: Vec<Complex64> = (0..n).map(|i| cons.points()[(code / q.pow(i as u32)) % q]).collect();
        let d: f64 = apply(h, &x).iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
        if d < best.0 {
            best = (d, x);
        }
    }
    best.1
}

#[test]
fn identity_channel_every_detector() {
    let mut r = rng(30);
    for kind in [ConstellationKind::Bpsk, ConstellationKind::Qpsk, ConstellationKind::Qam16] {
        let cons = Constellation::new(kind);
        let h = DMatrix::<Complex64>::identity(4, 4);
        let x = random_symbols(&mut r, &cons, 4);
        for det in [DetectorKind::Zf, DetectorKind::Lmmse, DetectorKind::Mp, DetectorKind::Ml, DetectorKind::SingleTap] {
            let cfg = DetectorConfig::new(det).with_noise_variance(1e-12);
            let out = detect(&h, &x, &cons, &cfg).unwrap();
            assert_eq!(out.symbols, x, "{det:?} {kind:?}");
            if det == DetectorKind::Mp {
                assert_eq!(out.iterations, 1);
            }
        }
    }
}

#[test]
fn zf_recovers_random_invertible_channel() {
    let mut r = rng(31);
    let cons = Constellation::new(ConstellationKind::Qpsk);
    let h = DMatrix::from_fn(8, 8, |i, j| random_vec(&mut r, 1)[0] + if i == j { c(2.0, 0.0) } else { c(0.0, 0.0) });
    let x = random_symbols(&mut r, &cons, 8);
    let out = detect_zf(&h, &apply(&h, &x), &cons).unwrap();
    assert_eq!(out.symbols, x);
    assert!(max_diff(out.soft.as_ref().unwrap(), &x) < 1e-10);
}

#[test]
fn deep_fade_flagged() {
    let cons = Constellation::new(ConstellationKind::Qpsk);
    let mut h = DMatrix::<Complex64>::identity(4, 4);
    h[(2, 2)] = c(1e-15, 0.0);
    let y = vec![c(1.0, 0.0); 4];
    assert!(matches!(detect_single_tap(&h, &y, &cons), Err(AfdmError::Singular { .. })));
    assert!(matches!(detect_zf(&h, &y, &cons), Err(AfdmError::Singular { .. })));
}

#[test]
fn lmmse_matches_dense_formula() {
    let mut r = rng(32);
    let cons = Constellation::new(ConstellationKind::Qpsk);
    let h = DMatrix::from_fn(8, 8, |_, _| random_vec(&mut r, 1)[0]);
    let y = random_vec(&mut r, 8);
    let s2 = 0.3;
    let hh = h.adjoint();
    let reg = &hh * &h + DMatrix::<Complex64>::identity(8, 8) * c(s2, 0.0);
    let want = reg.try_inverse().unwrap() * &hh * nalgebra::DVector::from_column_slice(&y);
    let got = detect_lmmse(&h, &y, s2, &cons).unwrap();
    assert!(max_diff(got.soft.as_ref().unwrap(), want.as_slice()) < 1e-10);
    // vanishing noise approaches zero forcing
    let zf = detect_zf(&h, &y, &cons).unwrap();
    let lm = detect_lmmse(&h, &y, 1e-10, &cons).unwrap();
    assert!(max_diff(zf.soft.as_ref().unwrap(), lm.soft.as_ref().unwrap()) < 1e-6);
}

#[test]
fn ml_matches_independent_search() {
    let mut r = rng(33);
    for kind in [ConstellationKind::Bpsk, ConstellationKind::Qpsk] {
        let cons = Constellation::new(kind);
        for _ in 0..20 {
            let h = DMatrix::from_fn(4, 4, |_, _| random_vec(&mut r, 1)[0]);
            let x = random_symbols(&mut r, &cons, 4);
            let y: Vec<_> = apply(&h, &x).iter().zip(random_vec(&mut r, 4)).map(|(a, n)| a + n * 0.5).collect();
            assert_eq!(detect_ml(&h, &y, &cons).unwrap().symbols, brute_force(&h, &y, &cons));
        }
    }
}

#[test]
fn ml_feasibility_bound() {
    let cons = Constellation::new(ConstellationKind::Qpsk);
    let cfg = DetectorConfig::new(DetectorKind::Ml);
    assert!(cfg.check_feasible(&cons, 10).is_ok());
    assert!(cfg.check_feasible(&cons, 11).is_err());
    assert!(DetectorConfig::new(DetectorKind::Mp).check_feasible(&cons, 1000).is_ok());
}

fn mp_ml_agreement(snr_db: Option<f64>, seed: u64) -> f64 {
    let mut r = rng(seed);
    let cons = Constellation::new(ConstellationKind::Bpsk);
    let params = AfdmParams::afdm_for_doppler(8, 1, 0, 0.0).unwrap();
    let geometry = DdProfile::new(vec![DdPath::new(c(1.0, 0.0), 0, 0.0), DdPath::new(c(1.0, 0.0), 1, 0.0)]).unwrap();
    let variance = snr_db.map_or(1e-4, |s| 10f64.powf(-s / 10.0));
    let cfg = DetectorConfig::new(DetectorKind::Mp).with_noise_variance(variance);
    let mut agree = 0;
    let frames = 1000;
    for _ in 0..frames {
        let gains = [complex_gaussian(&mut r, 0.5), complex_gaussian(&mut r, 0.5)];
        let h = build_ecm(&geometry.with_gains(&gains).unwrap(), &params).unwrap().matrix;
        let x = random_symbols(&mut r, &cons, 8);
        let mut y = apply(&h, &x);
        if let Some(s) = snr_db {
            y = add_awgn(&y, &NoiseSpec::from_snr_db(s), &mut r);
        }
        let ml = detect_ml(&h, &y, &cons).unwrap();
        let mp = detect_mp(&h, &y, variance, &cons, &cfg).unwrap();
        agree += usize::from(ml.symbols == mp.symbols);
    }
    agree as f64 / frames as f64
}

#[test]
fn mp_agrees_with_ml_noiseless() {
    let rate = mp_ml_agreement(None, 34);
    assert!(rate >= 0.99, "{rate}");
}

#[test]
fn mp_agrees_with_ml_at_high_snr() {
    let rate = mp_ml_agreement(Some(20.0), 35);
    assert!(rate >= 0.99, "{rate}");
}

#[test]
fn ber_counting() {
    let a = vec![true; 1000];
    assert_eq!(ber(&a, &a).unwrap().rate(), 0.0);
    let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
    assert_eq!(ber(&a, &flipped).unwrap().rate(), 1.0);
    let mut three = a.clone();
    for i in [3, 500, 999] {
        three[i] = false;
    }
    assert_eq!(ber(&a, &three).unwrap().rate(), 0.003);
    assert!(ber(&a, &a[..10]).is_err());
}
