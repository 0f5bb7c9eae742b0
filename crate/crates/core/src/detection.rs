//! DAFT-domain detectors and bit error accounting.
//!
//! All detectors work on a linear model `y = H x + w` where `H` is an ECM,
//! possibly restricted to the data columns of a pilot-bearing frame (see
//! [`data_model`]).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Ecm;
use crate::constellation::Constellation;
use crate::daft::check_len;
use crate::error::{AfdmError, Result};
use crate::estimation::Frame;

pub const ZF_CONDITION_LIMIT: f64 = 1e12;
pub const ML_CANDIDATE_LIMIT: f64 = (1u64 << 20) as f64;
/// Entries below this fraction of the largest magnitude are left out of the
/// message-passing graph; their energy is folded into the noise term.
pub const MP_PRUNE_RATIO: f64 = 1e-6;
const MP_VARIANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Zf,
    Lmmse,
    Mp,
    Ml,
    /// One-tap equalizer on the ECM diagonal (the OFDM baseline).
    SingleTap,
}

impl DetectorKind {
    pub fn label(&self) -> &'static str {
        match self {
            DetectorKind::Zf => "zf",
            DetectorKind::Lmmse => "lmmse",
            DetectorKind::Mp => "mp",
            DetectorKind::Ml => "ml",
            DetectorKind::SingleTap => "single_tap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Receiver's noise variance; a sweep overrides it per SNR point.
    pub noise_variance: f64,
    pub mp_max_iters: usize,
    pub mp_damping: f64,
    pub mp_tol: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Mp,
            noise_variance: 0.0,
            mp_max_iters: 30,
            mp_damping: 0.6,
            mp_tol: 1e-6,
        }
    }
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn with_noise_variance(mut self, noise_variance: f64) -> Self {
        self.noise_variance = noise_variance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(AfdmError::InvalidParams(format!(
                "noise variance {} must be finite and nonnegative",
                self.noise_variance
            )));
        }
        if self.mp_max_iters == 0 {
            return Err(AfdmError::InvalidParams("mp_max_iters must be positive".into()));
        }
        if !(self.mp_damping > 0.0 && self.mp_damping <= 1.0) {
            return Err(AfdmError::InvalidParams(format!(
                "mp_damping {} outside (0, 1]",
                self.mp_damping
            )));
        }
        if !(self.mp_tol > 0.0) {
            return Err(AfdmError::InvalidParams("mp_tol must be positive".into()));
        }
        Ok(())
    }

    /// Rejects ML requests whose enumeration exceeds 2^20 candidates.
    pub fn check_feasible(&self, constellation: &Constellation, data_len: usize) -> Result<()> {
        if self.kind == DetectorKind::Ml {
            ml_candidates(constellation, data_len)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub symbols: Vec<Complex64>,
    pub bits: Vec<bool>,
    /// Unquantized estimate for the linear detectors.
    pub soft: Option<Vec<Complex64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl Detection {
    fn hard(constellation: &Constellation, indices: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(indices.len() * constellation.bits_per_symbol());
        for &i in indices {
            constellation.push_bits(i, &mut bits);
        }
        Self {
            symbols: indices.iter().map(|&i| constellation.points()[i]).collect(),
            bits,
            soft: None,
            iterations: 1,
            converged: true,
        }
    }

    fn from_soft(constellation: &Constellation, soft: Vec<Complex64>) -> Self {
        let indices: Vec<usize> = soft.iter().map(|&z| constellation.nearest(z)).collect();
        Self {
            soft: Some(soft),
            ..Self::hard(constellation, &indices)
        }
    }
}

/// Restricts the ECM to the data columns of `frame` and removes the known
/// pilot contribution from `rx`.
pub fn data_model(ecm: &Ecm, frame: &Frame, rx: &[Complex64]) -> Result<(DMatrix<Complex64>, Vec<Complex64>)> {
    let n = ecm.n();
    check_len(n, frame.len())?;
    check_len(n, rx.len())?;
    let cols = frame.data_indices();
    let h = ecm.matrix.select_columns(cols.iter());
    let known = ecm.apply(&frame.known_part())?;
    let y = rx.iter().zip(&known).map(|(a, b)| a - b).collect();
    Ok((h, y))
}

fn check_model(h: &DMatrix<Complex64>, y: &[Complex64]) -> Result<()> {
    check_len(h.nrows(), y.len())?;
    if h.ncols() == 0 {
        return Err(AfdmError::InvalidParams("channel matrix has no columns".into()));
    }
    Ok(())
}

/// Zero forcing through the pseudo-inverse.
pub fn detect_zf(h: &DMatrix<Complex64>, y: &[Complex64], constellation: &Constellation) -> Result<Detection> {
    check_model(h, y)?;
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= ZF_CONDITION_LIMIT) {
        return Err(AfdmError::Singular { condition });
    }
    let soft = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| AfdmError::InvalidParams(e.to_string()))?;
    Ok(Detection::from_soft(constellation, soft.iter().copied().collect()))
}

/// Linear MMSE, `(H^H H + s2 I)^-1 H^H y`.
pub fn detect_lmmse(
    h: &DMatrix<Complex64>,
    y: &[Complex64],
    noise_variance: f64,
    constellation: &Constellation,
) -> Result<Detection> {
    check_model(h, y)?;
    if !(noise_variance > 0.0) {
        return Err(AfdmError::InvalidParams(format!(
            "LMMSE needs a positive noise variance, got {noise_variance}"
        )));
    }
    let hh = h.adjoint();
    let mut gram = &hh * h;
    for i in 0..gram.nrows() {
        gram[(i, i)] += noise_variance;
    }
    let rhs = &hh * DVector::from_column_slice(y);
    let soft = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or(AfdmError::Singular {
            condition: f64::INFINITY,
        })?,
    };
    Ok(Detection::from_soft(constellation, soft.iter().copied().collect()))
}

/// Divides each observation by the matching diagonal entry. A diagonal whose
/// dynamic range exceeds [`ZF_CONDITION_LIMIT`] is reported as singular.
pub fn detect_single_tap(h: &DMatrix<Complex64>, y: &[Complex64], constellation: &Constellation) -> Result<Detection> {
    check_model(h, y)?;
    if !h.is_square() {
        return Err(AfdmError::InvalidParams("single-tap detection needs a square ECM".into()));
    }
    let diag: Vec<Complex64> = (0..y.len()).map(|m| h[(m, m)]).collect();
    let largest = diag.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let smallest = diag.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
    if smallest * ZF_CONDITION_LIMIT <= largest || largest == 0.0 {
        return Err(AfdmError::Singular {
            condition: largest / smallest,
        });
    }
    let soft = y.iter().zip(&diag).map(|(v, d)| v / d).collect();
    Ok(Detection::from_soft(constellation, soft))
}

fn ml_candidates(constellation: &Constellation, data_len: usize) -> Result<usize> {
    let candidates = (constellation.len() as f64).powi(data_len as i32);
    if candidates > ML_CANDIDATE_LIMIT {
        return Err(AfdmError::EnumerationBound { candidates });
    }
    Ok(candidates as usize)
}

/// Exhaustive minimum-distance search.
pub fn detect_ml(h: &DMatrix<Complex64>, y: &[Complex64], constellation: &Constellation) -> Result<Detection> {
    check_model(h, y)?;
    let nd = h.ncols();
    let total = ml_candidates(constellation, nd)?;
    let q = constellation.len();
    let pts = constellation.points();
    let mut digits = vec![0usize; nd];
    let mut residual = DVector::from_column_slice(y);
    for c in 0..nd {
        residual.axpy(-pts[0], &h.column(c), Complex64::new(1.0, 0.0));
    }
    let mut best = (residual.norm_squared(), digits.clone());
    for _ in 1..total {
        // odometer increment, updating the residual per changed digit
        for (c, d) in digits.iter_mut().enumerate() {
            let old = pts[*d];
            *d = (*d + 1) % q;
            residual.axpy(old - pts[*d], &h.column(c), Complex64::new(1.0, 0.0));
            if *d != 0 {
                break;
            }
        }
        let e = residual.norm_squared();
        if e < best.0 {
            best = (e, digits.clone());
        }
    }
    Ok(Detection::hard(constellation, &best.1))
}

/// Gaussian-approximation message passing over the nonzero entries of `h`.
/// Stops once no variable-to-observation belief moves by more than `mp_tol`.
pub fn detect_mp(
    h: &DMatrix<Complex64>,
    y: &[Complex64],
    noise_variance: f64,
    constellation: &Constellation,
    config: &DetectorConfig,
) -> Result<Detection> {
    check_model(h, y)?;
    config.validate()?;
    let (rows, ncols) = h.shape();
    let q = constellation.len();
    let pts = constellation.points();
    let es = constellation.mean_energy();

    let hmax = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let prune = MP_PRUNE_RATIO * hmax;
    // edges per observation: (column, coefficient); pruned energy joins the noise
    let mut obs_edges: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); rows];
    let mut obs_noise = vec![noise_variance; rows];
    for c in 0..ncols {
        for r in 0..rows {
            let v = h[(r, c)];
            if v.norm() > prune {
                obs_edges[r].push((c, v));
            } else {
                obs_noise[r] += v.norm_sqr() * es;
            }
        }
    }
    // for every variable, (observation, slot in obs_edges[observation])
    let mut var_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ncols];
    for (r, edges) in obs_edges.iter().enumerate() {
        for (slot, &(c, _)) in edges.iter().enumerate() {
            var_edges[c].push((r, slot));
        }
    }

    let uniform = 1.0 / q as f64;
    // msg[r][slot][a]: belief sent from variable to observation r
    let mut msg: Vec<Vec<Vec<f64>>> = obs_edges
        .iter()
        .map(|e| vec![vec![uniform; q]; e.len()])
        .collect();
    let mut beliefs = vec![vec![uniform; q]; ncols];
    let mut iterations = 0;
    let mut converged = false;
    // per-edge Gaussian interference approximation
    let mut mu: Vec<Vec<Complex64>> = obs_edges.iter().map(|e| vec![Complex64::default(); e.len()]).collect();
    let mut var: Vec<Vec<f64>> = obs_edges.iter().map(|e| vec![0.0; e.len()]).collect();
    let mut log_like = vec![0.0; q];

    for it in 0..config.mp_max_iters {
        iterations = it + 1;
        for r in 0..rows {
            let edges = &obs_edges[r];
            let mut mean_tot = Complex64::default();
            let mut var_tot = 0.0;
            let mut parts = Vec::with_capacity(edges.len());
            for (slot, &(_, hv)) in edges.iter().enumerate() {
                let p = &msg[r][slot];
                let m: Complex64 = pts.iter().zip(p).map(|(x, w)| x * *w).sum();
                let e2: f64 = pts.iter().zip(p).map(|(x, w)| x.norm_sqr() * w).sum();
                let v = (e2 - m.norm_sqr()).max(0.0);
                let (pm, pv) = (hv * m, hv.norm_sqr() * v);
                mean_tot += pm;
                var_tot += pv;
                parts.push((pm, pv));
            }
            for (slot, (pm, pv)) in parts.into_iter().enumerate() {
                mu[r][slot] = mean_tot - pm;
                var[r][slot] = (var_tot - pv + obs_noise[r]).max(MP_VARIANCE_FLOOR);
            }
        }

        let mut change: f64 = 0.0;
        for c in 0..ncols {
            // total log-likelihood, then exclude each observation in turn
            let mut contrib = Vec::with_capacity(var_edges[c].len());
            log_like.iter_mut().for_each(|v| *v = 0.0);
            for &(r, slot) in &var_edges[c] {
                let hv = obs_edges[r][slot].1;
                let resid = y[r] - mu[r][slot];
                let terms: Vec<f64> = pts
                    .iter()
                    .map(|&x| -(resid - hv * x).norm_sqr() / var[r][slot])
                    .collect();
                for (acc, t) in log_like.iter_mut().zip(&terms) {
                    *acc += t;
                }
                contrib.push(terms);
            }
            for (e, &(r, slot)) in var_edges[c].iter().enumerate() {
                let ext: Vec<f64> = log_like.iter().zip(&contrib[e]).map(|(a, b)| a - b).collect();
                let fresh = normalize_log(&ext);
                for (old, new) in msg[r][slot].iter_mut().zip(fresh) {
                    let next = config.mp_damping * new + (1.0 - config.mp_damping) * *old;
                    change = change.max((next - *old).abs());
                    *old = next;
                }
            }
            beliefs[c] = normalize_log(&log_like);
        }
        if change < config.mp_tol {
            converged = true;
            break;
        }
    }

    let indices: Vec<usize> = beliefs
        .iter()
        .map(|b| {
            (0..q)
                .max_by(|&i, &j| b[i].total_cmp(&b[j]))
                .expect("non-empty constellation")
        })
        .collect();
    Ok(Detection {
        iterations,
        converged,
        ..Detection::hard(constellation, &indices)
    })
}

fn normalize_log(logp: &[f64]) -> Vec<f64> {
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logp.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Runs the detector named by `config`.
pub fn detect(
    h: &DMatrix<Complex64>,
    y: &[Complex64],
    constellation: &Constellation,
    config: &DetectorConfig,
) -> Result<Detection> {
    config.validate()?;
    match config.kind {
        DetectorKind::Zf => detect_zf(h, y, constellation),
        DetectorKind::Lmmse => detect_lmmse(h, y, config.noise_variance, constellation),
        DetectorKind::Mp => detect_mp(h, y, config.noise_variance, constellation, config),
        DetectorKind::Ml => detect_ml(h, y, constellation),
        DetectorKind::SingleTap => detect_single_tap(h, y, constellation),
    }
}

/// Bit error count with a Wilson score interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// Half-width of the 95% Wilson interval.
    pub fn ci95(&self) -> f64 {
        wilson_half_width(self.errors, self.bits)
    }

    pub fn add(&mut self, other: BerCount) {
        self.errors += other.errors;
        self.bits += other.bits;
    }
}

pub fn ber(tx_bits: &[bool], rx_bits: &[bool]) -> Result<BerCount> {
    check_len(tx_bits.len(), rx_bits.len())?;
    let errors = tx_bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count();
    Ok(BerCount {
        errors: errors as u64,
        bits: tx_bits.len() as u64,
    })
}

pub fn wilson_half_width(successes: u64, trials: u64) -> f64 {
    const Z: f64 = 1.959_963_984_540_054;
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ConstellationKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_symbols(rng: &mut ChaCha8Rng, cons: &Constellation, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| cons.points()[rng.random_range(0..cons.len())]).collect()
    }

    fn mul(h: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
        (h * DVector::from_column_slice(x)).iter().copied().collect()
    }

    #[test]
    fn identity_recovery_all_detectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [ConstellationKind::Bpsk, ConstellationKind::Qpsk, ConstellationKind::Qam16] {
            let cons = Constellation::new(kind);
            let x = random_symbols(&mut rng, &cons, 4);
            let h = DMatrix::<Complex64>::identity(4, 4);
            for det in [DetectorKind::Zf, DetectorKind::Lmmse, DetectorKind::Mp, DetectorKind::Ml, DetectorKind::SingleTap] {
                let cfg = DetectorConfig::new(det).with_noise_variance(1e-12);
                let out = detect(&h, &x, &cons, &cfg).unwrap();
                assert_eq!(out.symbols, x, "{det:?} {kind:?}");
            }
        }
    }

    #[test]
    fn mp_identity_converges_immediately() {
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let x = random_symbols(&mut ChaCha8Rng::seed_from_u64(1), &cons, 8);
        let h = DMatrix::<Complex64>::identity(8, 8);
        let cfg = DetectorConfig::new(DetectorKind::Mp).with_noise_variance(0.01);
        let out = detect(&h, &x, &cons, &cfg).unwrap();
        assert_eq!(out.symbols, x);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn zf_exact_on_random_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let h = random_matrix(&mut rng, 8);
        let x = random_symbols(&mut rng, &cons, 8);
        let out = detect_zf(&h, &mul(&h, &x), &cons).unwrap();
        assert_eq!(out.symbols, x);
    }

    #[test]
    fn zf_flags_faded_subcarrier() {
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let mut h = DMatrix::<Complex64>::identity(4, 4);
        h[(2, 2)] = c(1e-14, 0.0);
        let err = detect_zf(&h, &[c(1.0, 0.0); 4], &cons);
        assert!(matches!(err, Err(AfdmError::Singular { .. })));
    }

    #[test]
    fn lmmse_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let h = random_matrix(&mut rng, 8);
        let y: Vec<Complex64> = (0..8).map(|_| c(rng.random(), rng.random())).collect();
        let s2 = 0.3;
        let soft = detect_lmmse(&h, &y, s2, &cons).unwrap().soft.unwrap();
        let hh = h.adjoint();
        let inner = (&h * &hh + DMatrix::identity(8, 8) * c(s2, 0.0)).try_inverse().unwrap();
        let oracle = hh * inner * DVector::from_column_slice(&y);
        for (a, b) in soft.iter().zip(oracle.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn lmmse_tends_to_zf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let h = random_matrix(&mut rng, 6) + DMatrix::identity(6, 6) * c(3.0, 0.0);
        let y: Vec<Complex64> = (0..6).map(|_| c(rng.random(), rng.random())).collect();
        let a = detect_lmmse(&h, &y, 1e-10, &cons).unwrap().soft.unwrap();
        let b = detect_zf(&h, &y, &cons).unwrap().soft.unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-6);
        }
        assert!(detect_lmmse(&h, &y, 0.0, &cons).is_err());
    }

    /// Second exhaustive search, written independently of the odometer.
    fn brute_force(h: &DMatrix<Complex64>, y: &[Complex64], cons: &Constellation) -> Vec<Complex64> {
        let n = h.ncols();
        let q = cons.len();
        let mut best = (f64::INFINITY, Vec::new());
        for idx in 0..q.pow(n as u32) {
            let x: Vec<Complex64> = (0..n).map(|i| cons.points()[(idx / q.pow(i as u32)) % q]).collect();
            let hx = mul(h, &x);
            let e: f64 = hx.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
            if e < best.0 {
                best = (e, x);
            }
        }
        best.1
    }

    #[test]
    fn ml_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cons = Constellation::new(ConstellationKind::Bpsk);
        for _ in 0..20 {
            let h = random_matrix(&mut rng, 4);
            let y: Vec<Complex64> = (0..4).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            assert_eq!(detect_ml(&h, &y, &cons).unwrap().symbols, brute_force(&h, &y, &cons));
        }
        let qpsk = Constellation::new(ConstellationKind::Qpsk);
        let h = random_matrix(&mut rng, 3);
        let y: Vec<Complex64> = (0..3).map(|_| c(rng.random(), rng.random())).collect();
        assert_eq!(detect_ml(&h, &y, &qpsk).unwrap().symbols, brute_force(&h, &y, &qpsk));
    }

    #[test]
    fn ml_bound_enforced() {
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let h = DMatrix::<Complex64>::identity(11, 11);
        let err = detect_ml(&h, &[c(0.0, 0.0); 11], &cons);
        assert!(matches!(err, Err(AfdmError::EnumerationBound { .. })));
        let cfg = DetectorConfig::new(DetectorKind::Ml);
        assert!(cfg.check_feasible(&cons, 10).is_ok());
        assert!(cfg.check_feasible(&cons, 11).is_err());
    }

    #[test]
    fn single_tap_inverts_diagonal() {
        let cons = Constellation::new(ConstellationKind::Qpsk);
        let x = random_symbols(&mut ChaCha8Rng::seed_from_u64(2), &cons, 4);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5, 0.1), c(-1.0, 0.0), c(0.0, 2.0), c(0.3, -0.3)]));
        assert_eq!(detect_single_tap(&h, &mul(&h, &x), &cons).unwrap().symbols, x);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DetectorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.mp_damping = 0.0;
        assert!(cfg.validate().is_err());
        cfg.mp_damping = 1.0;
        cfg.mp_max_iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ber_counting() {
        let a = vec![true, false, true, true];
        assert_eq!(ber(&a, &a).unwrap().rate(), 0.0);
        let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(ber(&a, &flipped).unwrap().rate(), 1.0);
        let tx = vec![false; 1000];
        let mut rx = tx.clone();
        for i in [3, 500, 999] {
            rx[i] = true;
        }
        let count = ber(&tx, &rx).unwrap();
        assert_eq!(count.errors, 3);
        assert_eq!(count.rate(), 0.003);
        assert!(ber(&a, &a[..3]).is_err());
    }

    #[test]
    fn wilson_reference_values() {
        // 10/100: Wilson 95% interval [0.0552, 0.1744]
        let hw = wilson_half_width(10, 100);
        assert!((hw - 0.5 * (0.174_366 - 0.055_229)).abs() < 1e-5, "{hw}");
        assert_eq!(wilson_half_width(0, 0), 0.0);
        assert!(wilson_half_width(0, 1000) > 0.0);
    }
}
