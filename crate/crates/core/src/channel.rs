//! Doubly dispersive channel, AWGN, and the effective channel matrix (ECM).
//!
//! The time-domain channel is
//!
//! ```text
//! r[n] = sum_p g_p * exp(j2pi nu_p n / N) * s[n - l_p]
//! ```
//!
//! with `n = 0` at the first sample after the prefix. Because the prefix
//! extends every chirp periodically, the DAFT-domain response of a path
//! `(l, nu, g)` with transmit weights `t` and receive weights `r` is
//!
//! ```text
//! H[p, m] = g * exp(j2pi (c2 (m^2 - p^2) + c1 l^2 - l m / N)) * K(m - p + nu - 2 N c1 l)
//! K(theta) = 1/N * sum_n r[n] t[(n - l) mod N] exp(j2pi n theta / N)
//! ```
//!
//! For unshaped frames with integer `2 N c1` and integer Doppler, `K` is a
//! Kronecker delta and each path occupies a single wrapped diagonal.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::daft::{add_cpp, check_len, cis_turns, remove_cpp, DaftPlan};
use crate::error::{AfdmError, Result};
use crate::params::AfdmParams;
use crate::profile::{DdPath, DdProfile};
use crate::rng::{stream_rng, StreamRng};
use crate::window::{apply_window, ShapingWindow, Side};

/// Half-width used when support has to be banded (fractional Doppler or
/// shaped pulses) and the caller gave none.
pub const DEFAULT_SUPPORT_BAND: usize = 2;

fn check_delays(profile: &DdProfile, params: &AfdmParams) -> Result<()> {
    if profile.l_max() > params.l_cpp() {
        return Err(AfdmError::DelayExceedsPrefix {
            delay: profile.l_max(),
            l_cpp: params.l_cpp(),
        });
    }
    Ok(())
}

/// Passes a prefixed frame through the delay-Doppler channel.
pub fn apply_ddc(
    profile: &DdProfile,
    tx: &[Complex64],
    params: &AfdmParams,
) -> Result<Vec<Complex64>> {
    let n = params.n_sub();
    let l_cpp = params.l_cpp();
    check_len(n + l_cpp, tx.len())?;
    check_delays(profile, params)?;
    let nf = n as f64;
    let mut out = vec![Complex64::default(); tx.len()];
    for path in profile.paths() {
        let step = cis_turns(path.doppler / nf);
        let mut rot = cis_turns(-path.doppler * l_cpp as f64 / nf) * path.gain;
        for (i, o) in out.iter_mut().enumerate() {
            if i >= path.delay {
                *o += rot * tx[i - path.delay];
            }
            rot *= step;
            // re-anchor the running phasor to stop drift on long frames
            if i % 64 == 63 {
                let pos = (i + 1) as f64 - l_cpp as f64;
                rot = cis_turns(path.doppler * pos / nf) * path.gain;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Complex noise variance per sample, split evenly over I and Q.
    pub variance: f64,
    /// Label mixed into the stream seed.
    pub label: String,
}

impl NoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(AfdmError::InvalidParams(format!(
                "noise variance must be nonnegative, got {variance}"
            )));
        }
        Ok(Self {
            variance,
            label: "awgn".into(),
        })
    }

    /// `sigma^2 = 10^(-snr_db / 10)` for unit-energy symbols.
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            variance: 10f64.powf(-snr_db / 10.0),
            label: "awgn".into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn stream(&self, master_seed: u64, indices: &[u64]) -> StreamRng {
        stream_rng(master_seed, &self.label, indices)
    }
}

pub fn add_awgn<R: Rng + ?Sized>(
    signal: &[Complex64],
    noise: &NoiseSpec,
    rng: &mut R,
) -> Vec<Complex64> {
    if noise.variance == 0.0 {
        return signal.to_vec();
    }
    let s = (noise.variance / 2.0).sqrt();
    signal
        .iter()
        .map(|&x| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            x + Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Effective DAFT-domain channel matrix with its predicted support.
#[derive(Debug, Clone)]
pub struct Ecm {
    pub matrix: DMatrix<Complex64>,
    pub support: Vec<(usize, usize)>,
    pub params: AfdmParams,
    pub profile_digest: String,
}

impl Ecm {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n(), x.len())?;
        let v = &self.matrix * nalgebra::DVector::from_column_slice(x);
        Ok(v.as_slice().to_vec())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Entries with `|h| > tol * max|h|`.
    pub fn nonzeros(&self, tol: f64) -> Vec<(usize, usize)> {
        let max = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut out = Vec::new();
        for c in 0..self.n() {
            for r in 0..self.n() {
                if self.matrix[(r, c)].norm() > tol * max {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

fn unit(n: usize, m: usize) -> Vec<Complex64> {
    let mut e = vec![Complex64::default(); n];
    e[m] = Complex64::new(1.0, 0.0);
    e
}

/// Noiseless end-to-end chain for one DAFT-domain frame.
pub fn transmit_noiseless(
    plan: &DaftPlan,
    profile: &DdProfile,
    shaping: Option<&ShapingWindow>,
    frame: &[Complex64],
) -> Result<Vec<Complex64>> {
    let params = plan.params();
    let shaped;
    let frame = match shaping {
        Some(w) => {
            shaped = apply_window(plan, w, frame, Side::TxShape)?;
            &shaped[..]
        }
        None => frame,
    };
    let tx = add_cpp(params, &plan.idaft(frame)?)?;
    let rx = apply_ddc(profile, &tx, params)?;
    let y = plan.daft(&remove_cpp(params, &rx)?)?;
    match shaping {
        Some(w) => apply_window(plan, w, &y, Side::RxMatched),
        None => Ok(y),
    }
}

/// ECM built column by column from the noiseless chain.
pub fn build_ecm(profile: &DdProfile, params: &AfdmParams) -> Result<Ecm> {
    build_shaped_ecm(profile, &DaftPlan::new(*params), None)
}

/// ECM of the chain including transmit shaping and the matched filter.
pub fn build_shaped_ecm(
    profile: &DdProfile,
    plan: &DaftPlan,
    shaping: Option<&ShapingWindow>,
) -> Result<Ecm> {
    let params = *plan.params();
    check_delays(profile, &params)?;
    Ok(Ecm {
        matrix: chain_matrix(plan, profile, shaping)?,
        support: default_support(profile, &params, shaping)?,
        params,
        profile_digest: profile.digest(),
    })
}

fn chain_matrix(
    plan: &DaftPlan,
    profile: &DdProfile,
    shaping: Option<&ShapingWindow>,
) -> Result<DMatrix<Complex64>> {
    let n = plan.n();
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    for m in 0..n {
        let col = transmit_noiseless(plan, profile, shaping, &unit(n, m))?;
        matrix.set_column(m, &nalgebra::DVector::from_vec(col));
    }
    Ok(matrix)
}

/// Same matrix as [`build_shaped_ecm`], evaluated from the per-path closed form.
pub fn effective_ecm(
    profile: &DdProfile,
    plan: &DaftPlan,
    shaping: Option<&ShapingWindow>,
) -> Result<Ecm> {
    let params = *plan.params();
    check_delays(profile, &params)?;
    let matrix = ecm_matrix(plan, shaping, profile.paths());
    Ok(Ecm {
        matrix,
        support: default_support(profile, &params, shaping)?,
        params,
        profile_digest: profile.digest(),
    })
}

pub(crate) fn ecm_matrix(
    plan: &DaftPlan,
    shaping: Option<&ShapingWindow>,
    paths: &[DdPath],
) -> DMatrix<Complex64> {
    let n = plan.n();
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    let row_phase: Vec<Complex64> = plan.sub_chirp().iter().map(|c| c.conj()).collect();
    let mut col_phase = vec![Complex64::default(); n];
    for path in paths {
        let table = kernel_table(plan, shaping, path.delay, path.doppler);
        let lead = path.gain * cis_turns(plan.params().c1() * (path.delay * path.delay) as f64);
        for (m, cp) in col_phase.iter_mut().enumerate() {
            *cp = lead * plan.sub_chirp()[m] * cis_turns(-(((path.delay * m) % n) as f64) / n as f64);
        }
        for m in 0..n {
            let cp = col_phase[m];
            let column = &mut matrix.column_mut(m);
            for p in 0..n {
                let d = (m + n - p) % n;
                column[p] += cp * row_phase[p] * table[d];
            }
        }
    }
    matrix
}

/// `K(d + nu - 2 N c1 l)` for `d = 0..N`.
pub(crate) fn kernel_table(
    plan: &DaftPlan,
    shaping: Option<&ShapingWindow>,
    delay: usize,
    doppler: f64,
) -> Vec<Complex64> {
    let n = plan.n();
    let nf = n as f64;
    let phi = doppler - plan.params().two_n_c1() * delay as f64;
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| {
            let u = match shaping {
                Some(w) if !w.is_rectangular() => {
                    let g = w.side_weights();
                    g[i] * g[(i + n - delay % n) % n]
                }
                _ => 1.0,
            };
            cis_turns(i as f64 * phi / nf) * (u / nf)
        })
        .collect();
    plan.fft_inverse(&mut v);
    v
}

/// Unit-modulus factor of a path's contribution to entry `(row, col)`.
pub fn unit_path_phase(params: &AfdmParams, delay: usize, row: usize, col: usize) -> Complex64 {
    let n = params.n_sub();
    let (r, c, l) = (row as f64, col as f64, delay as f64);
    cis_turns(params.c2() * (c * c - r * r) + params.c1() * l * l - ((delay * col) % n) as f64 / n as f64)
}

fn default_support(
    profile: &DdProfile,
    params: &AfdmParams,
    shaping: Option<&ShapingWindow>,
) -> Result<Vec<(usize, usize)>> {
    let exact = params.is_integer_mapping()
        && profile.all_integer_doppler()
        && shaping.is_none_or(|w| w.is_rectangular());
    predict_support(
        profile,
        params,
        if exact { None } else { Some(DEFAULT_SUPPORT_BAND) },
    )
}

/// Signs `(doppler, delay)` of the DAFT-domain shift, measured once from
/// the noiseless chain on probe paths.
pub fn shift_signs() -> (i64, i64) {
    static SIGNS: OnceLock<(i64, i64)> = OnceLock::new();
    *SIGNS.get_or_init(|| {
        let n = 8;
        let params = AfdmParams::new(n, 1.0 / (2.0 * n as f64), 0.0, 1).expect("probe params");
        let probe = |delay: usize, doppler: f64| -> i64 {
            let profile =
                DdProfile::new(vec![DdPath::new(Complex64::new(1.0, 0.0), delay, doppler)])
                    .expect("probe profile");
            let matrix = chain_matrix(&DaftPlan::new(params), &profile, None).expect("probe ecm");
            let col = matrix.column(0);
            if col[1].norm() > 0.5 {
                1
            } else if col[n - 1].norm() > 0.5 {
                -1
            } else {
                panic!("probe path landed off the expected diagonals")
            }
        };
        (probe(0, 1.0), probe(1, 0.0))
    })
}

/// Signed DAFT-domain offset (row minus column) of a path, possibly fractional.
pub fn path_offset(params: &AfdmParams, delay: usize, doppler: f64) -> f64 {
    let (sd, sl) = shift_signs();
    sd as f64 * doppler + sl as f64 * params.two_n_c1() * delay as f64
}

/// Predicts the nonzero entries of the ECM. Exact in integer-mapping mode
/// with integer Dopplers; otherwise each path is widened to a band of
/// `band` rows on each side of its (rounded) centre.
pub fn predict_support(
    profile: &DdProfile,
    params: &AfdmParams,
    band: Option<usize>,
) -> Result<Vec<(usize, usize)>> {
    let exact = params.is_integer_mapping() && profile.all_integer_doppler();
    let half = match (exact, band) {
        (_, Some(b)) => b as i64,
        (true, None) => 0,
        (false, None) => {
            return Err(AfdmError::NotIntegerMapping {
                two_n_c1: params.two_n_c1(),
            })
        }
    };
    let n = params.n_sub() as i64;
    let offsets: BTreeSet<i64> = profile
        .paths()
        .iter()
        .flat_map(|p| {
            let centre = path_offset(params, p.delay, p.doppler).round() as i64;
            (centre - half..=centre + half).map(move |o| o.rem_euclid(n))
        })
        .collect();
    let mut support = Vec::with_capacity(offsets.len() * n as usize);
    for m in 0..n {
        for &o in &offsets {
            support.push((((m + o) % n) as usize, m as usize));
        }
    }
    support.sort_unstable();
    support.dedup();
    Ok(support)
}
