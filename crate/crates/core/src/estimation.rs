//! Embedded-pilot channel estimation in the DAFT domain.
//!
//! A frame carries one pilot surrounded by zero guards. Each path shifts the
//! pilot to its own DAFT-domain offset, so peaks inside the guard window
//! identify `(delay, Doppler)` pairs directly. Detection is successive. With
//! integer Doppler the strongest residual peak is mapped back to `(l, k)` and
//! removed. With fractional Doppler the search runs over a `(l, ν)` grid of
//! exact path responses: the atom capturing most residual energy is taken,
//! its `ν` refined, and all gains refitted jointly before the next round.
//! The ECM is then rebuilt from the estimated paths by propagating each
//! path's response along its diagonal.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    ecm_matrix, kernel_table, path_offset, predict_support, unit_path_phase, Ecm,
    DEFAULT_SUPPORT_BAND,
};
use crate::daft::{check_len, DaftPlan};
use crate::error::{AfdmError, Result};
use crate::params::AfdmParams;
use crate::profile::{DdPath, DdProfile};
use crate::window::ShapingWindow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    pub pilot_index: usize,
    pub pilot_amplitude: f64,
    pub guard_left: usize,
    pub guard_right: usize,
}

impl PilotConfig {
    pub fn new(
        pilot_index: usize,
        pilot_amplitude: f64,
        guard_left: usize,
        guard_right: usize,
    ) -> Self {
        Self {
            pilot_index,
            pilot_amplitude,
            guard_left,
            guard_right,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.pilot_index >= n {
            return Err(AfdmError::InvalidParams(format!(
                "pilot index {} outside frame of {n}",
                self.pilot_index
            )));
        }
        if !(self.pilot_amplitude.is_finite() && self.pilot_amplitude > 0.0) {
            return Err(AfdmError::InvalidParams(format!(
                "pilot amplitude must be positive, got {}",
                self.pilot_amplitude
            )));
        }
        if self.guard_left + self.guard_right + 1 > n {
            return Err(AfdmError::InvalidParams(format!(
                "guards {}+{} plus pilot exceed frame of {n}",
                self.guard_left, self.guard_right
            )));
        }
        Ok(())
    }

    pub fn data_len(&self, n: usize) -> usize {
        n - 1 - self.guard_left - self.guard_right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolRole {
    Data,
    Pilot,
    Guard,
}

/// DAFT-domain frame with a role label per index.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub symbols: Vec<Complex64>,
    pub roles: Vec<SymbolRole>,
}

impl Frame {
    /// Every index carries data.
    pub fn data_only(symbols: Vec<Complex64>) -> Self {
        let roles = vec![SymbolRole::Data; symbols.len()];
        Self { symbols, roles }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn indices_of(&self, role: SymbolRole) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn data_indices(&self) -> Vec<usize> {
        self.indices_of(SymbolRole::Data)
    }

    pub fn data(&self) -> Vec<Complex64> {
        self.data_indices().into_iter().map(|i| self.symbols[i]).collect()
    }

    /// Frame with the data symbols zeroed (pilot only).
    pub fn known_part(&self) -> Vec<Complex64> {
        self.symbols
            .iter()
            .zip(&self.roles)
            .map(|(s, r)| if *r == SymbolRole::Data { Complex64::default() } else { *s })
            .collect()
    }
}

/// Places the pilot, zero guards (wrapping modulo `N`) and the data in
/// ascending index order.
pub fn build_epa_frame(data: &[Complex64], pilot: &PilotConfig, n: usize) -> Result<Frame> {
    pilot.validate(n)?;
    check_len(pilot.data_len(n), data.len())?;
    let mut roles = vec![SymbolRole::Data; n];
    let mp = pilot.pilot_index;
    roles[mp] = SymbolRole::Pilot;
    for i in 1..=pilot.guard_left {
        roles[(mp + n - i % n) % n] = SymbolRole::Guard;
    }
    for i in 1..=pilot.guard_right {
        roles[(mp + i) % n] = SymbolRole::Guard;
    }
    let mut symbols = vec![Complex64::default(); n];
    symbols[mp] = Complex64::new(pilot.pilot_amplitude, 0.0);
    let mut it = data.iter();
    for (i, role) in roles.iter().enumerate() {
        if *role == SymbolRole::Data {
            symbols[i] = *it.next().expect("data length checked");
        }
    }
    Ok(Frame { symbols, roles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ThresholdRule {
    /// `factor * sigma_hat`. `sigma_hat` comes from path-free guard rows when
    /// the guards are wider than the window, else from the lower quartile of
    /// the unclaimed residual window samples.
    NoiseMultiple { factor: f64 },
    /// `factor * sqrt(noise_variance)` with a known noise level.
    KnownNoise { factor: f64, noise_variance: f64 },
    Absolute { level: f64 },
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::NoiseMultiple { factor: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpaOptions {
    /// Largest delay searched.
    pub max_delay: usize,
    /// Largest integer Doppler searched.
    pub max_doppler: usize,
    /// Refine Doppler to non-integer values.
    pub fractional: bool,
    /// Extra window bins on each side of the nominal offset range.
    pub extension: usize,
    pub threshold: ThresholdRule,
}

impl EpaOptions {
    pub fn integer(max_delay: usize, max_doppler: usize) -> Self {
        Self {
            max_delay,
            max_doppler,
            fractional: false,
            extension: 0,
            threshold: ThresholdRule::default(),
        }
    }

    pub fn fractional(max_delay: usize, max_doppler: usize) -> Self {
        Self {
            fractional: true,
            extension: DEFAULT_SUPPORT_BAND,
            ..Self::integer(max_delay, max_doppler)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate {
    pub delay: usize,
    pub doppler: f64,
    pub gain: Complex64,
    /// DAFT index of the detected peak.
    pub peak_row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpaEstimate {
    /// Sorted by `|gain|`, strongest first.
    pub paths: Vec<PathEstimate>,
    /// Set when energy remained on an already claimed bin, i.e. several
    /// true paths were merged into one estimate.
    pub merged: bool,
    pub threshold: f64,
}

impl EpaEstimate {
    pub fn to_profile(&self) -> Result<DdProfile> {
        DdProfile::new(
            self.paths
                .iter()
                .map(|p| DdPath::new(p.gain, p.delay, p.doppler))
                .collect(),
        )
    }
}

/// Pilot observation window and the offset-to-path inversion table.
struct PilotWindow {
    /// `(signed offset, absolute row)`
    rows: Vec<(i64, usize)>,
    /// Guard rows outside the window, known to be path-free.
    quiet: Vec<usize>,
    candidates: BTreeMap<i64, Vec<(usize, i64)>>,
}

impl PilotWindow {
    fn new(params: &AfdmParams, pilot: &PilotConfig, opts: &EpaOptions) -> Result<Self> {
        if !params.is_integer_mapping() {
            return Err(AfdmError::NotIntegerMapping {
                two_n_c1: params.two_n_c1(),
            });
        }
        let n = params.n_sub() as i64;
        let km = opts.max_doppler as i64;
        let mut candidates: BTreeMap<i64, Vec<(usize, i64)>> = BTreeMap::new();
        for l in 0..=opts.max_delay {
            for k in -km..=km {
                let o = path_offset(params, l, k as f64).round() as i64;
                candidates.entry(o).or_default().push((l, k));
            }
        }
        let lo = *candidates.keys().next().expect("non-empty") - opts.extension as i64;
        let hi = *candidates.keys().last().expect("non-empty") + opts.extension as i64;
        if hi - lo + 1 > n {
            return Err(AfdmError::InvalidParams(format!(
                "pilot window of {} bins exceeds N = {n}",
                hi - lo + 1
            )));
        }
        let mp = pilot.pilot_index as i64;
        let rows = (lo..=hi).map(|o| (o, (mp + o).rem_euclid(n) as usize)).collect();
        // rows no data symbol can reach through any window offset
        let (gl, gr) = (pilot.guard_left as i64, pilot.guard_right as i64);
        let quiet = (hi - gl..=lo + gr)
            .filter(|o| *o < lo || *o > hi)
            .map(|o| (mp + o).rem_euclid(n) as usize)
            .collect();
        Ok(Self {
            rows,
            quiet,
            candidates,
        })
    }

    fn invert(&self, offset: i64) -> Result<Option<(usize, i64)>> {
        match self.candidates.get(&offset).map(Vec::as_slice) {
            None | Some([]) => Ok(None),
            Some([one]) => Ok(Some(*one)),
            Some([a, b, ..]) => Err(AfdmError::AmbiguousOffset {
                offset,
                l_a: a.0,
                k_a: a.1,
                l_b: b.0,
                k_b: b.1,
            }),
        }
    }
}

/// Pilot response of unit-gain paths, restricted to the window rows.
struct ResponseModel<'a> {
    plan: &'a DaftPlan,
    shaping: Option<&'a ShapingWindow>,
    pilot: &'a PilotConfig,
    rows: Vec<usize>,
}

impl ResponseModel<'_> {
    fn response(&self, delay: usize, doppler: f64) -> Vec<Complex64> {
        let n = self.plan.n();
        let mp = self.pilot.pilot_index;
        let table = kernel_table(self.plan, self.shaping, delay, doppler);
        let amp = self.pilot.pilot_amplitude;
        self.rows
            .iter()
            .map(|&row| {
                let d = (mp + n - row) % n;
                unit_path_phase(self.plan.params(), delay, row, mp) * table[d] * amp
            })
            .collect()
    }

    /// Least-squares gain and captured energy `|v^H r|^2 / |v|^2`.
    fn fit(&self, delay: usize, doppler: f64, residual: &[Complex64]) -> (Complex64, f64, Vec<Complex64>) {
        let v = self.response(delay, doppler);
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let vr: Complex64 = v.iter().zip(residual).map(|(a, b)| a.conj() * b).sum();
        if vv == 0.0 {
            return (Complex64::default(), 0.0, v);
        }
        (vr / vv, vr.norm_sqr() / vv, v)
    }

    /// Golden-section search for the Doppler maximising the captured energy.
    fn refine_doppler(&self, delay: usize, lo: f64, hi: f64, residual: &[Complex64]) -> f64 {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let score = |nu: f64| self.fit(delay, nu, residual).1;
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let (mut f1, mut f2) = (score(x1), score(x2));
        while b - a > 1e-4 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = score(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = score(x1);
            }
        }
        0.5 * (a + b)
    }
}

/// Noise standard deviation from the lower quartile of `|r|^2` samples, which
/// stays unbiased while up to three quarters of the samples carry paths.
fn noise_sigma(power: &mut [f64]) -> f64 {
    if power.is_empty() {
        return 0.0;
    }
    power.sort_by(f64::total_cmp);
    let q = power[(power.len() - 1) / 4];
    (q / (4.0f64 / 3.0).ln()).sqrt()
}

type Detected = (Vec<(usize, f64, usize)>, Vec<Complex64>, bool, f64);

/// Peak picking on the integer DAFT grid: every peak above the threshold is
/// inverted to its unique `(l, k)`.
fn detect_integer(
    window: &PilotWindow,
    observed: &[Complex64],
    level: &dyn Fn(&mut dyn Iterator<Item = f64>) -> f64,
) -> Result<Detected> {
    let mut residual = observed.to_vec();
    let mut claimed: BTreeSet<usize> = BTreeSet::new();
    let mut excluded: BTreeSet<usize> = BTreeSet::new();
    let mut found = Vec::new();
    let mut gains = Vec::new();
    let mut merged = false;
    let mut threshold = 0.0;
    for _ in 0..window.rows.len() {
        let mut free = (0..residual.len())
            .filter(|i| !claimed.contains(i) && !excluded.contains(i))
            .map(|i| residual[i].norm_sqr())
            .peekable();
        if free.peek().is_none() {
            break;
        }
        threshold = level(&mut free);
        let best = (0..residual.len())
            .filter(|i| !excluded.contains(i))
            .max_by(|&a, &b| residual[a].norm().total_cmp(&residual[b].norm()))
            .expect("window non-empty");
        if residual[best].norm() < threshold {
            break;
        }
        if claimed.contains(&best) {
            merged = true;
            excluded.insert(best);
            continue;
        }
        let Some((delay, k)) = window.invert(window.rows[best].0)? else {
            excluded.insert(best);
            continue;
        };
        claimed.insert(best);
        found.push((delay, k as f64, best));
        gains.push(residual[best]);
        residual[best] = Complex64::default();
    }
    Ok((found, gains, merged, threshold))
}

/// Grid step of the Doppler dictionary used for fractional detection.
const DOPPLER_GRID_STEP: f64 = 0.125;

/// Greedy matching pursuit over a `(delay, Doppler)` dictionary: each round
/// takes the atom capturing the most residual energy if that energy clears
/// the threshold, refines its Doppler, and refits all gains jointly.
fn detect_fractional(
    model: &ResponseModel<'_>,
    window: &PilotWindow,
    observed: &[Complex64],
    opts: &EpaOptions,
    level: &dyn Fn(&mut dyn Iterator<Item = f64>) -> f64,
) -> Detected {
    let nu_max = opts.max_doppler as f64;
    let steps = (2.0 * nu_max / DOPPLER_GRID_STEP).round() as usize;
    let mut atoms: Vec<(usize, f64, Vec<Complex64>, f64)> = Vec::new();
    for l in 0..=opts.max_delay {
        for i in 0..=steps {
            let nu = -nu_max + i as f64 * DOPPLER_GRID_STEP;
            let v = model.response(l, nu);
            let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if vv > 0.0 {
                atoms.push((l, nu, v, vv));
            }
        }
    }
    let max_paths = window.candidates.values().map(Vec::len).sum::<usize>();
    let mut found: Vec<(usize, f64, usize)> = Vec::new();
    let mut gains: Vec<Complex64> = Vec::new();
    let mut residual = observed.to_vec();
    let mut merged = false;
    let mut threshold = 0.0;
    while found.len() < max_paths {
        threshold = level(&mut residual.iter().map(|z| z.norm_sqr()));
        let Some((l, nu, energy)) = atoms
            .iter()
            .map(|(l, nu, v, vv)| {
                let vr: Complex64 = v.iter().zip(&residual).map(|(a, b)| a.conj() * b).sum();
                (*l, *nu, vr.norm_sqr() / vv)
            })
            .max_by(|a, b| a.2.total_cmp(&b.2))
        else {
            break;
        };
        if energy < threshold * threshold {
            break;
        }
        let nu = model.refine_doppler(
            l,
            (nu - DOPPLER_GRID_STEP).max(-nu_max),
            (nu + DOPPLER_GRID_STEP).min(nu_max),
            &residual,
        );
        if found.iter().any(|&(fl, fnu, _)| fl == l && (fnu - nu).abs() < 0.5) {
            merged = true;
        }
        found.push((l, nu, peak_position(model, window, l, nu)));
        gains = joint_gains(model, observed, &found);
        residual = observed.to_vec();
        for (&(l, nu, _), g) in found.iter().zip(&gains) {
            for (r, v) in residual.iter_mut().zip(model.response(l, nu)) {
                *r -= g * v;
            }
        }
    }
    (found, gains, merged, threshold)
}

fn peak_position(model: &ResponseModel<'_>, window: &PilotWindow, delay: usize, doppler: f64) -> usize {
    let o = path_offset(model.plan.params(), delay, doppler).round() as i64;
    window
        .rows
        .iter()
        .position(|&(wo, _)| wo == o)
        .unwrap_or_else(|| if o < window.rows[0].0 { 0 } else { window.rows.len() - 1 })
}

/// Least-squares gains of the given paths against the observation.
fn joint_gains(model: &ResponseModel<'_>, observed: &[Complex64], found: &[(usize, f64, usize)]) -> Vec<Complex64> {
    let cols: Vec<Vec<Complex64>> = found.iter().map(|&(d, nu, _)| model.response(d, nu)).collect();
    let v = DMatrix::from_fn(observed.len(), cols.len(), |r, c| cols[c][r]);
    let vh = v.adjoint();
    let rhs = &vh * DVector::from_column_slice(observed);
    match (&vh * &v).lu().solve(&rhs) {
        Some(sol) => sol.iter().copied().collect(),
        None => found
            .iter()
            .map(|&(d, nu, _)| model.fit(d, nu, observed).0)
            .collect(),
    }
}

/// Coordinate-wise Doppler refinement of each path against the others' fits.
fn refine_all(
    model: &ResponseModel<'_>,
    observed: &[Complex64],
    opts: &EpaOptions,
    found: &mut [(usize, f64, usize)],
    gains: &mut [Complex64],
    sweeps: usize,
) {
    let nu_max = opts.max_doppler as f64;
    for _ in 0..sweeps {
        for i in 0..found.len() {
            let (delay, nu, _) = found[i];
            let mut r = observed.to_vec();
            for (j, &(dj, nj, _)) in found.iter().enumerate() {
                if j != i {
                    for (x, vi) in r.iter_mut().zip(model.response(dj, nj)) {
                        *x -= gains[j] * vi;
                    }
                }
            }
            let nu = model.refine_doppler(delay, (nu - 0.25).max(-nu_max), (nu + 0.25).min(nu_max), &r);
            found[i].1 = nu;
            gains[i] = model.fit(delay, nu, &r).0;
        }
    }
}

/// Detects paths from the pilot region of a received DAFT-domain frame (after
/// the matched filter, if any).
pub fn estimate_paths_epa(
    plan: &DaftPlan,
    shaping: Option<&ShapingWindow>,
    rx_frame: &[Complex64],
    pilot: &PilotConfig,
    opts: &EpaOptions,
) -> Result<EpaEstimate> {
    let params = plan.params();
    let n = params.n_sub();
    check_len(n, rx_frame.len())?;
    pilot.validate(n)?;
    let window = PilotWindow::new(params, pilot, opts)?;
    let model = ResponseModel {
        plan,
        shaping,
        pilot,
        rows: window.rows.iter().map(|&(_, r)| r).collect(),
    };
    let observed: Vec<Complex64> = model.rows.iter().map(|&r| rx_frame[r]).collect();
    let peak0 = observed.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = 1e-6 * peak0;
    let quiet_sigma = (!window.quiet.is_empty()).then(|| {
        let mut p: Vec<f64> = window.quiet.iter().map(|&r| rx_frame[r].norm_sqr()).collect();
        noise_sigma(&mut p)
    });
    // amplitude threshold given the residual samples still unexplained
    let level = |samples: &mut dyn Iterator<Item = f64>| -> f64 {
        match opts.threshold {
            ThresholdRule::NoiseMultiple { factor } => match quiet_sigma {
                Some(sigma) => factor * sigma,
                None => factor * noise_sigma(&mut samples.collect::<Vec<_>>()),
            },
            ThresholdRule::KnownNoise {
                factor,
                noise_variance,
            } => factor * noise_variance.sqrt(),
            ThresholdRule::Absolute { level } => level,
        }
        .max(floor)
    };

    let (mut found, mut gains, merged, threshold) = if opts.fractional {
        detect_fractional(&model, &window, &observed, opts, &level)
    } else {
        detect_integer(&window, &observed, &level)?
    };
    if found.is_empty() {
        return Err(AfdmError::NoDetection { threshold });
    }
    if opts.fractional {
        refine_all(&model, &observed, opts, &mut found, &mut gains, 3);
    }

    if found.len() > 1 {
        gains = joint_gains(&model, &observed, &found);
    }

    let mut paths: Vec<PathEstimate> = found
        .iter()
        .zip(&gains)
        .map(|(&(delay, doppler, pos), &gain)| PathEstimate {
            delay,
            doppler,
            gain,
            peak_row: window.rows[pos].1,
        })
        .filter(|p| p.gain.norm() > 0.0)
        .collect();
    paths.sort_by(|a, b| b.gain.norm().total_cmp(&a.gain.norm()));
    Ok(EpaEstimate {
        paths,
        merged,
        threshold,
    })
}

/// Rebuilds the full ECM from the pilot response: every detected path's
/// diagonal is filled by propagating its response law across all columns.
pub fn reconstruct_ecm_epa_dr(
    plan: &DaftPlan,
    shaping: Option<&ShapingWindow>,
    rx_frame: &[Complex64],
    pilot: &PilotConfig,
    opts: &EpaOptions,
) -> Result<(Ecm, EpaEstimate)> {
    let estimate = estimate_paths_epa(plan, shaping, rx_frame, pilot, opts)?;
    let profile = estimate.to_profile()?;
    let params = *plan.params();
    let paths: Vec<DdPath> = profile.paths().to_vec();
    let exact = profile.all_integer_doppler() && shaping.is_none_or(|w| w.is_rectangular());
    let support = predict_support(
        &profile,
        &params,
        if exact { None } else { Some(DEFAULT_SUPPORT_BAND) },
    )?;
    Ok((
        Ecm {
            matrix: ecm_matrix(plan, shaping, &paths),
            support,
            params,
            profile_digest: profile.digest(),
        },
        estimate,
    ))
}

/// `|estimate - truth|_F^2 / |truth|_F^2`.
pub fn nmse(estimate: &Ecm, truth: &Ecm) -> Result<f64> {
    if estimate.matrix.shape() != truth.matrix.shape() {
        return Err(AfdmError::LengthMismatch {
            expected: truth.n(),
            actual: estimate.n(),
        });
    }
    let energy = truth.frobenius_sq();
    if energy == 0.0 {
        return Err(AfdmError::ZeroEnergy);
    }
    let err: f64 = estimate
        .matrix
        .iter()
        .zip(truth.matrix.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / energy)
}
