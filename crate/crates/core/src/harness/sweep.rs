//! Monte Carlo BER and NMSE sweeps.
//!
//! Each trial draws from streams keyed by `(seed, label, indices)`: the
//! channel and the data depend only on the trial index (common random numbers
//! across SNR points), the noise on `(snr index, trial)`. Trials run in
//! fixed-size batches, so results do not depend on the number of workers.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{add_awgn, apply_ddc, effective_ecm, Ecm, NoiseSpec};
use crate::constellation::Constellation;
use crate::daft::{add_cpp, remove_cpp, DaftPlan};
use crate::detection::{ber, data_model, detect, BerCount, DetectorConfig};
use crate::error::{AfdmError, Result};
use crate::estimation::{build_epa_frame, nmse, reconstruct_ecm_epa_dr, EpaOptions, Frame, PilotConfig};
use crate::multiaccess::{compute_guard, FRACTIONAL_MARGIN_PER_SIDE};
use crate::params::{validate_params, AfdmParams};
use crate::profile::{complex_gaussian, DdPath, DdProfile};
use crate::rng::stream_rng;
use crate::window::{apply_window, ShapingWindow, Side};

use super::config::{CsiMode, ExperimentConfig, ProfileSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn workers(workers: usize) -> Self {
        Self { workers: Some(workers) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub metric: String,
    pub value: f64,
    /// Bits for BER, frames for NMSE.
    pub trials: u64,
    /// Bit errors for BER, failed estimates for NMSE.
    pub errors: u64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub config_digest: String,
    pub seed: u64,
    /// Parameter checks that did not pass for the first trial's channel.
    pub warnings: Vec<String>,
    pub wall_time: Duration,
}

/// Everything a trial needs, derived once from the config.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub params: AfdmParams,
    pub plan: DaftPlan,
    pub constellation: Constellation,
    pub shaping: Option<ShapingWindow>,
    fixed: Option<DdProfile>,
    pilot: Option<PilotConfig>,
    epa: EpaOptions,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let params = config.params()?;
        let n = params.n_sub();
        let constellation = Constellation::new(config.constellation);
        let window = ShapingWindow::new(config.window_kind(), n)?;
        let shaping = (!window.is_rectangular()).then_some(window);
        let fixed = config.fixed_profile()?;
        let (l_max, k_max) = config.profile_bounds()?;
        let fractional = config.may_be_fractional()?;

        let pilot = match config.csi {
            CsiMode::Genie => None,
            CsiMode::Estimated => {
                let guard = match config.pilot.guard {
                    Some(g) => g,
                    None => {
                        let envelope = envelope_profile(l_max, k_max)?;
                        let margin = if fractional { 2 * FRACTIONAL_MARGIN_PER_SIDE } else { 0 };
                        compute_guard(&envelope, &params, margin)
                    }
                };
                let p = PilotConfig::new(config.pilot.index.unwrap_or(n / 2), config.pilot.amplitude, guard, guard);
                p.validate(n)?;
                Some(p)
            }
        };
        let est = &config.estimation;
        let epa = EpaOptions {
            max_delay: l_max,
            max_doppler: k_max,
            fractional: est.fractional.unwrap_or(fractional),
            extension: if est.fractional.unwrap_or(fractional) { est.extension } else { 0 },
            threshold: est.threshold,
        };
        let data_len = pilot.map_or(n, |p| p.data_len(n));
        config.detector.check_feasible(&constellation, data_len)?;
        Ok(Self {
            config: config.clone(),
            params,
            plan: DaftPlan::new(params),
            constellation,
            shaping,
            fixed,
            pilot,
            epa,
        })
    }

    pub fn pilot(&self) -> Option<&PilotConfig> {
        self.pilot.as_ref()
    }

    /// Data symbols per frame.
    pub fn data_len(&self) -> usize {
        let n = self.params.n_sub();
        self.pilot.map_or(n, |p| p.data_len(n))
    }

    /// Channel of trial `trial`; identical at every SNR point.
    pub fn profile(&self, trial: u64) -> Result<DdProfile> {
        let mut rng = stream_rng(self.config.seed, "profile", &[trial]);
        match (&self.config.profile, &self.fixed) {
            (ProfileSource::Random(spec), _) => spec.draw(&mut rng),
            (ProfileSource::File { rayleigh, .. } | ProfileSource::Fixed { rayleigh, .. }, Some(p)) => {
                if *rayleigh {
                    let var = 1.0 / p.len() as f64;
                    let gains: Vec<Complex64> = (0..p.len()).map(|_| complex_gaussian(&mut rng, var)).collect();
                    p.with_gains(&gains)
                } else {
                    Ok(p.clone())
                }
            }
            _ => unreachable!("fixed sources are loaded up front"),
        }
    }

    /// Transmitted bits and the frame carrying them.
    pub fn frame(&self, trial: u64) -> Result<(Vec<bool>, Frame)> {
        let mut rng = stream_rng(self.config.seed, "bits", &[trial]);
        let bits: Vec<bool> = (0..self.data_len() * self.constellation.bits_per_symbol())
            .map(|_| rng.random())
            .collect();
        let symbols = self.constellation.modulate(&bits)?;
        let frame = match &self.pilot {
            Some(p) => build_epa_frame(&symbols, p, self.params.n_sub())?,
            None => Frame::data_only(symbols),
        };
        Ok((bits, frame))
    }

    /// Full chain: shaping, IDAFT, prefix, channel, noise, prefix removal,
    /// DAFT, matched filter.
    pub fn transmit(&self, profile: &DdProfile, frame: &Frame, snr_index: u64, trial: u64, noise: &NoiseSpec) -> Result<Vec<Complex64>> {
        let plan = &self.plan;
        let x = match &self.shaping {
            Some(w) => apply_window(plan, w, &frame.symbols, Side::TxShape)?,
            None => frame.symbols.clone(),
        };
        let tx = add_cpp(&self.params, &plan.idaft(&x)?)?;
        let rx = apply_ddc(profile, &tx, &self.params)?;
        let rx = add_awgn(&rx, noise, &mut noise.stream(self.config.seed, &[snr_index, trial]));
        let y = plan.daft(&remove_cpp(&self.params, &rx)?)?;
        match &self.shaping {
            Some(w) => apply_window(plan, w, &y, Side::RxMatched),
            None => Ok(y),
        }
    }

    pub fn genie_ecm(&self, profile: &DdProfile) -> Result<Ecm> {
        effective_ecm(profile, &self.plan, self.shaping.as_ref())
    }

    /// ECM estimated from the pilot; `None` when nothing was detected.
    pub fn estimated_ecm(&self, rx: &[Complex64]) -> Result<Option<Ecm>> {
        let pilot = self
            .pilot
            .as_ref()
            .ok_or_else(|| AfdmError::Config("estimated CSI needs a pilot".into()))?;
        match reconstruct_ecm_epa_dr(&self.plan, self.shaping.as_ref(), rx, pilot, &self.epa) {
            Ok((ecm, _)) => Ok(Some(ecm)),
            Err(AfdmError::NoDetection { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn ber_trial(&self, snr_index: u64, trial: u64, noise: &NoiseSpec, detector: &DetectorConfig) -> Result<BerCount> {
        let profile = self.profile(trial)?;
        let (bits, frame) = self.frame(trial)?;
        let rx = self.transmit(&profile, &frame, snr_index, trial, noise)?;
        // no usable channel: count every bit as a coin flip
        let coin_flips = BerCount {
            errors: bits.len() as u64 / 2,
            bits: bits.len() as u64,
        };
        let ecm = match self.config.csi {
            CsiMode::Genie => self.genie_ecm(&profile)?,
            CsiMode::Estimated => match self.estimated_ecm(&rx)? {
                Some(e) => e,
                None => return Ok(coin_flips),
            },
        };
        let (h, y) = data_model(&ecm, &frame, &rx)?;
        match detect(&h, &y, &self.constellation, detector) {
            Ok(out) => ber(&bits, &out.bits),
            Err(AfdmError::Singular { .. }) => Ok(coin_flips),
            Err(e) => Err(e),
        }
    }

    fn nmse_trial(&self, snr_index: u64, trial: u64, noise: &NoiseSpec) -> Result<(f64, bool)> {
        let profile = self.profile(trial)?;
        let (_, frame) = self.frame(trial)?;
        let rx = self.transmit(&profile, &frame, snr_index, trial, noise)?;
        let truth = self.genie_ecm(&profile)?;
        match self.estimated_ecm(&rx)? {
            Some(est) => Ok((nmse(&est, &truth)?, false)),
            None => Ok((1.0, true)),
        }
    }

    fn warnings(&self) -> Result<Vec<String>> {
        let report = validate_params(&self.params, &self.profile(0)?);
        Ok(report.failures().map(|f| format!("{:?}: {}", f.check, f.detail)).collect())
    }
}

/// Profile spanning the corners of the delay-Doppler bounds, used to size guards.
fn envelope_profile(l_max: usize, k_max: usize) -> Result<DdProfile> {
    let k = k_max as f64;
    let one = Complex64::new(1.0, 0.0);
    DdProfile::new(vec![DdPath::new(one, 0, -k), DdPath::new(one, l_max, k)])
}

fn pool(opts: &RunOptions) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| AfdmError::Config(format!("worker pool: {e}")))
}

pub fn run_ber_sweep(config: &ExperimentConfig, opts: &RunOptions) -> Result<SweepResult> {
    let started = Instant::now();
    let exp = Experiment::new(config)?;
    let pool = pool(opts)?;
    let stop = config.early_stop;
    let mut rows = Vec::new();
    for (si, snr_db) in config.snr.points()?.into_iter().enumerate() {
        let noise = NoiseSpec::from_snr_db(snr_db);
        let detector = config.detector.with_noise_variance(noise.variance);
        let mut total = BerCount::default();
        let mut done = 0usize;
        while done < config.frames {
            let end = (done + stop.batch).min(config.frames);
            let counts: Vec<Result<BerCount>> = pool.install(|| {
                (done..end)
                    .into_par_iter()
                    .map(|t| exp.ber_trial(si as u64, t as u64, &noise, &detector))
                    .collect()
            });
            for c in counts {
                total.add(c?);
            }
            done = end;
            if stop.max_bit_errors > 0 && total.errors >= stop.max_bit_errors && total.bits >= stop.min_bits {
                break;
            }
        }
        rows.push(SweepRow {
            snr_db,
            metric: "ber".into(),
            value: total.rate(),
            trials: total.bits,
            errors: total.errors,
            ci95: total.ci95(),
        });
    }
    Ok(SweepResult {
        rows,
        config_digest: config.digest(),
        seed: config.seed,
        warnings: exp.warnings()?,
        wall_time: started.elapsed(),
    })
}

pub fn run_nmse_sweep(config: &ExperimentConfig, opts: &RunOptions) -> Result<SweepResult> {
    let started = Instant::now();
    if config.csi != CsiMode::Estimated {
        return Err(AfdmError::Config("an NMSE sweep needs csi = \"estimated\"".into()));
    }
    let exp = Experiment::new(config)?;
    let pool = pool(opts)?;
    let mut rows = Vec::new();
    for (si, snr_db) in config.snr.points()?.into_iter().enumerate() {
        let noise = NoiseSpec::from_snr_db(snr_db);
        let values: Vec<Result<(f64, bool)>> = pool.install(|| {
            (0..config.frames)
                .into_par_iter()
                .map(|t| exp.nmse_trial(si as u64, t as u64, &noise))
                .collect()
        });
        let values: Vec<(f64, bool)> = values.into_iter().collect::<Result<_>>()?;
        let count = values.len() as f64;
        let mean = values.iter().map(|v| v.0).sum::<f64>() / count;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        rows.push(SweepRow {
            snr_db,
            metric: "nmse".into(),
            value: mean,
            trials: values.len() as u64,
            errors: values.iter().filter(|v| v.1).count() as u64,
            ci95: 1.959_963_984_540_054 * (var / count).sqrt(),
        });
    }
    Ok(SweepResult {
        rows,
        config_digest: config.digest(),
        seed: config.seed,
        warnings: exp.warnings()?,
        wall_time: started.elapsed(),
    })
}
