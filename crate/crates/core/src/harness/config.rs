//! Experiment configuration: a versioned TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constellation::ConstellationKind;
use crate::detection::{DetectorConfig, DetectorKind};
use crate::error::{AfdmError, Result};
use crate::estimation::ThresholdRule;
use crate::params::AfdmParams;
use crate::profile::{hex_prefix, DdPath, DdProfile, PathRecord, RandomProfileSpec};
use crate::window::{WindowKind, DEFAULT_CHEBYSHEV_SIDELOBE_DB};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformPreset {
    Afdm,
    Ocdm,
    Ofdm,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub preset: WaveformPreset,
    /// Only read for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    /// Used by `afdm` and `custom`; defaults to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

impl WaveformConfig {
    pub fn preset(preset: WaveformPreset) -> Self {
        Self {
            preset,
            c1: None,
            c2: None,
        }
    }

    /// Chirp parameters for `n` subcarriers and a maximum Doppler `k_max`.
    pub fn params(&self, n: usize, l_cpp: usize, k_max: usize) -> Result<AfdmParams> {
        let c2 = self.c2.unwrap_or(0.0);
        match self.preset {
            WaveformPreset::Ofdm => AfdmParams::ofdm(n, l_cpp),
            WaveformPreset::Ocdm => AfdmParams::ocdm(n, l_cpp),
            WaveformPreset::Afdm => AfdmParams::afdm_for_doppler(n, l_cpp, k_max, c2),
            WaveformPreset::Custom => {
                let c1 = self
                    .c1
                    .ok_or_else(|| AfdmError::Config("custom waveform needs c1".into()))?;
                AfdmParams::new(n, c1, c2, l_cpp)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowName {
    Rect,
    Hamming,
    Chebyshev,
}

impl WindowName {
    pub fn kind(&self, sidelobe_db: Option<f64>) -> WindowKind {
        match self {
            WindowName::Rect => WindowKind::Rectangular,
            WindowName::Hamming => WindowKind::Hamming,
            WindowName::Chebyshev => WindowKind::DolphChebyshev {
                sidelobe_db: sidelobe_db.unwrap_or(DEFAULT_CHEBYSHEV_SIDELOBE_DB),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    #[default]
    Genie,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotSettings {
    /// Defaults to `N / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub amplitude: f64,
    /// Guards on each side of the pilot; defaults to the profile's guard count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard: Option<usize>,
}

impl Default for PilotSettings {
    fn default() -> Self {
        Self {
            index: None,
            amplitude: 1.0,
            guard: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSettings {
    /// Fractional Doppler search; defaults to on when the profile can carry
    /// fractional Doppler.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractional: Option<bool>,
    pub extension: usize,
    pub threshold: ThresholdRule,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            fractional: None,
            extension: 2,
            threshold: ThresholdRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSource {
    /// A fresh profile per trial.
    Random(RandomProfileSpec),
    /// Fixed geometry from a profile document; `rayleigh` redraws gains per trial.
    File {
        path: PathBuf,
        #[serde(default)]
        rayleigh: bool,
    },
    /// Fixed geometry given inline.
    Fixed {
        paths: Vec<PathRecord>,
        #[serde(default)]
        rayleigh: bool,
    },
}

impl ProfileSource {
    pub fn fixed(profile: &DdProfile, rayleigh: bool) -> Self {
        ProfileSource::Fixed {
            paths: profile.to_document().paths,
            rayleigh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = Self { start, stop, step };
        g.points()?;
        Ok(g)
    }

    /// Single-point grid.
    pub fn at(snr_db: f64) -> Self {
        Self {
            start: snr_db,
            stop: snr_db,
            step: 1.0,
        }
    }

    /// Parses `start:stop:step`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| AfdmError::Config(format!("bad SNR grid '{text}', expected start:stop:step")))
        };
        match parts.as_slice() {
            [a, b, c] => Self::new(num(a)?, num(b)?, num(c)?),
            [a] => Ok(Self::at(num(a)?)),
            _ => Err(AfdmError::Config(format!(
                "bad SNR grid '{text}', expected start:stop:step"
            ))),
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(AfdmError::Config("SNR step must be positive and bounds finite".into()));
        }
        if self.stop < self.start {
            return Err(AfdmError::Config("SNR grid is empty (stop < start)".into()));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStop {
    /// Stop a BER point once this many bit errors are counted; 0 disables.
    pub max_bit_errors: u64,
    /// ... but not before this many bits.
    pub min_bits: u64,
    /// Frames processed between stop checks.
    pub batch: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            max_bit_errors: 200,
            min_bits: 0,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub n: usize,
    /// Defaults to the profile's largest possible delay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_cpp: Option<usize>,
    pub waveform: WaveformConfig,
    #[serde(default = "default_constellation")]
    pub constellation: ConstellationKind,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "default_window")]
    pub window: WindowName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chebyshev_sidelobe_db: Option<f64>,
    #[serde(default)]
    pub csi: CsiMode,
    #[serde(default)]
    pub pilot: PilotSettings,
    #[serde(default)]
    pub estimation: EstimationSettings,
    pub profile: ProfileSource,
    pub snr: SnrGrid,
    pub frames: usize,
    #[serde(default)]
    pub early_stop: EarlyStop,
}

fn default_constellation() -> ConstellationKind {
    ConstellationKind::Qpsk
}

fn default_window() -> WindowName {
    WindowName::Rect
}

impl ExperimentConfig {
    /// Desk-scale BER setup: N = 128, six paths with `l <= 3`, `|k| <= 2`,
    /// QPSK, message passing on the genie ECM.
    pub fn default_ber() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 1,
            n: 128,
            l_cpp: None,
            waveform: WaveformConfig::preset(WaveformPreset::Afdm),
            constellation: ConstellationKind::Qpsk,
            detector: DetectorConfig::new(DetectorKind::Mp),
            window: WindowName::Rect,
            chebyshev_sidelobe_db: None,
            csi: CsiMode::Genie,
            pilot: PilotSettings::default(),
            estimation: EstimationSettings::default(),
            profile: ProfileSource::Random(RandomProfileSpec {
                paths: 6,
                l_max: 3,
                k_max: 2,
                fractional_paths: 0,
            }),
            snr: SnrGrid {
                start: 0.0,
                stop: 20.0,
                step: 4.0,
            },
            frames: 1000,
            early_stop: EarlyStop::default(),
        }
    }

    /// Channel estimation setup: N = 512, six paths with one fractional
    /// Doppler, embedded pilot, estimated CSI.
    pub fn default_nmse() -> Self {
        Self {
            n: 512,
            csi: CsiMode::Estimated,
            profile: ProfileSource::Random(RandomProfileSpec {
                paths: 6,
                l_max: 3,
                k_max: 2,
                fractional_paths: 1,
            }),
            snr: SnrGrid {
                start: 0.0,
                stop: 30.0,
                step: 10.0,
            },
            frames: 500,
            early_stop: EarlyStop {
                max_bit_errors: 0,
                ..EarlyStop::default()
            },
            ..Self::default_ber()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AfdmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AfdmError::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| AfdmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // profile files are relative to the config file
        if let ProfileSource::File { path: p, .. } = &mut cfg.profile {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(AfdmError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.frames == 0 {
            return Err(AfdmError::Config("frames must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(AfdmError::Config("n must be at least 2".into()));
        }
        if self.early_stop.batch == 0 {
            return Err(AfdmError::Config("early_stop.batch must be positive".into()));
        }
        if !(self.pilot.amplitude > 0.0) {
            return Err(AfdmError::Config("pilot amplitude must be positive".into()));
        }
        self.snr.points()?;
        self.detector.validate()?;
        Ok(())
    }

    /// Short hex digest of the canonical serialized config.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex_prefix(&Sha256::digest(canonical.as_bytes()), 16)
    }

    /// Largest delay and Doppler bin the profile source can produce.
    pub fn profile_bounds(&self) -> Result<(usize, usize)> {
        match &self.profile {
            ProfileSource::Random(spec) => Ok((spec.l_max, spec.k_max)),
            _ => {
                let p = self.fixed_profile()?.expect("fixed source");
                Ok((p.l_max(), p.k_max()))
            }
        }
    }

    /// Whether the source can produce fractional Doppler.
    pub fn may_be_fractional(&self) -> Result<bool> {
        Ok(match &self.profile {
            ProfileSource::Random(spec) => spec.fractional_paths > 0,
            _ => !self.fixed_profile()?.expect("fixed source").all_integer_doppler(),
        })
    }

    /// The fixed-geometry profile, if the source has one.
    pub fn fixed_profile(&self) -> Result<Option<DdProfile>> {
        match &self.profile {
            ProfileSource::Random(_) => Ok(None),
            ProfileSource::File { path, .. } => DdProfile::load(path).map(Some),
            ProfileSource::Fixed { paths, .. } => DdProfile::new(
                paths
                    .iter()
                    .map(|r| DdPath::new(num_complex::Complex64::new(r.gain_re, r.gain_im), r.delay, r.doppler))
                    .collect(),
            )
            .map(Some),
        }
    }

    pub fn window_kind(&self) -> WindowKind {
        self.window.kind(self.chebyshev_sidelobe_db)
    }

    pub fn params(&self) -> Result<AfdmParams> {
        let (l_max, k_max) = self.profile_bounds()?;
        let l_cpp = self.l_cpp.unwrap_or(l_max);
        if l_cpp < l_max {
            return Err(AfdmError::Config(format!(
                "l_cpp {l_cpp} is shorter than the largest delay {l_max}"
            )));
        }
        self.waveform.params(self.n, l_cpp, k_max)
    }
}
