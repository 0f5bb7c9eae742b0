//! Delay-Doppler channel profiles.
//!
//! Delays are integer sample counts, Dopplers are real and normalized by the
//! subcarrier spacing. Profiles serialize to a versioned TOML document:
//!
//! ```toml
//! version = 1
//!
//! [[paths]]
//! gain_re = 0.7
//! gain_im = -0.1
//! delay = 0
//! doppler = 1.0
//! ```

use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AfdmError, Result};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdPath {
    pub gain: Complex64,
    pub delay: usize,
    pub doppler: f64,
}

impl DdPath {
    pub fn new(gain: Complex64, delay: usize, doppler: f64) -> Self {
        Self {
            gain,
            delay,
            doppler,
        }
    }

    pub fn has_integer_doppler(&self) -> bool {
        (self.doppler - self.doppler.round()).abs() < 1e-9
    }
}

/// A non-empty set of propagation paths with derived spread maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct DdProfile {
    paths: Vec<DdPath>,
    l_max: usize,
    k_max: usize,
}

impl DdProfile {
    pub fn new(paths: Vec<DdPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(AfdmError::InvalidParams(
                "profile needs at least one path".into(),
            ));
        }
        if let Some(p) = paths.iter().find(|p| !p.doppler.is_finite()) {
            return Err(AfdmError::InvalidParams(format!(
                "non-finite doppler {}",
                p.doppler
            )));
        }
        let l_max = paths.iter().map(|p| p.delay).max().unwrap_or(0);
        let nu_max = paths.iter().map(|p| p.doppler.abs()).fold(0.0, f64::max);
        // tolerate round-off on integer Dopplers before taking the ceiling
        let k_max = (nu_max - 1e-9).ceil().max(0.0) as usize;
        Ok(Self {
            paths,
            l_max,
            k_max,
        })
    }

    /// Single unit-gain path with no delay or Doppler.
    pub fn identity() -> Self {
        Self::new(vec![DdPath::new(Complex64::new(1.0, 0.0), 0, 0.0)]).unwrap()
    }

    pub fn paths(&self) -> &[DdPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn all_integer_doppler(&self) -> bool {
        self.paths.iter().all(DdPath::has_integer_doppler)
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Same geometry with the gains replaced.
    pub fn with_gains(&self, gains: &[Complex64]) -> Result<Self> {
        if gains.len() != self.paths.len() {
            return Err(AfdmError::LengthMismatch {
                expected: self.paths.len(),
                actual: gains.len(),
            });
        }
        Self::new(
            self.paths
                .iter()
                .zip(gains)
                .map(|(p, &g)| DdPath { gain: g, ..*p })
                .collect(),
        )
    }

    /// First pair of paths sharing `(delay, round(doppler))`.
    pub fn first_collision(&self) -> Option<(usize, usize)> {
        for i in 0..self.paths.len() {
            for j in i + 1..self.paths.len() {
                let (a, b) = (&self.paths[i], &self.paths[j]);
                if a.delay == b.delay && a.doppler.round() == b.doppler.round() {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Short hex digest of the profile contents.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.paths {
            h.update(p.gain.re.to_le_bytes());
            h.update(p.gain.im.to_le_bytes());
            h.update((p.delay as u64).to_le_bytes());
            h.update(p.doppler.to_le_bytes());
        }
        hex_prefix(&h.finalize(), 16)
    }

    pub fn to_document(&self) -> ProfileDocument {
        ProfileDocument {
            version: PROFILE_SCHEMA_VERSION,
            paths: self
                .paths
                .iter()
                .map(|p| PathRecord {
                    gain_re: p.gain.re,
                    gain_im: p.gain.im,
                    delay: p.delay,
                    doppler: p.doppler,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ProfileDocument) -> Result<Self> {
        if doc.version != PROFILE_SCHEMA_VERSION {
            return Err(AfdmError::Config(format!(
                "unsupported profile schema version {} (expected {PROFILE_SCHEMA_VERSION})",
                doc.version
            )));
        }
        Self::new(
            doc.paths
                .iter()
                .map(|r| DdPath::new(Complex64::new(r.gain_re, r.gain_im), r.delay, r.doppler))
                .collect(),
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("profile document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ProfileDocument =
            toml::from_str(text).map_err(|e| AfdmError::Config(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AfdmError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| AfdmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// On-disk form of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub version: u32,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub gain_re: f64,
    pub gain_im: f64,
    pub delay: usize,
    pub doppler: f64,
}

/// Recipe for drawing random profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomProfileSpec {
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
    /// Number of paths that get a non-integer Doppler offset.
    #[serde(default)]
    pub fractional_paths: usize,
}

impl RandomProfileSpec {
    pub fn grid_size(&self) -> usize {
        (self.l_max + 1) * (2 * self.k_max + 1)
    }

    /// Draws distinct `(delay, integer Doppler)` cells uniformly, then
    /// perturbs the first `fractional_paths` Dopplers by up to half a bin
    /// while keeping `|doppler| <= k_max`. Gains are i.i.d. complex Gaussian
    /// with variance `1/P` so the expected channel energy is one.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DdProfile> {
        if self.paths == 0 || self.paths > self.grid_size() {
            return Err(AfdmError::Config(format!(
                "cannot place {} distinct paths on a {}x{} delay-Doppler grid",
                self.paths,
                self.l_max + 1,
                2 * self.k_max + 1
            )));
        }
        if self.fractional_paths > self.paths {
            return Err(AfdmError::Config(
                "fractional_paths exceeds paths".into(),
            ));
        }
        let width = 2 * self.k_max + 1;
        let cells = sample(rng, self.grid_size(), self.paths);
        let k_max = self.k_max as f64;
        let mut paths = Vec::with_capacity(self.paths);
        for (i, cell) in cells.into_iter().enumerate() {
            let delay = cell / width;
            let k = (cell % width) as f64 - k_max;
            let mut doppler = k;
            if i < self.fractional_paths {
                let lo = (k - 0.5).max(-k_max);
                let hi = (k + 0.5).min(k_max);
                doppler = loop {
                    let v = rng.random_range(lo..hi);
                    if (v - v.round()).abs() > 1e-3 {
                        break v;
                    }
                };
            }
            paths.push(DdPath::new(complex_gaussian(rng, 1.0 / self.paths as f64), delay, doppler));
        }
        DdProfile::new(paths)
    }
}

/// Circular complex Gaussian sample with the given total variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

pub(crate) fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>()
        .chars()
        .take(chars)
        .collect()
}
