//! Waveform parameters, sampling grid and parameter validation.
//!
//! An AFDM frame is described by the subcarrier count `N`, the two chirp
//! parameters `c1` and `c2`, and the prefix length in samples. OFDM
//! (`c1 = c2 = 0`) and OCDM (`c1 = c2 = 1/(2N)`) are exact special cases.

use serde::{Deserialize, Serialize};

use crate::error::{AfdmError, Result};
use crate::profile::DdProfile;

/// Tolerance used to decide whether `2N*c1` is integer-valued.
pub const INTEGER_MAPPING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfdmParams {
    n_sub: usize,
    c1: f64,
    c2: f64,
    l_cpp: usize,
    two_n_c1: f64,
}

impl AfdmParams {
    pub fn new(n_sub: usize, c1: f64, c2: f64, l_cpp: usize) -> Result<Self> {
        if n_sub < 2 {
            return Err(AfdmError::InvalidParams(format!(
                "n_sub must be at least 2, got {n_sub}"
            )));
        }
        if l_cpp >= n_sub {
            return Err(AfdmError::InvalidParams(format!(
                "l_cpp ({l_cpp}) must be smaller than n_sub ({n_sub})"
            )));
        }
        if !c1.is_finite() || !c2.is_finite() {
            return Err(AfdmError::InvalidParams(
                "chirp parameters must be finite".into(),
            ));
        }
        Ok(Self {
            n_sub,
            c1,
            c2,
            l_cpp,
            two_n_c1: 2.0 * n_sub as f64 * c1,
        })
    }

    /// OFDM: both chirp parameters zero.
    pub fn ofdm(n_sub: usize, l_cpp: usize) -> Result<Self> {
        Self::new(n_sub, 0.0, 0.0, l_cpp)
    }

    /// OCDM: `c1 = c2 = 1/(2N)`, i.e. the discrete Fresnel transform.
    pub fn ocdm(n_sub: usize, l_cpp: usize) -> Result<Self> {
        let c = 1.0 / (2.0 * n_sub as f64);
        Self::new(n_sub, c, c, l_cpp)
    }

    /// Smallest `c1` on the `1/(2N)` lattice that separates Doppler spreads
    /// of up to `k_max` bins.
    pub fn afdm_for_doppler(n_sub: usize, l_cpp: usize, k_max: usize, c2: f64) -> Result<Self> {
        let c1 = (2 * k_max + 1) as f64 / (2.0 * n_sub as f64);
        Self::new(n_sub, c1, c2, l_cpp)
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn l_cpp(&self) -> usize {
        self.l_cpp
    }

    /// `2 N c1`, the DAFT-domain shift produced by a unit delay.
    pub fn two_n_c1(&self) -> f64 {
        self.two_n_c1
    }

    /// `Some(2 N c1)` when it is integer-valued (integer-mapping mode).
    pub fn integer_shift(&self) -> Option<i64> {
        let r = self.two_n_c1.round();
        ((self.two_n_c1 - r).abs() < INTEGER_MAPPING_TOL).then_some(r as i64)
    }

    pub fn is_integer_mapping(&self) -> bool {
        self.integer_shift().is_some()
    }

    /// The prefix degenerates to a plain cyclic prefix.
    pub fn cpp_is_cp(&self) -> bool {
        self.is_integer_mapping() && self.n_sub % 2 == 0
    }

    pub fn with_l_cpp(&self, l_cpp: usize) -> Result<Self> {
        Self::new(self.n_sub, self.c1, self.c2, l_cpp)
    }
}

/// Physical sampling grid for a frame of `N` samples at bandwidth `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bandwidth: f64,
    pub sample_interval: f64,
    pub subcarrier_spacing: f64,
    pub frame_duration: f64,
}

impl GridSpec {
    pub fn new(bandwidth: f64, n_sub: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) || n_sub == 0 {
            return Err(AfdmError::InvalidParams(format!(
                "grid needs positive bandwidth and N (got B={bandwidth}, N={n_sub})"
            )));
        }
        let n = n_sub as f64;
        let sample_interval = 1.0 / bandwidth;
        let subcarrier_spacing = bandwidth / n;
        Ok(Self {
            bandwidth,
            sample_interval,
            subcarrier_spacing,
            frame_duration: n * sample_interval,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Bijectivity,
    CppSufficiency,
    CpReduction,
    AliasingHeadroom,
    Separability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn get(&self, check: Check) -> Option<&Finding> {
        self.findings.iter().find(|f| f.check == check)
    }

    pub fn passed(&self, check: Check) -> bool {
        self.get(check).is_some_and(|f| f.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.findings.iter().all(|f| f.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| !f.passed)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for finding in &self.findings {
            let tag = if finding.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:?}: {}", finding.check, finding.detail)?;
        }
        Ok(())
    }
}

/// Checks a parameter set against a channel profile. Never fails; callers
/// decide which findings are fatal.
pub fn validate_params(params: &AfdmParams, profile: &DdProfile) -> ValidationReport {
    let n = params.n_sub();
    let nf = n as f64;
    let k_max = profile.k_max();
    let l_max = profile.l_max();
    let mut findings = Vec::with_capacity(5);

    let min_c1 = (2 * k_max + 1) as f64 / (2.0 * nf);
    // relative slack so that the exact lattice point counts as attained
    let bijective = params.c1().abs() >= min_c1 * (1.0 - 1e-12);
    findings.push(Finding {
        check: Check::Bijectivity,
        passed: bijective,
        detail: format!(
            "|c1| = {:.6e}, required >= (2*{k_max}+1)/(2*{n}) = {:.6e}",
            params.c1().abs(),
            min_c1
        ),
    });

    findings.push(Finding {
        check: Check::CppSufficiency,
        passed: params.l_cpp() >= l_max,
        detail: format!("l_cpp = {}, l_max = {l_max}", params.l_cpp()),
    });

    findings.push(Finding {
        check: Check::CpReduction,
        passed: params.cpp_is_cp(),
        detail: format!(
            "2N*c1 = {:.6}, N {}",
            params.two_n_c1(),
            if n % 2 == 0 { "even" } else { "odd" }
        ),
    });

    let spread = params.two_n_c1().abs() * l_max as f64 + (2 * k_max + 1) as f64;
    findings.push(Finding {
        check: Check::AliasingHeadroom,
        passed: spread <= nf + 1e-9,
        detail: format!("DAFT-domain spread {spread:.3} bins within N = {n}"),
    });

    if params.is_integer_mapping() {
        let collision = profile.first_collision();
        findings.push(Finding {
            check: Check::Separability,
            passed: collision.is_none(),
            detail: match collision {
                None => "all (delay, round(doppler)) pairs distinct".into(),
                Some((a, b)) => format!("paths {a} and {b} share (delay, round(doppler))"),
            },
        });
    }

    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::DdPath;
    use num_complex::Complex64;

    fn profile(paths: &[(usize, f64)]) -> DdProfile {
        DdProfile::new(
            paths
                .iter()
                .map(|&(l, nu)| DdPath::new(Complex64::new(1.0, 0.0), l, nu))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_degenerate_params() {
        assert!(AfdmParams::new(1, 0.0, 0.0, 0).is_err());
        assert!(AfdmParams::new(8, 0.0, 0.0, 8).is_err());
        assert!(AfdmParams::new(8, f64::NAN, 0.0, 0).is_err());
        assert!(AfdmParams::new(2, 0.0, 0.0, 1).is_ok());
    }

    #[test]
    fn bijectivity_minimum_attained() {
        let p = AfdmParams::new(512, 5.0 / 1024.0, 0.0, 3).unwrap();
        let prof = profile(&[(0, 0.0), (3, 2.0), (1, -2.0)]);
        assert_eq!(prof.k_max(), 2);
        let report = validate_params(&p, &prof);
        assert!(report.passed(Check::Bijectivity), "{report}");
    }

    #[test]
    fn ofdm_fails_bijectivity() {
        let p = AfdmParams::ofdm(16, 0).unwrap();
        let report = validate_params(&p, &profile(&[(0, 0.0)]));
        assert!(!report.passed(Check::Bijectivity));
        assert!(report.passed(Check::CppSufficiency));
    }

    #[test]
    fn short_prefix_flagged() {
        let p = AfdmParams::new(16, 1.0 / 32.0, 0.0, 2).unwrap();
        let report = validate_params(&p, &profile(&[(0, 0.0), (3, 0.0)]));
        assert!(!report.passed(Check::CppSufficiency));
    }

    #[test]
    fn cp_reduction_needs_lattice_and_even_n() {
        let even = AfdmParams::new(16, 3.0 / 32.0, 0.0, 1).unwrap();
        let odd = AfdmParams::new(15, 3.0 / 30.0, 0.0, 1).unwrap();
        let off = AfdmParams::new(16, 0.07, 0.0, 1).unwrap();
        let prof = profile(&[(0, 0.0)]);
        assert!(validate_params(&even, &prof).passed(Check::CpReduction));
        assert!(!validate_params(&odd, &prof).passed(Check::CpReduction));
        assert!(!validate_params(&off, &prof).passed(Check::CpReduction));
    }

    #[test]
    fn aliasing_and_separability() {
        let p = AfdmParams::new(16, 5.0 / 32.0, 0.0, 3).unwrap();
        let wide = profile(&[(3, 2.0)]);
        // 5*3 + 5 = 20 > 16
        assert!(!validate_params(&p, &wide).passed(Check::AliasingHeadroom));
        let dup = profile(&[(1, 0.2), (1, -0.1)]);
        assert!(!validate_params(&p, &dup).passed(Check::Separability));
    }

    #[test]
    fn validation_is_pure() {
        let p = AfdmParams::new(64, 5.0 / 128.0, 0.001, 4).unwrap();
        let prof = profile(&[(0, 0.0), (2, 1.5), (4, -2.0)]);
        assert_eq!(validate_params(&p, &prof), validate_params(&p, &prof));
    }

    #[test]
    fn grid_identities() {
        let g = GridSpec::new(1.0e6, 512).unwrap();
        assert!((g.subcarrier_spacing * 512.0 - g.bandwidth).abs() <= 1e-15 * g.bandwidth);
        assert!((g.frame_duration * g.subcarrier_spacing - 1.0).abs() <= 1e-15);
        assert!(GridSpec::new(0.0, 4).is_err());
    }

    #[test]
    fn presets() {
        let p = AfdmParams::afdm_for_doppler(128, 3, 2, 0.0).unwrap();
        assert_eq!(p.integer_shift(), Some(5));
        assert!(p.cpp_is_cp());
        assert_eq!(AfdmParams::ocdm(64, 0).unwrap().integer_shift(), Some(1));
        assert_eq!(AfdmParams::ofdm(64, 0).unwrap().integer_shift(), Some(0));
    }
}
