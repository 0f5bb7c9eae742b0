//! Affine frequency division multiplexing (AFDM) link-level simulation.
//!
//! The crate covers the whole baseband chain: DAFT modulation with a
//! chirp-periodic prefix, delay-Doppler channels, embedded-pilot channel
//! estimation with DAFT-domain pulse shaping, sequence detection, orthogonal
//! multiple access, and a reproducible Monte Carlo harness. OFDM and OCDM are
//! the parameter special cases `c1 = c2 = 0` and `c1 = c2 = 1/(2N)`.

pub mod channel;
pub mod constellation;
pub mod daft;
pub mod detection;
pub mod estimation;
pub mod harness;
pub mod error;
pub mod multiaccess;
pub mod params;
pub mod profile;
pub mod rng;
pub mod window;

pub use error::{AfdmError, Result};
pub use num_complex::Complex64;
