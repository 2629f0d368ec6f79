//! Device-free target localization with bistatic and multistatic radar
//! using OFDM reference signals.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: forward models (TDOA, AoA, SNR) and closed-form inverse
//!   solvers for a single transmitter/receiver pair.
//! * [`gdop`]: linearised error propagation and mode selection.
//! * [`waveform`]: CP-OFDM slot generation with a comb pilot reference.
//! * [`channel`]: two-path propagation onto a receive array with noise.
//! * [`estimation`]: MUSIC, beamforming, direct-path cancellation, matched
//!   filter TDOA and range-Doppler processing.
//! * [`fusion`]: weighted least-squares multistatic fusion (Levenberg-Marquardt).
//! * [`harness`]: scenario presets, sweeps and CSV emission used by the CLI.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod fusion;
pub mod gdop;
pub mod geometry;
pub mod harness;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
