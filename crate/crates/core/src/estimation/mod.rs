//! Receiver-side parameter estimation.

mod beam;
mod correlate;
mod music;
mod receiver;

use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::gdop::MeasurementErrorModel;
use crate::geometry::{true_aoa, true_tdoa, wrap_angle, BistaticPair, Mode, RadarParams, TargetState};
use crate::rng::substream;
use crate::{Error, Result, SPEED_OF_LIGHT};

pub use beam::{beamform, beamform_weights, cancel_direct_path, cancel_per_element, local_steering, null_steered_weights};
pub use correlate::{correlate, estimate_tdoa, estimate_tdoa_with, range_doppler, CorrelationPeak, DEFAULT_THRESHOLD_DB};
pub use music::{music_aoa, music_aoa_with, music_spectrum, MusicOptions};
pub use receiver::{endfire_ambiguous, process_capture, to_global, to_local, ReceiverConfig, ReceiverOutput};

const MODEL_STREAM: u64 = 0x4d4f_4445_4c;

/// One bistatic observation `[tdoa, aoa]` of a pair, plus optional extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub tdoa_s: f64,
    /// Echo angle at the receiving node, node AoA convention.
    pub aoa_rad: f64,
    pub doppler_hz: Option<f64>,
    pub snr_db: Option<f64>,
    pub pair_index: usize,
    pub mode: Mode,
}

impl Measurement {
    pub fn new(tdoa_s: f64, aoa_rad: f64, mode: Mode) -> Self {
        Self { tdoa_s, aoa_rad, doppler_hz: None, snr_db: None, pair_index: 0, mode }
    }

    pub fn with_pair_index(mut self, index: usize) -> Self {
        self.pair_index = index;
        self
    }

    /// Noise-free measurement of `target` by `pair`.
    pub fn exact(pair: &BistaticPair, target: &TargetState) -> Result<Self> {
        Ok(Self::new(true_tdoa(pair, target)?, true_aoa(pair.receiver(), target)?, pair.mode))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tdoa_s >= 0.0) || !self.aoa_rad.is_finite() {
            return Err(Error::Config(format!(
                "measurement needs tdoa >= 0 and finite aoa (got {}, {})",
                self.tdoa_s, self.aoa_rad
            )));
        }
        Ok(())
    }
}

/// Delay x Doppler magnitude surface; `magnitudes[delay][doppler]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub magnitudes: Vec<Vec<f64>>,
    pub delay_axis: Vec<f64>,
    pub doppler_axis: Vec<f64>,
}

impl RangeDopplerMap {
    /// (delay bin, doppler bin) of the global maximum.
    pub fn peak(&self) -> (usize, usize) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.magnitudes.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m > best.2 {
                    best = (i, j, m);
                }
            }
        }
        (best.0, best.1)
    }

    /// Doppler at `delay_bin` refined by a parabola through the peak bin and its neighbours.
    pub fn doppler_at(&self, delay_bin: usize) -> f64 {
        let row = &self.magnitudes[delay_bin];
        let n = row.len();
        let k = (0..n).fold(0, |b, j| if row[j] > row[b] { j } else { b });
        let step = self.doppler_axis[1] - self.doppler_axis[0];
        if k == 0 || k + 1 == n {
            return self.doppler_axis[k];
        }
        let (a, b, c) = (row[k - 1], row[k], row[k + 1]);
        let den = a - 2.0 * b + c;
        let offset = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
        self.doppler_axis[k] + offset * step
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.delay_axis) || !increasing(&self.doppler_axis) {
            return Err(Error::Dimension("range-Doppler axes must be strictly increasing".into()));
        }
        if self.magnitudes.len() != self.delay_axis.len()
            || self.magnitudes.iter().any(|r| r.len() != self.doppler_axis.len())
        {
            return Err(Error::Dimension("range-Doppler map shape does not match its axes".into()));
        }
        Ok(())
    }

    /// Header row of Doppler bins (Hz); each body row starts with its delay (s).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["delay_s".to_string()];
        header.extend(self.doppler_axis.iter().map(|d| format!("{d:e}")));
        w.write_record(&header)?;
        for (delay, row) in self.delay_axis.iter().zip(&self.magnitudes) {
            let mut rec = vec![format!("{delay:e}")];
            rec.extend(row.iter().map(|m| format!("{m:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bistatic range rate d(R1 + R2)/dt for a Doppler shift.
pub fn doppler_to_velocity(f_d: f64, f0: f64) -> f64 {
    SPEED_OF_LIGHT * f_d / f0
}

/// Surrogate measurement: truth (optionally snapped to the sample grid)
/// plus Gaussian errors. Negative TDOA draws are clamped to zero.
pub fn model_based_measure(
    pair: &BistaticPair,
    target: &TargetState,
    params: &RadarParams,
    err: &MeasurementErrorModel,
    quantize: bool,
    seed: u64,
) -> Result<Measurement> {
    let tdoa = true_tdoa(pair, target)?;
    let aoa = true_aoa(pair.receiver(), target)?;
    let fs = params.sample_rate_hz;
    let base = if quantize { (tdoa * fs).round() / fs } else { tdoa };
    let mut rng = substream(seed, &[MODEL_STREAM]);
    let gauss = |sigma: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Result<f64> {
        if sigma == 0.0 {
            return Ok(0.0);
        }
        Normal::new(0.0, sigma)
            .map(|n| n.sample(rng))
            .map_err(|e| Error::Config(format!("invalid error sigma {sigma}: {e}")))
    };
    let dt = gauss(err.sigma_tdoa, &mut rng)?;
    let da = gauss(err.sigma_aoa, &mut rng)?;
    Ok(Measurement::new((base + dt).max(0.0), wrap_angle(aoa + da), pair.mode))
}
