//! Two-beam receiver: direct-path beam toward the transmitter, MUSIC on the
//! cancelled array data, echo beam toward the MUSIC estimate, LS cancellation
//! and matched-filter TDOA.

use std::f64::consts::PI;

use super::beam::{beamform, beamform_weights, cancel_direct_path, cancel_per_element, null_steered_weights};
use super::correlate::{estimate_tdoa_with, CorrelationPeak, DEFAULT_THRESHOLD_DB};
use super::music::{music_aoa_with, MusicOptions};
use crate::channel::ArrayModel;
use crate::geometry::wrap_angle;
use crate::waveform::{IqCapture, WaveformConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub grid_deg: f64,
    pub snapshots: usize,
    pub threshold_db: f64,
    /// Reject echo directions whose endfire alias lies within this many
    /// Rayleigh beamwidths (2/M in sine space); 0 disables the check.
    pub endfire_guard_beams: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self { grid_deg: 0.1, snapshots: 128, threshold_db: DEFAULT_THRESHOLD_DB, endfire_guard_beams: 1.0 }
    }
}

/// Whether `psi` and its alias at the opposite endfire are closer than
/// `beams` Rayleigh widths on an `m`-element half-wavelength array.
pub fn endfire_ambiguous(psi: f64, m: usize, beams: f64) -> bool {
    2.0 - 2.0 * psi.sin().abs() < beams * 2.0 / m as f64
}

#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    pub tdoa_s: f64,
    /// Echo AoA in the node convention.
    pub aoa_rad: f64,
    /// Echo angle off the array broadside.
    pub psi: f64,
    pub direct_peak: CorrelationPeak,
    pub echo_peak: CorrelationPeak,
    pub direct_beam: IqCapture,
    pub echo_clean: IqCapture,
}

/// Broadside-relative angle of a global direction and whether it lies behind the array.
pub fn to_local(angle: f64, array: &ArrayModel) -> (f64, bool) {
    let off = wrap_angle(angle - array.boresight);
    if off.abs() <= PI / 2.0 {
        (off, false)
    } else {
        (wrap_angle(PI - off), true)
    }
}

pub fn to_global(psi: f64, behind: bool, array: &ArrayModel) -> f64 {
    wrap_angle(array.boresight + if behind { PI - psi } else { psi })
}

/// Run the receiver on one capture.
///
/// `tx_angle` is the direction of the transmitter; `behind` selects the
/// half-plane behind the array for the echo (a linear array cannot tell).
pub fn process_capture(
    capture: &IqCapture,
    array: &ArrayModel,
    tx_angle: f64,
    behind: bool,
    waveform: &WaveformConfig,
    reference: &IqCapture,
    cfg: &ReceiverConfig,
) -> Result<ReceiverOutput> {
    if capture.elements != array.elements || array.elements < 2 {
        return Err(Error::Dimension("capture and array element counts differ".into()));
    }
    if (array.spacing_wavelengths - 0.5).abs() > 1e-12 {
        return Err(Error::Config("receiver supports half-wavelength arrays only".into()));
    }
    let (psi_tx, _) = to_local(tx_angle, array);
    let direct_raw = beamform(capture, psi_tx)?;
    let residual = cancel_per_element(capture, &direct_raw)?;
    let opts = MusicOptions {
        grid_deg: cfg.grid_deg,
        snapshots: cfg.snapshots,
        window: Some(waveform.pilot_symbol_span()),
        smoothing_subarray: None,
        blocked: vec![psi_tx],
    };
    let psi = music_aoa_with(&residual, 1, &opts)?[0];
    if endfire_ambiguous(psi, array.elements, cfg.endfire_guard_beams) {
        return Err(Error::Detection(format!(
            "echo at {:.1} deg off broadside is inside the endfire ambiguity",
            psi.to_degrees()
        )));
    }

    let echo_beam = beamform(capture, psi)?;
    let direct_beam = beamform_weights(capture, &null_steered_weights(array.elements, psi_tx, psi)?)?;
    let echo_clean = cancel_direct_path(&echo_beam, &direct_beam)?;
    let (tdoa_s, direct_peak, echo_peak) = estimate_tdoa_with(&direct_beam, &echo_clean, reference, cfg.threshold_db)?;
    Ok(ReceiverOutput {
        tdoa_s,
        aoa_rad: to_global(psi, behind, array),
        psi,
        direct_peak,
        echo_peak,
        direct_beam,
        echo_clean,
    })
}
