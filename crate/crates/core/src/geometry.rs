//! Exact 2-D bistatic geometry.
//!
//! Angles follow the convention `theta_i = atan2(x_i - x, y - y_i)`: zero
//! along +y from the node, positive toward -x, so that a target at range
//! `R_i` and angle `theta_i` from node `i` sits at
//! `(x_i - R_i sin theta_i, y_i + R_i cos theta_i)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::estimation::Measurement;
use crate::{Error, Result, BOLTZMANN, SPEED_OF_LIGHT};

/// Default half-width of the collinearity exclusion band.
pub const DEFAULT_EXCLUSION_DEG: f64 = 5.0;

/// A node with a known (nominal) location and per-axis location error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl NodePosition {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, sigma_x: 0.0, sigma_y: 0.0 }
    }

    pub fn with_sigma(x: f64, y: f64, sigma: f64) -> Self {
        Self { x, y, sigma_x: sigma, sigma_y: sigma }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::Config("node coordinates must be finite".into()));
        }
        if !(self.sigma_x >= 0.0 && self.sigma_y >= 0.0) {
            return Err(Error::Config("node location sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Bistatic RCS in dBsm.
    pub rcs_dbsm: f64,
}

impl TargetState {
    pub fn at(x: f64, y: f64) -> Self {
        Self { x, y, vx: 0.0, vy: 0.0, rcs_dbsm: 0.0 }
    }

    pub fn with_rcs(mut self, rcs_dbsm: f64) -> Self {
        self.rcs_dbsm = rcs_dbsm;
        self
    }

    pub fn with_velocity(mut self, vx: f64, vy: f64) -> Self {
        self.vx = vx;
        self.vy = vy;
        self
    }
}

/// Which node of a pair transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// N1 transmits, N2 receives.
    Mode1,
    /// N2 transmits, N1 receives.
    Mode2,
}

impl Mode {
    pub fn other(self) -> Mode {
        match self {
            Mode::Mode1 => Mode::Mode2,
            Mode::Mode2 => Mode::Mode1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Mode1 => "mode1",
            Mode::Mode2 => "mode2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BistaticPair {
    pub n1: NodePosition,
    pub n2: NodePosition,
    pub mode: Mode,
}

impl BistaticPair {
    pub fn new(n1: NodePosition, n2: NodePosition, mode: Mode) -> Self {
        Self { n1, n2, mode }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn baseline(&self) -> f64 {
        self.n1.distance_to(self.n2.x, self.n2.y)
    }

    pub fn transmitter(&self) -> &NodePosition {
        match self.mode {
            Mode::Mode1 => &self.n1,
            Mode::Mode2 => &self.n2,
        }
    }

    pub fn receiver(&self) -> &NodePosition {
        match self.mode {
            Mode::Mode1 => &self.n2,
            Mode::Mode2 => &self.n1,
        }
    }

    fn check_baseline(&self) -> Result<f64> {
        let l = self.baseline();
        if l > 0.0 && l.is_finite() {
            Ok(l)
        } else {
            Err(Error::Degenerate("pair baseline must be positive".into()))
        }
    }
}

/// RF parameters of the radar link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_spacing_hz: f64,
    /// Effective isotropic radiated power (P_T * G_T), dBm.
    pub eirp_dbm: f64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub noise_figure_db: f64,
    pub sample_rate_hz: f64,
    pub reference_temp_k: f64,
}

impl RadarParams {
    /// FR2 defaults: 28 GHz, 120 kHz SCS, 43 dBm EIRP, 8/16 elements, 13 dB NF.
    /// `bandwidth_mhz` selects the 100 MHz (122.88 Msps) or 400 MHz (491.52 Msps) preset.
    pub fn fr2(bandwidth_mhz: u32) -> Result<Self> {
        let sample_rate_hz = match bandwidth_mhz {
            100 => 122.88e6,
            400 => 491.52e6,
            other => {
                return Err(Error::Config(format!(
                    "unsupported bandwidth {other} MHz (expected 100 or 400)"
                )))
            }
        };
        Ok(Self {
            carrier_hz: 28e9,
            bandwidth_hz: f64::from(bandwidth_mhz) * 1e6,
            subcarrier_spacing_hz: 120e3,
            eirp_dbm: 43.0,
            tx_elements: 8,
            rx_elements: 16,
            noise_figure_db: 13.0,
            sample_rate_hz,
            reference_temp_k: 290.0,
        })
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// System noise temperature T0 * F.
    pub fn noise_temperature_k(&self) -> f64 {
        self.reference_temp_k * 10f64.powf(self.noise_figure_db / 10.0)
    }

    /// Thermal noise power k T_s B over the signal bandwidth, watts.
    pub fn noise_power_w(&self) -> f64 {
        BOLTZMANN * self.noise_temperature_k() * self.bandwidth_hz
    }

    pub fn eirp_w(&self) -> f64 {
        1e-3 * 10f64.powf(self.eirp_dbm / 10.0)
    }

    /// Ideal coherent receive array gain (linear).
    pub fn rx_gain(&self) -> f64 {
        self.rx_elements as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("sample_rate_hz", self.sample_rate_hz),
            ("reference_temp_k", self.reference_temp_k),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.eirp_dbm.is_finite() && self.noise_figure_db.is_finite()) {
            return Err(Error::Config("eirp_dbm and noise_figure_db must be finite".into()));
        }
        if self.tx_elements == 0 || self.rx_elements == 0 {
            return Err(Error::Config("element counts must be positive".into()));
        }
        if self.sample_rate_hz < self.bandwidth_hz {
            return Err(Error::Config("sample_rate_hz must be >= bandwidth_hz".into()));
        }
        Ok(())
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn ranges(pair: &BistaticPair, target: &TargetState) -> Result<(f64, f64, f64)> {
    let l = pair.check_baseline()?;
    let r1 = pair.n1.distance_to(target.x, target.y);
    let r2 = pair.n2.distance_to(target.x, target.y);
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::Degenerate("target coincides with a node".into()));
    }
    Ok((r1, r2, l))
}

/// True TDOA between the echo and the direct path, `(R1 + R2 - L) / c`.
pub fn true_tdoa(pair: &BistaticPair, target: &TargetState) -> Result<f64> {
    let (r1, r2, l) = ranges(pair, target)?;
    Ok(((r1 + r2 - l) / SPEED_OF_LIGHT).max(0.0))
}

/// AoA of the target at `node`, in (-pi, pi].
pub fn true_aoa(node: &NodePosition, target: &TargetState) -> Result<f64> {
    let dx = node.x - target.x;
    let dy = target.y - node.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Degenerate("target coincides with the node".into()));
    }
    Ok(wrap_angle(dx.atan2(dy)))
}

/// Angle from `from` toward `to` in the node AoA convention.
pub fn bearing(from: &NodePosition, to: &NodePosition) -> Result<f64> {
    true_aoa(from, &TargetState::at(to.x, to.y))
}

/// Receiver range from TDOA and receiver AoA, in the canonical frame where
/// the transmitter lies at angle +90 deg from the receiver.
pub fn r2_from_measurements(tdoa: f64, aoa_rx: f64, baseline_l: f64) -> Result<f64> {
    if !(baseline_l > 0.0) {
        return Err(Error::Degenerate("baseline must be positive".into()));
    }
    if !(tdoa >= 0.0) {
        return Err(Error::Degenerate(format!("negative TDOA {tdoa:e}")));
    }
    let ct = SPEED_OF_LIGHT * tdoa;
    let numerator = ct * ct + 2.0 * ct * baseline_l;
    let denominator = 2.0 * ((ct + baseline_l) - baseline_l * aoa_rx.sin());
    if !(denominator > 0.0) {
        return Err(Error::Degenerate(
            "non-positive range denominator (collinear geometry)".into(),
        ));
    }
    Ok(numerator / denominator)
}

/// Closed-form bistatic position fix from one TDOA/AoA measurement.
///
/// The receiving node is N2 in Mode1 and N1 in Mode2. The measured AoA is
/// rotated into the canonical frame of [`r2_from_measurements`] using the
/// bearing of the transmitter, so any pair orientation is supported.
pub fn locate_bistatic(pair: &BistaticPair, meas: &Measurement) -> Result<(f64, f64)> {
    if meas.mode != pair.mode {
        return Err(Error::Config(format!(
            "measurement taken in {} but pair is in {}",
            meas.mode.label(),
            pair.mode.label()
        )));
    }
    let l = pair.check_baseline()?;
    let rx = pair.receiver();
    let tx = pair.transmitter();
    let tx_bearing = bearing(rx, tx)?;
    let canonical = meas.aoa_rad - tx_bearing + PI / 2.0;
    let r = r2_from_measurements(meas.tdoa_s, canonical, l)?;
    Ok((rx.x - r * meas.aoa_rad.sin(), rx.y + r * meas.aoa_rad.cos()))
}

/// True when `theta2` is within `band` of the N2 -> N1 line (either side).
pub fn in_collinearity_band(pair: &BistaticPair, theta2: f64, band: f64) -> Result<bool> {
    let towards_n1 = bearing(&pair.n2, &pair.n1)?;
    let off = wrap_angle(theta2 - towards_n1).abs();
    Ok(off < band || (PI - off) < band)
}

/// Point on the iso-range ellipse `R1 + R2 = sum_range` seen from N2 at `theta2`,
/// using the default exclusion band.
pub fn iso_range_target(pair: &BistaticPair, sum_range: f64, theta2: f64) -> Result<TargetState> {
    iso_range_target_with_band(pair, sum_range, theta2, DEFAULT_EXCLUSION_DEG.to_radians())
}

pub fn iso_range_target_with_band(
    pair: &BistaticPair,
    sum_range: f64,
    theta2: f64,
    band: f64,
) -> Result<TargetState> {
    let l = pair.check_baseline()?;
    if !(sum_range > l) {
        return Err(Error::Degenerate(format!(
            "sum range {sum_range} m must exceed baseline {l} m"
        )));
    }
    if in_collinearity_band(pair, theta2, band)? {
        return Err(Error::Excluded { theta2_deg: theta2.to_degrees() });
    }
    let towards_n1 = bearing(&pair.n2, &pair.n1)?;
    let cos_gamma = (theta2 - towards_n1).cos();
    let r2 = (sum_range * sum_range - l * l) / (2.0 * (sum_range - l * cos_gamma));
    Ok(TargetState::at(
        pair.n2.x - r2 * theta2.sin(),
        pair.n2.y + r2 * theta2.cos(),
    ))
}

/// Bistatic SNR (dB) at the receiver after ideal array combining.
pub fn bistatic_snr(params: &RadarParams, pair: &BistaticPair, target: &TargetState) -> Result<f64> {
    let (r1, r2, _) = ranges(pair, target)?;
    Ok(10.0 * snr_linear(params, r1 * r2, target.rcs_dbsm).log10())
}

pub(crate) fn snr_linear(params: &RadarParams, range_product: f64, rcs_dbsm: f64) -> f64 {
    let lambda = params.wavelength();
    let sigma = 10f64.powf(rcs_dbsm / 10.0);
    let numerator = params.eirp_w() * params.rx_gain() * lambda * lambda * sigma;
    let denominator =
        (4.0 * PI).powi(3) * range_product * range_product * params.noise_power_w();
    numerator / denominator
}

/// Bistatic angle at the target between the lines of sight to N1 and N2.
pub fn bistatic_angle(pair: &BistaticPair, x: f64, y: f64) -> Result<f64> {
    let (r1, r2, _) = ranges(pair, &TargetState::at(x, y))?;
    let (ax, ay) = ((pair.n1.x - x) / r1, (pair.n1.y - y) / r1);
    let (bx, by) = ((pair.n2.x - x) / r2, (pair.n2.y - y) / r2);
    Ok((ax * bx + ay * by).clamp(-1.0, 1.0).acos())
}
