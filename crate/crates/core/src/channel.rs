//! Two-path bistatic propagation onto a uniform linear receive array.
//!
//! The direct TX -> RX path and the TX -> target -> RX echo are delayed,
//! scaled to their link budgets, phased across the array and summed with
//! thermal noise. The echo carries a per-pulse Doppler phase (stop-and-hop).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::geometry::{bearing, BistaticPair, RadarParams, TargetState};
use crate::rng::substream;
use crate::waveform::IqCapture;
use crate::{Error, Result, BOLTZMANN, SPEED_OF_LIGHT};

const NOISE_STREAM: u64 = 0x4e4f_4953_45;

/// Uniform linear array. `boresight` is the array normal in the node AoA
/// convention; element `k` sees phase `2 pi k d sin(angle - boresight)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayModel {
    pub elements: usize,
    pub spacing_wavelengths: f64,
    pub boresight: f64,
}

impl ArrayModel {
    pub fn ula(elements: usize, boresight: f64) -> Self {
        Self { elements, spacing_wavelengths: 0.5, boresight }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 || !(self.spacing_wavelengths > 0.0) {
            return Err(Error::Config("array needs >= 1 element and positive spacing".into()));
        }
        Ok(())
    }
}

/// One propagation path as seen at the receive array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub delay_s: f64,
    /// Per-element voltage gain, sqrt(W) for a unit-power transmit waveform.
    pub amplitude: f64,
    pub aoa: f64,
    pub doppler_hz: f64,
    /// Individual propagation legs, summing to `delay_s`.
    pub hop_delays_s: Vec<f64>,
}

/// How fractional propagation delays are realised on sampled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelayModel {
    /// Exact band-limited delay of the whole path via a frequency-domain phase ramp.
    Spectral,
    /// Each propagation leg delayed separately with a Lagrange FIR interpolator,
    /// as a hop-by-hop link simulator does.
    PerHopLagrange { order: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOptions {
    /// Transmit array used to evaluate the sidelobe gain toward the receiver.
    pub tx_elements: usize,
    /// Overrides the transmit array-factor gain on the direct path, dB.
    pub direct_path_gain_db: Option<f64>,
    pub delay_model: DelayModel,
    pub add_noise: bool,
}

impl ChannelOptions {
    pub fn from_params(params: &RadarParams) -> Self {
        Self {
            tx_elements: params.tx_elements,
            direct_path_gain_db: None,
            delay_model: DelayModel::Spectral,
            add_noise: true,
        }
    }
}

pub fn steering_vector(array: &ArrayModel, angle: f64, _carrier_hz: f64) -> Vec<Complex64> {
    let step = 2.0 * PI * array.spacing_wavelengths * (angle - array.boresight).sin();
    (0..array.elements)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect()
}

/// Normalised array-factor magnitude toward `look` when steered at `steer`.
pub fn array_factor(array: &ArrayModel, steer: f64, look: f64) -> f64 {
    let a = steering_vector(array, steer, 0.0);
    let b = steering_vector(array, look, 0.0);
    a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm() / array.elements as f64
}

/// Direct and echo paths for `target` illuminated by the pair's transmitter.
pub fn build_paths(
    pair: &BistaticPair,
    target: &TargetState,
    params: &RadarParams,
) -> Result<(PathDescriptor, PathDescriptor)> {
    build_paths_with(pair, target, params, &ChannelOptions::from_params(params))
}

pub fn build_paths_with(
    pair: &BistaticPair,
    target: &TargetState,
    params: &RadarParams,
    opts: &ChannelOptions,
) -> Result<(PathDescriptor, PathDescriptor)> {
    let tx = pair.transmitter();
    let rx = pair.receiver();
    let l = pair.baseline();
    let r_tx = tx.distance_to(target.x, target.y);
    let r_rx = rx.distance_to(target.x, target.y);
    if !(l > 0.0 && r_tx > 0.0 && r_rx > 0.0) {
        return Err(Error::Degenerate("target or nodes coincide".into()));
    }
    let lambda = params.wavelength();
    let eirp = params.eirp_w();

    let tx_gain = match opts.direct_path_gain_db {
        Some(db) => 10f64.powf(db / 10.0),
        None => {
            let tx_array = ArrayModel::ula(opts.tx_elements, bearing(tx, rx)?);
            let toward_target = crate::geometry::true_aoa(tx, target)?;
            array_factor(&tx_array, toward_target, tx_array.boresight).powi(2)
        }
    };
    let direct_power = eirp * tx_gain * (lambda / (4.0 * PI * l)).powi(2);
    let direct = PathDescriptor {
        delay_s: l / SPEED_OF_LIGHT,
        amplitude: direct_power.sqrt(),
        aoa: bearing(rx, tx)?,
        doppler_hz: 0.0,
        hop_delays_s: vec![l / SPEED_OF_LIGHT],
    };

    let sigma = 10f64.powf(target.rcs_dbsm / 10.0);
    let echo_power =
        eirp * lambda * lambda * sigma / ((4.0 * PI).powi(3) * (r_tx * r_rx).powi(2));
    // d(R1 + R2)/dt = -(u1 + u2) . v with u_i pointing from the target to node i.
    let (u1x, u1y) = ((tx.x - target.x) / r_tx, (tx.y - target.y) / r_tx);
    let (u2x, u2y) = ((rx.x - target.x) / r_rx, (rx.y - target.y) / r_rx);
    let range_rate = -((u1x + u2x) * target.vx + (u1y + u2y) * target.vy);
    let echo = PathDescriptor {
        delay_s: (r_tx + r_rx) / SPEED_OF_LIGHT,
        amplitude: echo_power.sqrt(),
        aoa: crate::geometry::true_aoa(rx, target)?,
        doppler_hz: params.carrier_hz / SPEED_OF_LIGHT * range_rate,
        hop_delays_s: vec![r_tx / SPEED_OF_LIGHT, r_rx / SPEED_OF_LIGHT],
    };
    Ok((direct, echo))
}

/// Cyclic band-limited delay by `delay_samples` (may be fractional).
pub fn fractional_delay(x: &mut [Complex64], delay_samples: f64) {
    let n = x.len();
    if n == 0 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(x);
    for (k, v) in x.iter_mut().enumerate() {
        let f = if 2 * k < n { k as f64 } else { k as f64 - n as f64 } / n as f64;
        *v *= Complex64::from_polar(1.0 / n as f64, -2.0 * PI * f * delay_samples);
    }
    planner.plan_fft_inverse(n).process(x);
}

/// Linear (non-cyclic) delay with Lagrange interpolation of the given order.
pub fn lagrange_delay(x: &[Complex64], delay_samples: f64, order: usize) -> Vec<Complex64> {
    let half = (order as isize - 1) / 2;
    let shift = delay_samples.floor() as isize - half;
    let mu = delay_samples - shift as f64;
    let taps: Vec<f64> = (0..=order)
        .map(|k| {
            (0..=order)
                .filter(|&m| m != k)
                .map(|m| (mu - m as f64) / (k as f64 - m as f64))
                .product()
        })
        .collect();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(k, h)| {
                    let j = i - shift - k as isize;
                    (0..n).contains(&j).then(|| x[j as usize] * *h)
                })
                .sum()
        })
        .collect()
}

fn delayed(signal: &[Complex64], path: &PathDescriptor, fs: f64, model: DelayModel) -> Vec<Complex64> {
    match model {
        DelayModel::Spectral => {
            let d = path.delay_s * fs;
            let pad = d.ceil().max(0.0) as usize + 64;
            let mut buf = signal.to_vec();
            buf.resize(signal.len() + pad, Complex64::new(0.0, 0.0));
            fractional_delay(&mut buf, d);
            buf.truncate(signal.len());
            buf
        }
        DelayModel::PerHopLagrange { order } => path
            .hop_delays_s
            .iter()
            .fold(signal.to_vec(), |acc, hop| lagrange_delay(&acc, hop * fs, order)),
    }
}

/// Propagate a single-element transmit capture over `paths` onto `rx_array`
/// with the default (spectral delay, noisy) channel options.
pub fn propagate(
    tx: &IqCapture,
    paths: &[PathDescriptor],
    rx_array: &ArrayModel,
    params: &RadarParams,
    seed: u64,
) -> Result<IqCapture> {
    propagate_with(tx, paths, rx_array, params, seed, &ChannelOptions::from_params(params))
}

pub fn propagate_with(
    tx: &IqCapture,
    paths: &[PathDescriptor],
    rx_array: &ArrayModel,
    params: &RadarParams,
    seed: u64,
    opts: &ChannelOptions,
) -> Result<IqCapture> {
    tx.validate()?;
    rx_array.validate()?;
    if tx.elements != 1 {
        return Err(Error::Dimension("transmit capture must be single-element".into()));
    }
    let fs = params.sample_rate_hz;
    if (tx.sample_rate_hz - fs).abs() > 1e-9 * fs {
        return Err(Error::Dimension(format!(
            "capture sample rate {} Hz differs from radar sample rate {} Hz",
            tx.sample_rate_hz, fs
        )));
    }
    let len = tx.len();
    let spp = tx.samples_per_pulse;
    let pri = spp as f64 / fs;
    let mut out = IqCapture::zeros(rx_array.elements, tx.pulses, spp, fs);

    for path in paths {
        let rotated: Vec<Complex64> = tx
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let p = (i / spp) as f64;
                s * Complex64::from_polar(1.0, 2.0 * PI * path.doppler_hz * p * pri)
            })
            .collect();
        let carrier = Complex64::from_polar(
            path.amplitude,
            -2.0 * PI * (params.carrier_hz * path.delay_s).fract(),
        );
        let sig = delayed(&rotated, path, fs, opts.delay_model);
        let steer = steering_vector(rx_array, path.aoa, params.carrier_hz);
        for (e, a) in steer.iter().enumerate() {
            let g = carrier * a;
            for (o, s) in out.element_mut(e).iter_mut().zip(&sig) {
                *o += g * s;
            }
        }
    }

    if opts.add_noise {
        let sd = (BOLTZMANN * params.noise_temperature_k() * fs / 2.0).sqrt();
        for e in 0..rx_array.elements {
            let chan = out.element_mut(e);
            for p in 0..tx.pulses {
                let mut rng = substream(seed, &[NOISE_STREAM, p as u64, e as u64]);
                for s in &mut chan[p * spp..(p + 1) * spp] {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *s += Complex64::new(re * sd, im * sd);
                }
            }
        }
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}
