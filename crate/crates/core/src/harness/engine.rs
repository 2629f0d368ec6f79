//! Measurement engines shared by the sweeps.

use rand_distr::{Distribution, StandardNormal};

use super::config::{Engine, ScenarioConfig};
use crate::channel::{build_paths_with, propagate_with, ArrayModel, ChannelOptions, DelayModel};
use crate::estimation::{model_based_measure, process_capture, to_local, Measurement, ReceiverConfig, ReceiverOutput};
use crate::gdop::MeasurementErrorModel;
use crate::geometry::{bearing, true_aoa, BistaticPair, NodePosition, RadarParams, TargetState};
use crate::rng::{derive_seed, substream};
use crate::waveform::{generate_slot, matched_reference, pulse_train, IqCapture, WaveformConfig};
use crate::{Error, Result};

const NODE_STREAM: u64 = 0x4e4f_4445;

/// Waveform, channel and receiver settings for signal-level measurements.
#[derive(Debug, Clone)]
pub struct SignalChain {
    pub params: RadarParams,
    pub waveform: WaveformConfig,
    pub channel: ChannelOptions,
    pub receiver: ReceiverConfig,
    slot: IqCapture,
    reference: IqCapture,
}

impl SignalChain {
    pub fn new(params: &RadarParams) -> Result<Self> {
        let bw = (params.bandwidth_hz / 1e6).round() as u32;
        let waveform = WaveformConfig::nr_fr2(bw)?;
        if (waveform.sample_rate_hz() - params.sample_rate_hz).abs() > 1e-6 * params.sample_rate_hz {
            return Err(Error::Config("radar sample rate does not match the waveform numerology".into()));
        }
        let channel = ChannelOptions {
            delay_model: DelayModel::PerHopLagrange { order: 3 },
            ..ChannelOptions::from_params(params)
        };
        Ok(Self {
            params: *params,
            slot: generate_slot(&waveform)?,
            reference: matched_reference(&waveform)?,
            waveform,
            channel,
            receiver: ReceiverConfig::default(),
        })
    }

    pub fn reference(&self) -> &IqCapture {
        &self.reference
    }

    /// Simulate `pulses` slots of the pair's two-path channel and run the receiver.
    pub fn run(&self, pair: &BistaticPair, target: &TargetState, pulses: usize, seed: u64) -> Result<ReceiverOutput> {
        let (direct, echo) = build_paths_with(pair, target, &self.params, &self.channel)?;
        let rx = pair.receiver();
        let tx_angle = bearing(rx, pair.transmitter())?;
        let array = ArrayModel::ula(self.params.rx_elements, tx_angle);
        let tx = if pulses == 1 { self.slot.clone() } else { pulse_train(&self.slot, pulses)? };
        let capture = propagate_with(&tx, &[direct, echo], &array, &self.params, seed, &self.channel)?;
        // The transmit beam is steered at the target, so the side it lies on is known.
        let (_, behind) = to_local(true_aoa(rx, target)?, &array);
        process_capture(&capture, &array, tx_angle, behind, &self.waveform, &self.reference, &self.receiver)
    }

    pub fn measure(&self, pair: &BistaticPair, target: &TargetState, seed: u64) -> Result<Measurement> {
        let out = self.run(pair, target, 1, seed)?;
        Ok(Measurement::new(out.tdoa_s, out.aoa_rad, pair.mode))
    }
}

/// Either engine behind one call.
#[derive(Debug, Clone)]
pub enum MeasurementEngine {
    Signal(Box<SignalChain>),
    Model { params: RadarParams, err: MeasurementErrorModel, quantize: bool },
}

impl MeasurementEngine {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let params = cfg.params()?;
        Ok(match cfg.sweep.engine {
            Engine::Signal => MeasurementEngine::Signal(Box::new(SignalChain::new(&params)?)),
            Engine::Model => MeasurementEngine::Model { params, err: cfg.error_model(), quantize: cfg.sweep.quantize },
        })
    }

    pub fn measure(&self, pair: &BistaticPair, target: &TargetState, seed: u64) -> Result<Measurement> {
        match self {
            MeasurementEngine::Signal(chain) => chain.measure(pair, target, seed),
            MeasurementEngine::Model { params, err, quantize } => {
                model_based_measure(pair, target, params, err, *quantize, seed)
            }
        }
    }
}

/// Node position as believed by the solver: truth plus N(0, sigma) per axis.
pub fn perturb_node(node: &NodePosition, seed: u64, keys: &[u64]) -> NodePosition {
    if node.sigma_x == 0.0 && node.sigma_y == 0.0 {
        return *node;
    }
    let mut k = vec![NODE_STREAM];
    k.extend_from_slice(keys);
    let mut rng = substream(seed, &k);
    let dx: f64 = StandardNormal.sample(&mut rng);
    let dy: f64 = StandardNormal.sample(&mut rng);
    NodePosition { x: node.x + dx * node.sigma_x, y: node.y + dy * node.sigma_y, ..*node }
}

/// Per-(point, trial, tag) seed.
pub fn trial_seed(seed: u64, point: usize, trial: usize, tag: u64) -> u64 {
    derive_seed(seed, &[point as u64, trial as u64, tag])
}
