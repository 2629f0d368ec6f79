//! Scenario configuration: built-in presets and strict TOML files.
//!
//! ```toml
//! scenario_id = "custom"
//!
//! [nodes]
//! n1 = [0.0, 0.0]
//! n2 = [25.0, 0.0]
//! sigma_m = 0.01
//!
//! [radar]
//! bandwidth_mhz = 100
//!
//! [sweep]
//! sum_range_m = 50.0
//! rcs_dbsm = 0.0
//! points = 360
//! engine = "model"
//! error_override = { mean_abs_tdoa_ns = 3.55, mean_abs_aoa_deg = 0.16 }
//!
//! [motion]
//! speed_mps = 0.2
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gdop::MeasurementErrorModel;
use crate::geometry::{BistaticPair, Mode, NodePosition, RadarParams, DEFAULT_EXCLUSION_DEG};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Full waveform, channel and receiver chain.
    Signal,
    /// Truth plus Gaussian errors.
    Model,
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal" | "signal_level" => Ok(Engine::Signal),
            "model" | "model_based" => Ok(Engine::Model),
            other => Err(Error::Config(format!("unknown engine '{other}' (expected signal or model)"))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Signal => "signal",
            Engine::Model => "model",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorOverride {
    pub mean_abs_tdoa_ns: f64,
    pub mean_abs_aoa_deg: f64,
}

impl ErrorOverride {
    pub fn model(&self) -> MeasurementErrorModel {
        MeasurementErrorModel::from_mean_abs(self.mean_abs_tdoa_ns * 1e-9, self.mean_abs_aoa_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesSection {
    pub n1: [f64; 2],
    pub n2: [f64; 2],
    /// Per-axis standard deviation of the node position knowledge.
    #[serde(default)]
    pub sigma_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    pub bandwidth_mhz: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eirp_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_elements: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_elements: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_figure_db: Option<f64>,
}

impl RadarSection {
    pub fn params(&self) -> Result<RadarParams> {
        let mut p = RadarParams::fr2(self.bandwidth_mhz)?;
        if let Some(v) = self.carrier_hz {
            p.carrier_hz = v;
        }
        if let Some(v) = self.eirp_dbm {
            p.eirp_dbm = v;
        }
        if let Some(v) = self.tx_elements {
            p.tx_elements = v;
        }
        if let Some(v) = self.rx_elements {
            p.rx_elements = v;
        }
        if let Some(v) = self.noise_figure_db {
            p.noise_figure_db = v;
        }
        p.validate()?;
        Ok(p)
    }
}

fn default_points() -> usize {
    360
}
fn default_trials() -> usize {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_engine() -> Engine {
    Engine::Model
}
fn default_exclusion() -> f64 {
    DEFAULT_EXCLUSION_DEG
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sum_range_m: f64,
    #[serde(default)]
    pub rcs_dbsm: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_engine")]
    pub engine: Engine,
    #[serde(default = "default_exclusion")]
    pub exclusion_deg: f64,
    /// Snap model-based TDOAs to the sample grid before adding noise.
    #[serde(default)]
    pub quantize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_override: Option<ErrorOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionDirection {
    RadialInward,
    RadialOutward,
}

fn default_theta() -> f64 {
    60.0
}
fn default_pulses() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    pub speed_mps: f64,
    #[serde(default = "default_direction")]
    pub direction: MotionDirection,
    #[serde(default = "default_theta")]
    pub theta2_deg: f64,
    #[serde(default = "default_pulses")]
    pub pulses: usize,
}

fn default_direction() -> MotionDirection {
    MotionDirection::RadialInward
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub nodes: NodesSection,
    pub radar: RadarSection,
    pub sweep: SweepSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSection>,
}

pub const PRESETS: [&str; 3] = ["scenario1", "scenario2", "scenario3"];

/// Mean absolute TDOA (ns) and AoA (deg) errors reported for each scenario.
pub fn reported_errors(scenario: &str, bandwidth_mhz: u32) -> Option<ErrorOverride> {
    let (t, a) = match (scenario, bandwidth_mhz) {
        ("scenario1", 100) => (4.2, 0.0),
        ("scenario2", 100) => (1.21, 0.03),
        ("scenario3", 100) => (3.55, 0.16),
        ("scenario1", 400) => (0.17, 0.0),
        ("scenario2", 400) => (1.21, 0.03),
        ("scenario3", 400) => (0.02, 0.23),
        _ => return None,
    };
    Some(ErrorOverride { mean_abs_tdoa_ns: t, mean_abs_aoa_deg: a })
}

impl ScenarioConfig {
    pub fn preset(name: &str, bandwidth_mhz: u32) -> Result<Self> {
        let (l, sum, rcs) = match name {
            "scenario1" => (3.0, 6.0, -20.0),
            "scenario2" => (15.0, 30.0, 0.0),
            "scenario3" => (25.0, 50.0, 0.0),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        RadarParams::fr2(bandwidth_mhz)?;
        let cfg = Self {
            scenario_id: name.to_string(),
            nodes: NodesSection { n1: [0.0, 0.0], n2: [l, 0.0], sigma_m: 0.01 },
            radar: RadarSection {
                bandwidth_mhz,
                carrier_hz: None,
                eirp_dbm: None,
                tx_elements: None,
                rx_elements: None,
                noise_figure_db: None,
            },
            sweep: SweepSection {
                sum_range_m: sum,
                rcs_dbsm: rcs,
                points: default_points(),
                trials: default_trials(),
                seed: default_seed(),
                engine: Engine::Model,
                exclusion_deg: DEFAULT_EXCLUSION_DEG,
                quantize: false,
                error_override: reported_errors(name, bandwidth_mhz),
            },
            motion: Some(MotionSection {
                speed_mps: 0.2,
                direction: MotionDirection::RadialInward,
                theta2_deg: 60.0,
                pulses: 64,
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Preset name or path to a TOML file.
    pub fn load(spec: &str, bandwidth_mhz: Option<u32>) -> Result<Self> {
        if PRESETS.contains(&spec) {
            return Self::preset(spec, bandwidth_mhz.unwrap_or(100));
        }
        let text = std::fs::read_to_string(Path::new(spec))
            .map_err(|e| Error::Config(format!("cannot read scenario '{spec}': {e}")))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{spec}: {e}")))?;
        if let Some(bw) = bandwidth_mhz {
            cfg.radar.bandwidth_mhz = bw;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.params()?;
        let l = self.baseline_l();
        if !(l > 0.0) {
            return Err(Error::Config("nodes n1 and n2 must be distinct".into()));
        }
        if !(self.sweep.sum_range_m > l) {
            return Err(Error::Config(format!(
                "sum_range_m ({}) must exceed the baseline ({l} m)",
                self.sweep.sum_range_m
            )));
        }
        if self.sweep.points < 4 {
            return Err(Error::Config("sweep points must be >= 4".into()));
        }
        if self.sweep.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.nodes.sigma_m >= 0.0) || !(self.sweep.exclusion_deg >= 0.0) {
            return Err(Error::Config("sigma_m and exclusion_deg must be non-negative".into()));
        }
        if let Some(e) = &self.sweep.error_override {
            if !(e.mean_abs_tdoa_ns >= 0.0 && e.mean_abs_aoa_deg >= 0.0) {
                return Err(Error::Config("error_override values must be non-negative".into()));
            }
        }
        if let Some(m) = &self.motion {
            if !(m.speed_mps >= 0.0) || m.pulses < 2 {
                return Err(Error::Config("motion needs speed >= 0 and >= 2 pulses".into()));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<RadarParams> {
        self.radar.params()
    }

    pub fn baseline_l(&self) -> f64 {
        let [a, b] = [self.nodes.n1, self.nodes.n2];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    pub fn pair(&self, mode: Mode) -> BistaticPair {
        let s = self.nodes.sigma_m;
        BistaticPair::new(
            NodePosition::with_sigma(self.nodes.n1[0], self.nodes.n1[1], s),
            NodePosition::with_sigma(self.nodes.n2[0], self.nodes.n2[1], s),
            mode,
        )
    }

    pub fn error_model(&self) -> MeasurementErrorModel {
        self.sweep.error_override.map(|e| e.model()).unwrap_or(MeasurementErrorModel::ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario3_preset() {
        let c = ScenarioConfig::preset("scenario3", 100).unwrap();
        assert_eq!(c.baseline_l(), 25.0);
        assert_eq!(c.sweep.sum_range_m, 50.0);
        assert_eq!(c.sweep.rcs_dbsm, 0.0);
        assert_eq!(c.params().unwrap().carrier_hz, 28e9);
    }

    #[test]
    fn round_trip() {
        for name in PRESETS {
            for bw in [100, 400] {
                let c = ScenarioConfig::preset(name, bw).unwrap();
                let text = c.to_toml_string().unwrap();
                assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), c);
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ScenarioConfig::preset("scenario1", 100).unwrap();
        c.sweep.sum_range_m = 3.0;
        assert!(c.validate().unwrap_err().is_config());
        let text = ScenarioConfig::preset("scenario1", 100).unwrap().to_toml_string().unwrap();
        let bad = text.replace("[sweep]\n", "[sweep]\nbogus = 1\n");
        let err = ScenarioConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line"), "{err}");
        assert!(ScenarioConfig::preset("scenario9", 100).is_err());
        assert!(ScenarioConfig::preset("scenario1", 200).is_err());
    }
}
