//! Iso-range contour sweep: measure, localise in both modes, predict GDOP.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::engine::{perturb_node, trial_seed, MeasurementEngine};
use crate::gdop::gdop;
use crate::geometry::{
    iso_range_target_with_band, locate_bistatic, true_aoa, true_tdoa, wrap_angle, BistaticPair, Mode, TargetState,
};
use crate::{Error, Result};

/// One contour point. Error columns are aggregated over trials: absolute
/// TDOA/AoA errors are averaged, position errors are RMS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta2_deg: f64,
    pub x_m: Option<f64>,
    pub y_m: Option<f64>,
    pub tdoa_true_ns: Option<f64>,
    pub tdoa_meas_ns: Option<f64>,
    pub tdoa_err_ns: Option<f64>,
    pub aoa_true_deg: Option<f64>,
    pub aoa_meas_deg: Option<f64>,
    pub aoa_err_deg: Option<f64>,
    pub err_mode1_m: Option<f64>,
    pub err_mode2_m: Option<f64>,
    pub gdop_mode1_m: Option<f64>,
    pub gdop_mode2_m: Option<f64>,
    pub status: String,
}

impl SweepRow {
    fn empty(theta2_deg: f64, status: String) -> Self {
        Self {
            theta2_deg,
            x_m: None,
            y_m: None,
            tdoa_true_ns: None,
            tdoa_meas_ns: None,
            tdoa_err_ns: None,
            aoa_true_deg: None,
            aoa_meas_deg: None,
            aoa_err_deg: None,
            err_mode1_m: None,
            err_mode2_m: None,
            gdop_mode1_m: None,
            gdop_mode2_m: None,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Some measurement or fix succeeded even if one mode failed.
    pub fn is_usable(&self) -> bool {
        self.is_ok() || self.status.starts_with("partial")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    pub ok: usize,
    pub partial: usize,
    pub excluded: usize,
    pub failed: usize,
    pub mean_abs_tdoa_err_ns: f64,
    pub mean_abs_aoa_err_deg: f64,
    pub mean_err_mode1_m: f64,
    pub mean_err_mode2_m: f64,
    pub mean_gdop_mode1_m: f64,
    pub mean_gdop_mode2_m: f64,
}

impl SweepSummary {
    /// Means over the rows that carry each column.
    pub fn from_rows(rows: &[SweepRow]) -> Self {
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.is_usable()).collect();
        let mean = |f: fn(&SweepRow) -> Option<f64>| {
            let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
            if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }
        };
        Self {
            points: rows.len(),
            ok: rows.iter().filter(|r| r.is_ok()).count(),
            partial: rows.iter().filter(|r| r.status.starts_with("partial")).count(),
            excluded: rows.iter().filter(|r| r.status == "excluded").count(),
            failed: rows.iter().filter(|r| r.status.starts_with("failed")).count(),
            mean_abs_tdoa_err_ns: mean(|r| r.tdoa_err_ns),
            mean_abs_aoa_err_deg: mean(|r| r.aoa_err_deg),
            mean_err_mode1_m: mean(|r| r.err_mode1_m),
            mean_err_mode2_m: mean(|r| r.err_mode2_m),
            mean_gdop_mode1_m: mean(|r| r.gdop_mode1_m),
            mean_gdop_mode2_m: mean(|r| r.gdop_mode2_m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Receiver angle of sweep point `i`.
pub fn sweep_angle_deg(i: usize, points: usize) -> f64 {
    i as f64 * 360.0 / points as f64
}

/// Contour target at sweep point `i`, or the exclusion error.
pub fn contour_target(cfg: &ScenarioConfig, i: usize) -> Result<TargetState> {
    let theta = sweep_angle_deg(i, cfg.sweep.points).to_radians();
    let t = iso_range_target_with_band(
        &cfg.pair(Mode::Mode1),
        cfg.sweep.sum_range_m,
        theta,
        cfg.sweep.exclusion_deg.to_radians(),
    )?;
    Ok(t.with_rcs(cfg.sweep.rcs_dbsm))
}

/// The pair with node positions as the solver believes them.
pub fn believed_pair(pair: &BistaticPair, seed: u64) -> BistaticPair {
    BistaticPair {
        n1: perturb_node(&pair.n1, seed, &[1]),
        n2: perturb_node(&pair.n2, seed, &[2]),
        mode: pair.mode,
    }
}

const NODE_TAG: u64 = 0x6e;

struct ModeTrial {
    tdoa: f64,
    aoa: f64,
    err: f64,
}

/// Both modes of one trial; a mode whose measurement or fix fails is `Err`.
fn run_trial(
    engine: &MeasurementEngine,
    cfg: &ScenarioConfig,
    target: &TargetState,
    i: usize,
    k: usize,
) -> [Result<ModeTrial>; 2] {
    // Both modes of a trial see the same node errors and the same noise
    // draws, so their comparison is paired.
    let node_seed = trial_seed(cfg.sweep.seed, i, k, NODE_TAG);
    let seed = trial_seed(cfg.sweep.seed, i, k, 0);
    [Mode::Mode1, Mode::Mode2].map(|mode| {
        let pair = cfg.pair(mode);
        let meas = engine.measure(&pair, target, seed)?;
        let fix = locate_bistatic(&believed_pair(&pair, node_seed), &meas)?;
        Ok(ModeTrial { tdoa: meas.tdoa_s, aoa: meas.aoa_rad, err: (fix.0 - target.x).hypot(fix.1 - target.y) })
    })
}

fn sweep_point(engine: &MeasurementEngine, cfg: &ScenarioConfig, i: usize) -> SweepRow {
    let theta2_deg = sweep_angle_deg(i, cfg.sweep.points);
    let target = match contour_target(cfg, i) {
        Ok(t) => t,
        Err(Error::Excluded { .. }) => return SweepRow::empty(theta2_deg, "excluded".into()),
        Err(e) => return SweepRow::empty(theta2_deg, format!("failed: {e}")),
    };
    let pair = cfg.pair(Mode::Mode1);
    let mut row = SweepRow::empty(theta2_deg, "ok".into());
    row.x_m = Some(target.x);
    row.y_m = Some(target.y);
    let truth = true_tdoa(&pair, &target).and_then(|t| Ok((t, true_aoa(pair.receiver(), &target)?)));
    let (tdoa_true, aoa_true) = match truth {
        Ok(v) => v,
        Err(e) => {
            row.status = format!("failed: {e}");
            return row;
        }
    };
    row.tdoa_true_ns = Some(tdoa_true * 1e9);
    row.aoa_true_deg = Some(aoa_true.to_degrees());
    let err_model = cfg.error_model();
    row.gdop_mode1_m = gdop(&pair, &target, &err_model).ok().map(|g| g.gdop);
    row.gdop_mode2_m = gdop(&pair.with_mode(Mode::Mode2), &target, &err_model).ok().map(|g| g.gdop);

    let mut per_mode: [Vec<ModeTrial>; 2] = [Vec::new(), Vec::new()];
    let mut first_err: [Option<Error>; 2] = [None, None];
    for k in 0..cfg.sweep.trials {
        for (m, res) in run_trial(engine, cfg, &target, i, k).into_iter().enumerate() {
            match res {
                Ok(t) => per_mode[m].push(t),
                Err(e) => {
                    first_err[m].get_or_insert(e);
                }
            }
        }
    }
    let rms = |v: &[ModeTrial]| (!v.is_empty()).then(|| (v.iter().map(|t| t.err * t.err).sum::<f64>() / v.len() as f64).sqrt());
    // Measurement columns describe the mode-1 receiver.
    let m1 = &per_mode[0];
    if !m1.is_empty() {
        let n = m1.len() as f64;
        row.tdoa_meas_ns = Some(m1[0].tdoa * 1e9);
        row.aoa_meas_deg = Some(m1[0].aoa.to_degrees());
        row.tdoa_err_ns = Some(m1.iter().map(|t| (t.tdoa - tdoa_true).abs()).sum::<f64>() / n * 1e9);
        row.aoa_err_deg = Some(m1.iter().map(|t| wrap_angle(t.aoa - aoa_true).abs()).sum::<f64>() / n * 180.0 / PI);
    }
    row.err_mode1_m = rms(m1);
    row.err_mode2_m = rms(&per_mode[1]);
    row.status = match (row.err_mode1_m.is_some(), row.err_mode2_m.is_some()) {
        (true, true) if first_err.iter().all(Option::is_none) => "ok".into(),
        (false, false) => format!("failed: {}", first_err[0].take().or(first_err[1].take()).expect("a trial failed")),
        _ => {
            let (m, e) = first_err.iter().enumerate().find_map(|(m, e)| e.as_ref().map(|e| (m + 1, e))).expect("a trial failed");
            format!("partial: mode {m}: {e}")
        }
    };
    row
}

pub fn run_iso_range_sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let engine = MeasurementEngine::from_config(cfg)?;
    let rows: Vec<SweepRow> = (0..cfg.sweep.points).into_par_iter().map(|i| sweep_point(&engine, cfg, i)).collect();
    let summary = SweepSummary::from_rows(&rows);
    Ok(SweepResult { rows, summary })
}
