//! One transmitter with receivers on a circle: per-pair fixes and fused estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::engine::{perturb_node, trial_seed, MeasurementEngine};
use super::sweep::{contour_target, sweep_angle_deg};
use crate::fusion::{best_pair, compute_weights, solve_multistatic, FusionProblem, SolverOptions};
use crate::geometry::{locate_bistatic, BistaticPair, Mode, NodePosition, TargetState};
use crate::{Error, Result};

pub const RECEIVERS: usize = 3;

/// TX at `n1`; receivers spaced evenly on a circle of radius L around it,
/// the first one at `n2`.
pub fn multistatic_layout(cfg: &ScenarioConfig) -> Vec<BistaticPair> {
    let [x0, y0] = cfg.nodes.n1;
    let [x1, y1] = cfg.nodes.n2;
    let l = cfg.baseline_l();
    let start = (y1 - y0).atan2(x1 - x0);
    let s = cfg.nodes.sigma_m;
    let tx = NodePosition::with_sigma(x0, y0, s);
    (0..RECEIVERS)
        .map(|k| {
            let a = start + k as f64 * 2.0 * std::f64::consts::PI / RECEIVERS as f64;
            BistaticPair::new(tx, NodePosition::with_sigma(x0 + l * a.cos(), y0 + l * a.sin(), s), Mode::Mode1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistaticRow {
    pub theta2_deg: f64,
    pub trial: usize,
    pub x_m: Option<f64>,
    pub y_m: Option<f64>,
    pub fused_x_m: Option<f64>,
    pub fused_y_m: Option<f64>,
    pub fused_err_m: Option<f64>,
    pub best_pair: Option<usize>,
    pub best_pair_err_m: Option<f64>,
    pub pair0_err_m: Option<f64>,
    pub pair1_err_m: Option<f64>,
    pub pair2_err_m: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub status: String,
}

impl MultistaticRow {
    fn empty(theta2_deg: f64, trial: usize, status: String) -> Self {
        Self {
            theta2_deg,
            trial,
            x_m: None,
            y_m: None,
            fused_x_m: None,
            fused_y_m: None,
            fused_err_m: None,
            best_pair: None,
            best_pair_err_m: None,
            pair0_err_m: None,
            pair1_err_m: None,
            pair2_err_m: None,
            iterations: None,
            converged: None,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistaticSummary {
    pub rows: usize,
    pub ok: usize,
    pub mean_fused_err_m: f64,
    pub mean_best_pair_err_m: f64,
    pub median_fused_err_m: f64,
    pub median_best_pair_err_m: f64,
    /// Share of trials where the fused error is at most the best pair's.
    pub fused_win_rate: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) }
}

impl MultistaticSummary {
    pub fn from_rows(rows: &[MultistaticRow]) -> Self {
        let ok: Vec<&MultistaticRow> = rows.iter().filter(|r| r.status == "ok").collect();
        let fused: Vec<f64> = ok.iter().filter_map(|r| r.fused_err_m).collect();
        let best: Vec<f64> = ok.iter().filter_map(|r| r.best_pair_err_m).collect();
        let wins = ok.iter().filter(|r| r.fused_err_m <= r.best_pair_err_m).count();
        Self {
            rows: rows.len(),
            ok: ok.len(),
            mean_fused_err_m: mean(&fused),
            mean_best_pair_err_m: mean(&best),
            median_fused_err_m: median(&fused),
            median_best_pair_err_m: median(&best),
            fused_win_rate: if ok.is_empty() { f64::NAN } else { wins as f64 / ok.len() as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistaticResult {
    pub pairs: Vec<BistaticPair>,
    pub rows: Vec<MultistaticRow>,
    pub summary: MultistaticSummary,
}

/// Whether pair weights come from predicted GDOP or are all one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Gdop,
    Uniform,
}

const TX_TAG: u64 = 0x7478;

fn multistatic_trial(
    engine: &MeasurementEngine,
    cfg: &ScenarioConfig,
    pairs: &[BistaticPair],
    target: &TargetState,
    weighting: Weighting,
    i: usize,
    k: usize,
) -> Result<MultistaticRow> {
    let theta2_deg = sweep_angle_deg(i, cfg.sweep.points);
    let seed = cfg.sweep.seed;
    let tx = perturb_node(&pairs[0].n1, trial_seed(seed, i, k, TX_TAG), &[0]);
    let mut believed = Vec::with_capacity(pairs.len());
    let mut meas = Vec::with_capacity(pairs.len());
    for (p, pair) in pairs.iter().enumerate() {
        let s = trial_seed(seed, i, k, 16 + p as u64);
        meas.push(engine.measure(pair, target, s)?.with_pair_index(p));
        believed.push(BistaticPair { n1: tx, n2: perturb_node(&pair.n2, s, &[1]), mode: pair.mode });
    }
    let errs: Vec<Option<f64>> = believed
        .iter()
        .zip(&meas)
        .map(|(p, m)| locate_bistatic(p, m).ok().map(|f| (f.0 - target.x).hypot(f.1 - target.y)))
        .collect();

    let mut problem = FusionProblem::new(believed, meas)?;
    let err_model = cfg.error_model();
    let ranking = if err_model.sigma_tdoa > 0.0 || err_model.sigma_aoa > 0.0 {
        err_model
    } else {
        SolverOptions::default().ranking_model
    };
    let (best, fix) =
        best_pair(&problem, &ranking).ok_or_else(|| Error::Degenerate("no pair yields a closed-form fix".into()))?;
    if weighting == Weighting::Gdop {
        if let Ok(w) = compute_weights(&problem, fix, &ranking) {
            problem.w = w;
        }
    }
    let opts = SolverOptions { initial_guess: Some(fix), ranking_model: ranking, ..SolverOptions::default() };
    let sol = solve_multistatic(&problem, &opts)?;

    let mut row = MultistaticRow::empty(theta2_deg, k, "ok".into());
    row.x_m = Some(target.x);
    row.y_m = Some(target.y);
    row.fused_x_m = Some(sol.x);
    row.fused_y_m = Some(sol.y);
    row.fused_err_m = Some((sol.x - target.x).hypot(sol.y - target.y));
    row.best_pair = Some(best);
    row.best_pair_err_m = errs[best];
    row.pair0_err_m = errs.first().copied().flatten();
    row.pair1_err_m = errs.get(1).copied().flatten();
    row.pair2_err_m = errs.get(2).copied().flatten();
    row.iterations = Some(sol.iterations);
    row.converged = Some(sol.converged);
    Ok(row)
}

pub fn run_multistatic(cfg: &ScenarioConfig) -> Result<MultistaticResult> {
    run_multistatic_with(cfg, Weighting::Gdop)
}

/// Contour points of the (n1, n2) pair, `trials` rows each.
pub fn run_multistatic_with(cfg: &ScenarioConfig, weighting: Weighting) -> Result<MultistaticResult> {
    cfg.validate()?;
    let engine = MeasurementEngine::from_config(cfg)?;
    let pairs = multistatic_layout(cfg);
    let trials = cfg.sweep.trials;
    let rows: Vec<MultistaticRow> = (0..cfg.sweep.points * trials)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx / trials, idx % trials);
            let theta2_deg = sweep_angle_deg(i, cfg.sweep.points);
            match contour_target(cfg, i) {
                Ok(t) => multistatic_trial(&engine, cfg, &pairs, &t, weighting, i, k)
                    .unwrap_or_else(|e| MultistaticRow::empty(theta2_deg, k, format!("failed: {e}"))),
                Err(Error::Excluded { .. }) => MultistaticRow::empty(theta2_deg, k, "excluded".into()),
                Err(e) => MultistaticRow::empty(theta2_deg, k, format!("failed: {e}")),
            }
        })
        .collect();
    let summary = MultistaticSummary::from_rows(&rows);
    Ok(MultistaticResult { pairs, rows, summary })
}
