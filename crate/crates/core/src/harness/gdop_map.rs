//! GDOP of both modes over a rectangular grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::gdop::{gdop, prefers_second, MeasurementErrorModel};
use crate::geometry::{BistaticPair, Mode, TargetState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Box three baselines wide centred on the pair.
    pub fn around(cfg: &ScenarioConfig, n: usize) -> Self {
        let l = cfg.baseline_l();
        let cx = 0.5 * (cfg.nodes.n1[0] + cfg.nodes.n2[0]);
        let cy = 0.5 * (cfg.nodes.n1[1] + cfg.nodes.n2[1]);
        Self { x_min: cx - 1.5 * l, x_max: cx + 1.5 * l, y_min: cy - 1.5 * l, y_max: cy + 1.5 * l, nx: n, ny: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::Config("grid needs >= 2 cells per axis and increasing bounds".into()));
        }
        Ok(())
    }

    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x_min + (self.x_max - self.x_min) * ix as f64 / (self.nx - 1) as f64,
            self.y_min + (self.y_max - self.y_min) * iy as f64 / (self.ny - 1) as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdopCell {
    pub x_m: f64,
    pub y_m: f64,
    pub gdop_mode1_m: Option<f64>,
    pub gdop_mode2_m: Option<f64>,
    /// 1 or 2; ties go to 1; empty when both modes are degenerate.
    pub best_mode: Option<u8>,
}

pub fn gdop_cell(pair: &BistaticPair, err: &MeasurementErrorModel, x: f64, y: f64) -> GdopCell {
    let t = TargetState::at(x, y);
    let g1 = gdop(&pair.with_mode(Mode::Mode1), &t, err).ok().map(|r| r.gdop);
    let g2 = gdop(&pair.with_mode(Mode::Mode2), &t, err).ok().map(|r| r.gdop);
    let best_mode = match (g1, g2) {
        (Some(a), Some(b)) => Some(if prefers_second(a, b) { 2 } else { 1 }),
        (Some(_), None) => Some(1),
        (None, Some(_)) => Some(2),
        (None, None) => None,
    };
    GdopCell { x_m: x, y_m: y, gdop_mode1_m: g1, gdop_mode2_m: g2, best_mode }
}

/// Row-major (y outer, x inner) grid of GDOP cells.
pub fn run_gdop_map(cfg: &ScenarioConfig, grid: &GridSpec) -> Result<Vec<GdopCell>> {
    cfg.validate()?;
    grid.validate()?;
    let pair = cfg.pair(Mode::Mode1);
    let err = cfg.error_model();
    Ok((0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.point(k % grid.nx, k / grid.nx);
            gdop_cell(&pair, &err, x, y)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisector_ties_and_plumbing_identity() {
        let mut cfg = ScenarioConfig::preset("scenario3", 100).unwrap();
        cfg.nodes.sigma_m = 0.0;
        let grid = GridSpec { x_min: 12.5, x_max: 12.5 + 1e-9, y_min: 3.0, y_max: 40.0, nx: 2, ny: 9 };
        let cells = run_gdop_map(&cfg, &grid).unwrap();
        for c in cells.iter().step_by(2) {
            let (a, b) = (c.gdop_mode1_m.unwrap(), c.gdop_mode2_m.unwrap());
            assert!((a - b).abs() <= 1e-9 * a, "{a} {b}");
        }
        let pair = cfg.pair(Mode::Mode1);
        let err = cfg.error_model();
        for c in &cells {
            let direct = gdop(&pair, &TargetState::at(c.x_m, c.y_m), &err).unwrap().gdop;
            assert_eq!(c.gdop_mode1_m.unwrap().to_bits(), direct.to_bits());
        }
    }
}
