//! Multistatic fusion: weighted least squares over all pairs, minimised with
//! Levenberg-Marquardt.
//!
//! Each pair contributes two residuals,
//! `sqrt(w) a c (tdoa - f_tdoa)` and `sqrt(w) b wrap(aoa - f_aoa) / 2 pi`,
//! so the squared residual norm is the loss.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use crate::estimation::Measurement;
use crate::gdop::{gdop, MeasurementErrorModel};
use crate::geometry::{locate_bistatic, true_aoa, true_tdoa, wrap_angle, BistaticPair, TargetState};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionProblem {
    pub pairs: Vec<BistaticPair>,
    pub measurements: Vec<Measurement>,
    /// TDOA weights, 1/m.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
}

impl FusionProblem {
    /// Unit `a`, `b` and `w` for every pair.
    pub fn new(pairs: Vec<BistaticPair>, measurements: Vec<Measurement>) -> Result<Self> {
        let n = pairs.len();
        let p = Self { pairs, measurements, a: vec![1.0; n], b: vec![1.0; n], w: vec![1.0; n] };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pairs.len();
        if n == 0 {
            return Err(Error::Config("fusion needs at least one pair".into()));
        }
        if [self.measurements.len(), self.a.len(), self.b.len(), self.w.len()].iter().any(|&l| l != n) {
            return Err(Error::Dimension("pairs, measurements and weights differ in length".into()));
        }
        if self.a.iter().chain(&self.b).chain(&self.w).any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("fusion weights must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_damping: f64,
    pub initial_guess: Option<(f64, f64)>,
    /// Error model used to rank pairs when picking the initial guess.
    pub ranking_model: MeasurementErrorModel,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-12,
            step_tolerance: 1e-9,
            initial_damping: 1e-3,
            initial_guess: None,
            ranking_model: MeasurementErrorModel::from_mean_abs(1e-9, 0.1f64.to_radians()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: f64,
    pub y: f64,
    pub iterations: usize,
    pub converged: bool,
    pub loss: f64,
    pub initial_loss: f64,
}

/// The `2N` weighted residuals at `(x, y)`.
pub fn residuals(x: f64, y: f64, problem: &FusionProblem) -> Result<Vec<f64>> {
    let t = TargetState::at(x, y);
    let mut out = Vec::with_capacity(2 * problem.len());
    for i in 0..problem.len() {
        let pair = &problem.pairs[i];
        let m = &problem.measurements[i];
        let sw = problem.w[i].sqrt();
        let f_tdoa = tdoa_unclamped(pair, &t)?;
        let f_aoa = true_aoa(pair.receiver(), &t)?;
        out.push(sw * problem.a[i] * SPEED_OF_LIGHT * (m.tdoa_s - f_tdoa));
        out.push(sw * problem.b[i] * wrap_angle(m.aoa_rad - f_aoa) / (2.0 * PI));
    }
    Ok(out)
}

fn tdoa_unclamped(pair: &BistaticPair, t: &TargetState) -> Result<f64> {
    // Validates the geometry; the smooth form keeps the Jacobian consistent.
    true_tdoa(pair, t)?;
    let r1 = pair.n1.distance_to(t.x, t.y);
    let r2 = pair.n2.distance_to(t.x, t.y);
    Ok((r1 + r2 - pair.baseline()) / SPEED_OF_LIGHT)
}

/// Analytic `2N x 2` Jacobian of [`residuals`], row-major pairs of `(d/dx, d/dy)`.
pub fn residual_jacobian(x: f64, y: f64, problem: &FusionProblem) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(2 * problem.len());
    for i in 0..problem.len() {
        let pair = &problem.pairs[i];
        let sw = problem.w[i].sqrt();
        let r1 = pair.n1.distance_to(x, y);
        let r2 = pair.n2.distance_to(x, y);
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(Error::Degenerate("evaluation point coincides with a node".into()));
        }
        let k = -sw * problem.a[i];
        out.push([
            k * ((x - pair.n1.x) / r1 + (x - pair.n2.x) / r2),
            k * ((y - pair.n1.y) / r1 + (y - pair.n2.y) / r2),
        ]);
        let rx = pair.receiver();
        let rr = (x - rx.x).powi(2) + (y - rx.y).powi(2);
        let k = sw * problem.b[i] / (2.0 * PI);
        out.push([k * (y - rx.y) / rr, k * (rx.x - x) / rr]);
    }
    Ok(out)
}

pub fn wls_loss(x: f64, y: f64, problem: &FusionProblem) -> Result<f64> {
    Ok(residuals(x, y, problem)?.iter().map(|r| r * r).sum())
}

/// `w_i = 1 / gdop_i` normalised to sum to `N`; degenerate pairs get zero.
pub fn compute_weights(
    problem: &FusionProblem,
    rough: (f64, f64),
    err: &MeasurementErrorModel,
) -> Result<Vec<f64>> {
    let t = TargetState::at(rough.0, rough.1);
    let inv: Vec<f64> = problem
        .pairs
        .iter()
        .map(|p| match gdop(p, &t, err) {
            Ok(r) if r.gdop > 0.0 && r.gdop.is_finite() => 1.0 / r.gdop,
            _ => 0.0,
        })
        .collect();
    let total: f64 = inv.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("no pair has a usable GDOP at the rough position".into()));
    }
    let n = problem.len() as f64;
    Ok(inv.iter().map(|v| v * n / total).collect())
}

/// Index of the pair with the lowest predicted GDOP at its own closed-form fix,
/// together with that fix.
pub fn best_pair(problem: &FusionProblem, err: &MeasurementErrorModel) -> Option<(usize, (f64, f64))> {
    let mut best: Option<(usize, (f64, f64), f64)> = None;
    for (i, (pair, m)) in problem.pairs.iter().zip(&problem.measurements).enumerate() {
        let Ok(fix) = locate_bistatic(pair, m) else { continue };
        let Ok(report) = gdop(pair, &TargetState::at(fix.0, fix.1), err) else { continue };
        if best.as_ref().is_none_or(|b| report.gdop < b.2) {
            best = Some((i, fix, report.gdop));
        }
    }
    best.map(|(i, fix, _)| (i, fix))
}

fn centroid(problem: &FusionProblem) -> (f64, f64) {
    let nodes: Vec<_> = problem.pairs.iter().flat_map(|p| [p.n1, p.n2]).collect();
    let n = nodes.len() as f64;
    (nodes.iter().map(|p| p.x).sum::<f64>() / n, nodes.iter().map(|p| p.y).sum::<f64>() / n)
}

pub fn solve_multistatic(problem: &FusionProblem, opts: &SolverOptions) -> Result<Solution> {
    problem.validate()?;
    if problem.pairs.iter().all(|p| !(p.baseline() > 0.0)) {
        return Err(Error::Degenerate("all pairs have zero baseline".into()));
    }
    let mut candidates = Vec::new();
    if let Some(g) = opts.initial_guess {
        candidates.push(g);
    } else if let Some((_, fix)) = best_pair(problem, &opts.ranking_model) {
        candidates.push(fix);
    }
    candidates.push(centroid(problem));
    let start = candidates
        .into_iter()
        .find_map(|g| wls_loss(g.0, g.1, problem).ok().map(|l| (g, l)))
        .ok_or_else(|| Error::Solver("no valid starting point".into()))?;
    levenberg_marquardt(problem, opts, start.0, start.1)
}

fn levenberg_marquardt(problem: &FusionProblem, opts: &SolverOptions, start: (f64, f64), loss0: f64) -> Result<Solution> {
    let mut p = Vector2::new(start.0, start.1);
    let mut loss = loss0;
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let r = residuals(p.x, p.y, problem)?;
        let jac = residual_jacobian(p.x, p.y, problem)?;
        let mut jtj = Matrix2::zeros();
        let mut g = Vector2::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            let v = Vector2::new(row[0], row[1]);
            jtj += v * v.transpose();
            g += v * *ri;
        }
        if g.amax() < opts.gradient_tolerance {
            converged = true;
            break;
        }
        let floor = 1e-12 * jtj.diagonal().max().max(1e-300);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..2 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(floor);
            }
            let Some(step) = damped.try_inverse().map(|inv| -(inv * g)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = p + step;
            match wls_loss(cand.x, cand.y, problem) {
                Ok(l) if l < loss => {
                    p = cand;
                    loss = l;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if step.norm() < opts.step_tolerance {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
    }
    Ok(Solution { x: p.x, y: p.y, iterations, converged, loss, initial_loss: loss0 })
}
