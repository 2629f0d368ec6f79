//! Linearised error propagation for one bistatic pair.
//!
//! The measurement vector is `Z = [tdoa, theta_rx]` where `theta_rx` is the
//! AoA at whichever node receives in the pair's mode. Its total derivative is
//! `dZ = C1 dp + C2 dX` with `dp` the target position error and `dX` the node
//! position errors ordered `(x1, y1, x2, y2)`.

use nalgebra::{Matrix2, Matrix2x4, Matrix4};
use serde::{Deserialize, Serialize};

use crate::geometry::{BistaticPair, Mode, TargetState};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Condition number of the row-equilibrated C1 above which we refuse.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative GDOP difference below which two modes count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// True when `second` beats `first` by more than the tie tolerance.
pub fn prefers_second(first: f64, second: f64) -> bool {
    second < first * (1.0 - TIE_TOLERANCE)
}

/// Standard deviations of the TDOA and AoA measurement errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementErrorModel {
    pub sigma_tdoa: f64,
    pub sigma_aoa: f64,
}

impl MeasurementErrorModel {
    pub const ZERO: Self = Self { sigma_tdoa: 0.0, sigma_aoa: 0.0 };

    pub fn new(sigma_tdoa: f64, sigma_aoa: f64) -> Self {
        Self { sigma_tdoa, sigma_aoa }
    }

    /// Gaussian model whose mean absolute errors match the given values
    /// (`sigma = mean_abs * sqrt(pi / 2)`).
    pub fn from_mean_abs(mean_abs_tdoa: f64, mean_abs_aoa: f64) -> Self {
        let k = (std::f64::consts::PI / 2.0).sqrt();
        Self { sigma_tdoa: mean_abs_tdoa * k, sigma_aoa: mean_abs_aoa * k }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self { sigma_tdoa: self.sigma_tdoa * s, sigma_aoa: self.sigma_aoa * s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdopReport {
    pub c1: Matrix2<f64>,
    pub c2: Matrix2x4<f64>,
    pub p_dp: Matrix2<f64>,
    pub gdop: f64,
    pub mode: Mode,
}

struct Partials {
    r1: f64,
    r2: f64,
    l: f64,
}

fn partials(pair: &BistaticPair, target: &TargetState) -> Result<Partials> {
    let l = pair.baseline();
    let r1 = pair.n1.distance_to(target.x, target.y);
    let r2 = pair.n2.distance_to(target.x, target.y);
    if !(l > 0.0) {
        return Err(Error::Degenerate("pair baseline must be positive".into()));
    }
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::Degenerate("target coincides with a node".into()));
    }
    Ok(Partials { r1, r2, l })
}

/// Gradient of the receiving node's AoA with respect to the target position.
///
/// Equal to `-1/(1+v^2) / (y - y_i)` and `-v/(1+v^2) / (y - y_i)` with
/// `v = (x_i - x)/(y - y_i)`, rewritten over `R_i^2` so it stays finite when
/// `y = y_i`.
fn aoa_gradient(pair: &BistaticPair, target: &TargetState) -> (f64, f64) {
    let rx = pair.receiver();
    let dy = target.y - rx.y;
    let dx = rx.x - target.x;
    let r_sq = dx * dx + dy * dy;
    (-dy / r_sq, -dx / r_sq)
}

/// Jacobian of `[tdoa, theta_rx]` with respect to the target `(x, y)`.
pub fn jacobian_c1(pair: &BistaticPair, target: &TargetState) -> Result<Matrix2<f64>> {
    let Partials { r1, r2, .. } = partials(pair, target)?;
    let (x, y) = (target.x, target.y);
    let (n1, n2) = (&pair.n1, &pair.n2);
    let dt_dx = ((x - n1.x) / r1 + (x - n2.x) / r2) / SPEED_OF_LIGHT;
    let dt_dy = ((y - n1.y) / r1 + (y - n2.y) / r2) / SPEED_OF_LIGHT;
    let (da_dx, da_dy) = aoa_gradient(pair, target);
    Ok(Matrix2::new(dt_dx, dt_dy, da_dx, da_dy))
}

/// Jacobian of `[tdoa, theta_rx]` with respect to `(x1, y1, x2, y2)`.
pub fn jacobian_c2(pair: &BistaticPair, target: &TargetState) -> Result<Matrix2x4<f64>> {
    let Partials { r1, r2, l } = partials(pair, target)?;
    let (x, y) = (target.x, target.y);
    let (n1, n2) = (&pair.n1, &pair.n2);
    let c = SPEED_OF_LIGHT;
    let dt = [
        ((n1.x - x) / r1 - (n1.x - n2.x) / l) / c,
        ((n1.y - y) / r1 - (n1.y - n2.y) / l) / c,
        ((n2.x - x) / r2 - (n2.x - n1.x) / l) / c,
        ((n2.y - y) / r2 - (n2.y - n1.y) / l) / c,
    ];
    let (da_dx, da_dy) = aoa_gradient(pair, target);
    // The AoA depends only on the receiving node, with opposite sign to the target.
    let da = match pair.mode {
        Mode::Mode1 => [0.0, 0.0, -da_dx, -da_dy],
        Mode::Mode2 => [-da_dx, -da_dy, 0.0, 0.0],
    };
    Ok(Matrix2x4::new(
        dt[0], dt[1], dt[2], dt[3], //
        da[0], da[1], da[2], da[3],
    ))
}

/// Condition number of C1 after scaling each row to unit norm, so that the
/// mixed units (s/m against rad/m) do not dominate the estimate.
pub fn equilibrated_condition(c1: &Matrix2<f64>) -> f64 {
    let mut m = *c1;
    for r in 0..2 {
        let n = m.row(r).norm();
        if n == 0.0 {
            return f64::INFINITY;
        }
        m.row_mut(r).unscale_mut(n);
    }
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Target-position error covariance `B (Rz + C2 Rx C2^T) B^T`, `B = (C1^T C1)^-1 C1^T`.
pub fn error_covariance(
    c1: &Matrix2<f64>,
    c2: &Matrix2x4<f64>,
    meas: &MeasurementErrorModel,
    pair: &BistaticPair,
) -> Result<Matrix2<f64>> {
    let condition = equilibrated_condition(c1);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    // Rows carry s/m and rad/m; scale them to unit norm before forming the
    // normal matrix. For a square C1 the result equals (C1^T C1)^-1 C1^T.
    let d = Matrix2::from_diagonal(&nalgebra::Vector2::new(1.0 / c1.row(0).norm(), 1.0 / c1.row(1).norm()));
    let m = d * c1;
    let inv = (m.transpose() * m)
        .try_inverse()
        .ok_or(Error::IllConditioned { condition })?;
    let b = inv * m.transpose() * d;
    let rz = Matrix2::from_diagonal(&nalgebra::Vector2::new(
        meas.sigma_tdoa * meas.sigma_tdoa,
        meas.sigma_aoa * meas.sigma_aoa,
    ));
    let rx = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        pair.n1.sigma_x * pair.n1.sigma_x,
        pair.n1.sigma_y * pair.n1.sigma_y,
        pair.n2.sigma_x * pair.n2.sigma_x,
        pair.n2.sigma_y * pair.n2.sigma_y,
    ));
    let p = b * (rz + c2 * rx * c2.transpose()) * b.transpose();
    Ok((p + p.transpose()) * 0.5)
}

/// Full GDOP report for the pair in its current mode.
pub fn gdop(
    pair: &BistaticPair,
    target: &TargetState,
    meas: &MeasurementErrorModel,
) -> Result<GdopReport> {
    let c1 = jacobian_c1(pair, target)?;
    let c2 = jacobian_c2(pair, target)?;
    let p_dp = error_covariance(&c1, &c2, meas, pair)?;
    Ok(GdopReport { c1, c2, p_dp, gdop: p_dp.trace().max(0.0).sqrt(), mode: pair.mode })
}

/// Mode with the lower GDOP; ties (within [`TIE_TOLERANCE`]) go to Mode1.
pub fn select_mode(
    pair: &BistaticPair,
    target: &TargetState,
    meas: &MeasurementErrorModel,
) -> Result<Mode> {
    let g1 = gdop(&pair.with_mode(Mode::Mode1), target, meas);
    let g2 = gdop(&pair.with_mode(Mode::Mode2), target, meas);
    match (g1, g2) {
        (Ok(a), Ok(b)) => Ok(if prefers_second(a.gdop, b.gdop) { Mode::Mode2 } else { Mode::Mode1 }),
        (Ok(_), Err(_)) => Ok(Mode::Mode1),
        (Err(_), Ok(_)) => Ok(Mode::Mode2),
        (Err(e), Err(_)) => Err(Error::Degenerate(format!("both modes degenerate: {e}"))),
    }
}
