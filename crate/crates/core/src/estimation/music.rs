use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::beam::local_steering;
use crate::waveform::IqCapture;
use crate::{Error, Result};

const MIN_SNAPSHOTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct MusicOptions {
    pub grid_deg: f64,
    pub snapshots: usize,
    /// Samples (of pulse 0) the snapshots are drawn from; whole pulse if `None`.
    pub window: Option<Range<usize>>,
    /// Forward-backward spatial smoothing with this subarray length.
    pub smoothing_subarray: Option<usize>,
    /// Directions already projected out of the data (e.g. a cancelled direct path).
    pub blocked: Vec<f64>,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self { grid_deg: 0.1, snapshots: 128, window: None, smoothing_subarray: None, blocked: Vec::new() }
    }
}

/// Single-call MUSIC on a half-wavelength ULA; angles off broadside in radians.
pub fn music_aoa(capture: &IqCapture, n_sources: usize, grid_deg: f64) -> Result<Vec<f64>> {
    music_aoa_with(capture, n_sources, &MusicOptions { grid_deg, ..MusicOptions::default() })
}

fn covariance(capture: &IqCapture, opts: &MusicOptions) -> Result<DMatrix<Complex64>> {
    let m = capture.elements;
    let window = opts.window.clone().unwrap_or(0..capture.samples_per_pulse);
    if window.end > capture.samples_per_pulse || window.is_empty() {
        return Err(Error::Dimension("MUSIC window outside the pulse".into()));
    }
    let snaps = opts.snapshots.min(window.len());
    if snaps < MIN_SNAPSHOTS {
        return Err(Error::Dimension(format!("MUSIC needs >= {MIN_SNAPSHOTS} snapshots, got {snaps}")));
    }
    let stride = window.len() / snaps;
    let x = DMatrix::from_fn(m, snaps, |e, k| capture.pulse(e, 0)[window.start + k * stride]);
    Ok(&x * x.adjoint() / Complex64::new(snaps as f64, 0.0))
}

fn smooth(r: &DMatrix<Complex64>, sub: usize) -> Result<DMatrix<Complex64>> {
    let m = r.nrows();
    if sub < 2 || sub > m {
        return Err(Error::Config(format!("smoothing subarray {sub} invalid for {m} elements")));
    }
    let count = m - sub + 1;
    let mut fwd = DMatrix::zeros(sub, sub);
    for i in 0..count {
        fwd += r.view((i, i), (sub, sub));
    }
    fwd /= Complex64::new(count as f64, 0.0);
    let bwd = DMatrix::from_fn(sub, sub, |i, j| fwd[(sub - 1 - i, sub - 1 - j)].conj());
    Ok((fwd + bwd) / Complex64::new(2.0, 0.0))
}

/// Orthogonal projector removing the `blocked` steering directions.
fn blocking_projector(m: usize, blocked: &[f64]) -> Option<DMatrix<Complex64>> {
    if blocked.is_empty() {
        return None;
    }
    let a = DMatrix::from_fn(m, blocked.len(), |e, j| local_steering(m, blocked[j])[e]);
    let gram = a.adjoint() * &a;
    let inv = gram.try_inverse()?;
    Some(DMatrix::identity(m, m) - &a * inv * a.adjoint())
}

/// Grid of angles (radians) and the MUSIC null-spectrum denominator
/// `|| En^H a ||^2 / || a ||^2` (smaller is more signal-like).
pub fn music_spectrum(capture: &IqCapture, n_sources: usize, opts: &MusicOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    capture.validate()?;
    if capture.elements < n_sources + 1 || n_sources == 0 {
        return Err(Error::Dimension(format!(
            "MUSIC with {n_sources} sources needs more than {} elements",
            capture.elements
        )));
    }
    if !(opts.grid_deg > 0.0) {
        return Err(Error::Config("MUSIC grid must be positive".into()));
    }
    let mut r = covariance(capture, opts)?;
    if let Some(sub) = opts.smoothing_subarray {
        r = smooth(&r, sub)?;
    }
    let m = r.nrows();
    let proj = blocking_projector(m, &opts.blocked);
    if let Some(p) = &proj {
        r = p * r * p;
    }
    let eig = r.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let noise = DMatrix::from_fn(m, m - n_sources, |i, j| eig.eigenvectors[(i, order[n_sources + j])]);
    let q = &noise * noise.adjoint();

    let steps = (180.0 / opts.grid_deg).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (-90.0 + i as f64 * opts.grid_deg).to_radians()).collect();
    let den = grid
        .iter()
        .map(|&psi| {
            let mut a = nalgebra::DVector::from_vec(local_steering(m, psi));
            if let Some(p) = &proj {
                a = p * a;
            }
            let norm = a.norm_squared();
            // Directions swallowed by the blocking projector carry no information.
            if norm < 0.1 * m as f64 {
                return f64::INFINITY;
            }
            (a.adjoint() * &q * &a)[(0, 0)].re.max(0.0) / norm
        })
        .collect();
    Ok((grid, den))
}

pub fn music_aoa_with(capture: &IqCapture, n_sources: usize, opts: &MusicOptions) -> Result<Vec<f64>> {
    let (grid, den) = music_spectrum(capture, n_sources, opts)?;
    let n = grid.len();
    let step = grid[1] - grid[0];
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let here = den[i];
        if !here.is_finite() {
            continue;
        }
        let left = if i > 0 { den[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n { den[i + 1] } else { f64::INFINITY };
        if !(here < left && here <= right) {
            continue;
        }
        let offset = if left.is_finite() && right.is_finite() {
            let curv = left - 2.0 * here + right;
            if curv > 0.0 { (0.5 * (left - right) / curv).clamp(-0.5, 0.5) } else { 0.0 }
        } else {
            0.0
        };
        peaks.push((grid[i] + offset * step, here));
    }
    if peaks.is_empty() {
        return Err(Error::Detection("MUSIC spectrum has no peaks".into()));
    }
    peaks.sort_by(|a, b| a.1.total_cmp(&b.1));
    peaks.truncate(n_sources);
    Ok(peaks.into_iter().map(|p| p.0).collect())
}
