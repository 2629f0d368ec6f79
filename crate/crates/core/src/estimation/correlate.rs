use std::ops::Range;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::RangeDopplerMap;
use crate::waveform::IqCapture;
use crate::{Error, Result};

/// Echo peak must exceed the median correlation magnitude by this much.
pub const DEFAULT_THRESHOLD_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPeak {
    pub index: usize,
    pub magnitude: f64,
    pub median: f64,
}

impl CorrelationPeak {
    fn from_magnitudes(mags: &[f64]) -> Self {
        let index = (0..mags.len()).fold(0, |b, i| if mags[i] > mags[b] { i } else { b });
        let mut sorted = mags.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        Self { index, magnitude: mags[index], median }
    }

    pub fn prominence_db(&self) -> f64 {
        20.0 * (self.magnitude / self.median).log10()
    }
}

fn nonzero_span(reference: &[Complex64]) -> Result<Range<usize>> {
    let first = reference.iter().position(|s| s.norm_sqr() > 0.0);
    let last = reference.iter().rposition(|s| s.norm_sqr() > 0.0);
    match (first, last) {
        (Some(a), Some(b)) => Ok(a..b + 1),
        _ => Err(Error::Detection("reference waveform is empty".into())),
    }
}

/// `c[t] = sum_{n in span} conj(reference[n]) x[n + t]` for `t < max_lag`.
pub fn correlate(x: &[Complex64], reference: &[Complex64], span: Range<usize>, max_lag: usize) -> Vec<Complex64> {
    let len = span.len();
    let n = (len + max_lag).next_power_of_two();
    let zero = Complex64::new(0.0, 0.0);
    let mut a: Vec<Complex64> = (0..n).map(|i| x.get(span.start + i).copied().unwrap_or(zero)).collect();
    let mut b: Vec<Complex64> = (0..n).map(|i| if i < len { reference[span.start + i] } else { zero }).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q.conj() / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut a);
    a.truncate(max_lag);
    a
}

fn default_max_lag(span: &Range<usize>) -> usize {
    span.len() / 2
}

/// TDOA from the matched-filter peaks of the first pulse of each beam.
pub fn estimate_tdoa(direct_beam: &IqCapture, echo_clean: &IqCapture, reference: &IqCapture) -> Result<f64> {
    estimate_tdoa_with(direct_beam, echo_clean, reference, DEFAULT_THRESHOLD_DB).map(|(t, _, _)| t)
}

pub fn estimate_tdoa_with(
    direct_beam: &IqCapture,
    echo_clean: &IqCapture,
    reference: &IqCapture,
    threshold_db: f64,
) -> Result<(f64, CorrelationPeak, CorrelationPeak)> {
    for c in [direct_beam, echo_clean, reference] {
        c.validate()?;
        if c.elements != 1 {
            return Err(Error::Dimension("TDOA estimation expects single-element beams".into()));
        }
    }
    let fs = reference.sample_rate_hz;
    if direct_beam.sample_rate_hz != fs || echo_clean.sample_rate_hz != fs {
        return Err(Error::Dimension("beams and reference differ in sample rate".into()));
    }
    let r = reference.pulse(0, 0);
    let span = nonzero_span(r)?;
    let max_lag = default_max_lag(&span);
    let peak = |c: &IqCapture| {
        let mags: Vec<f64> = correlate(c.pulse(0, 0), r, span.clone(), max_lag).iter().map(|v| v.norm()).collect();
        CorrelationPeak::from_magnitudes(&mags)
    };
    let direct = peak(direct_beam);
    let echo = peak(echo_clean);
    if !(echo.prominence_db() >= threshold_db) {
        return Err(Error::Detection(format!(
            "echo peak only {:.1} dB above the correlation floor",
            echo.prominence_db()
        )));
    }
    if echo.index < direct.index {
        return Err(Error::Detection(format!(
            "echo peak (lag {}) precedes the direct-path peak (lag {}); direct path not detected",
            echo.index, direct.index
        )));
    }
    let lag = echo.index as f64 - direct.index as f64;
    Ok((lag / fs, direct, echo))
}

/// Fast-time matched filter per pulse, then a zero-padded (x4) slow-time DFT per delay bin.
pub fn range_doppler(train_echo: &IqCapture, reference: &IqCapture) -> Result<RangeDopplerMap> {
    train_echo.validate()?;
    if train_echo.elements != 1 {
        return Err(Error::Dimension("range_doppler expects a single-element beam".into()));
    }
    let pulses = train_echo.pulses;
    if pulses < 2 {
        return Err(Error::Config(format!("range_doppler needs >= 2 pulses, got {pulses}")));
    }
    let fs = train_echo.sample_rate_hz;
    let r = reference.pulse(0, 0);
    let span = nonzero_span(r)?;
    let max_lag = default_max_lag(&span);
    let fast: Vec<Vec<Complex64>> =
        (0..pulses).map(|p| correlate(train_echo.pulse(0, p), r, span.clone(), max_lag)).collect();

    let k = 4 * pulses;
    let pri = train_echo.samples_per_pulse as f64 / fs;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(k);
    let magnitudes = (0..max_lag)
        .map(|t| {
            let mut slow = vec![Complex64::new(0.0, 0.0); k];
            for (p, row) in fast.iter().enumerate() {
                slow[p] = row[t];
            }
            fft.process(&mut slow);
            slow.rotate_right(k / 2);
            slow.iter().map(|v| v.norm()).collect()
        })
        .collect();
    let map = RangeDopplerMap {
        magnitudes,
        delay_axis: (0..max_lag).map(|t| t as f64 / fs).collect(),
        doppler_axis: (0..k).map(|j| (j as f64 - (k / 2) as f64) / (k as f64 * pri)).collect(),
    };
    map.validate()?;
    Ok(map)
}
