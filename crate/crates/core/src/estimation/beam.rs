use num_complex::Complex64;

use crate::waveform::IqCapture;
use crate::{Error, Result};

/// Half-wavelength ULA steering vector at `psi` off broadside.
pub fn local_steering(elements: usize, psi: f64) -> Vec<Complex64> {
    let step = std::f64::consts::PI * psi.sin();
    (0..elements).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect()
}

/// `y[n] = sum_e conj(w_e) x_e[n]`.
pub fn beamform_weights(capture: &IqCapture, weights: &[Complex64]) -> Result<IqCapture> {
    capture.validate()?;
    if weights.len() != capture.elements {
        return Err(Error::Dimension(format!(
            "{} weights for a {}-element capture",
            weights.len(),
            capture.elements
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); capture.len()];
    for (e, w) in weights.iter().enumerate() {
        let wc = w.conj();
        for (o, x) in out.iter_mut().zip(capture.element(e)) {
            *o += wc * x;
        }
    }
    Ok(IqCapture {
        samples: out,
        elements: 1,
        sample_rate_hz: capture.sample_rate_hz,
        pulses: capture.pulses,
        samples_per_pulse: capture.samples_per_pulse,
    })
}

/// Conventional beam toward `psi` (radians off broadside), normalised by the element count.
pub fn beamform(capture: &IqCapture, psi: f64) -> Result<IqCapture> {
    let m = capture.elements;
    let w: Vec<Complex64> = local_steering(m, psi).into_iter().map(|a| a / m as f64).collect();
    beamform_weights(capture, &w)
}

/// Weights with unit gain toward `look` and a null toward `null`.
pub fn null_steered_weights(elements: usize, look: f64, null: f64) -> Result<Vec<Complex64>> {
    let a = local_steering(elements, look);
    let b = local_steering(elements, null);
    let proj: Complex64 = b.iter().zip(&a).map(|(x, y)| x.conj() * y).sum::<Complex64>() / elements as f64;
    let w: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x - y * proj).collect();
    let gain: Complex64 = w.iter().zip(&a).map(|(x, y)| x.conj() * y).sum();
    if gain.norm() < 1e-3 * elements as f64 {
        return Err(Error::Detection("look and null directions are unresolvable".into()));
    }
    let scale = gain.conj().inv();
    Ok(w.into_iter().map(|x| x * scale).collect())
}

fn project_out(target: &[Complex64], reference: &[Complex64]) -> Result<Vec<Complex64>> {
    let rr: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    if !(rr > 0.0) {
        return Err(Error::Detection("direct-path reference has zero energy".into()));
    }
    let alpha: Complex64 = reference.iter().zip(target).map(|(r, t)| r.conj() * t).sum::<Complex64>() / rr;
    Ok(target.iter().zip(reference).map(|(t, r)| t - alpha * r).collect())
}

/// Least-squares removal of a scaled copy of `direct_beam` from `echo_beam`.
pub fn cancel_direct_path(echo_beam: &IqCapture, direct_beam: &IqCapture) -> Result<IqCapture> {
    check_pair(echo_beam, direct_beam)?;
    if echo_beam.elements != 1 {
        return Err(Error::Dimension("cancel_direct_path expects single-element beams".into()));
    }
    Ok(IqCapture { samples: project_out(&echo_beam.samples, &direct_beam.samples)?, ..echo_beam.clone() })
}

/// Per-element least-squares removal of `direct_beam` from every element of `capture`.
pub fn cancel_per_element(capture: &IqCapture, direct_beam: &IqCapture) -> Result<IqCapture> {
    check_pair(capture, direct_beam)?;
    let mut out = capture.clone();
    for e in 0..capture.elements {
        let cleaned = project_out(capture.element(e), &direct_beam.samples)?;
        out.element_mut(e).copy_from_slice(&cleaned);
    }
    Ok(out)
}

fn check_pair(a: &IqCapture, b: &IqCapture) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if a.len() != b.len() || a.sample_rate_hz != b.sample_rate_hz || b.elements != 1 {
        return Err(Error::Dimension(
            "beams must be single-element with equal lengths and sample rates".into(),
        ));
    }
    Ok(())
}
