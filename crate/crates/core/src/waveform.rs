//! CP-OFDM slot generation with a Type-I comb pilot symbol.
//!
//! One slot carries `symbols_per_slot` OFDM symbols. The pilot symbol puts
//! seeded QPSK on every other occupied subcarrier; every other resource
//! element carries seeded QPSK data. The matched-filter reference keeps the
//! pilots and zeroes everything else.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::rng::substream;
use crate::{Error, Result};

const PILOT_STREAM: u64 = 0x5049_4c4f_54;
const DATA_STREAM: u64 = 0x4441_5441;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub fft_size: usize,
    pub occupied_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub cp_samples: usize,
    /// Extra cyclic-prefix samples carried once per slot (the long CP).
    pub long_cp_extra: usize,
    pub dmrs_symbol_index: usize,
    pub symbols_per_slot: usize,
    pub pilot_comb_offset: usize,
    /// Seed of the pilot sequence.
    pub seed: u64,
    /// Seed of the data payload; changing it never alters the reference.
    pub data_seed: u64,
    /// Uniform CP on every symbol with the long-CP budget left idle at the
    /// end of the slot; otherwise the first symbol gets the long CP.
    pub simple_cp: bool,
}

impl WaveformConfig {
    /// 120 kHz numerology at 100 MHz (1024 FFT, 66 RBs) or 400 MHz (4096 FFT, 264 RBs).
    pub fn nr_fr2(bandwidth_mhz: u32) -> Result<Self> {
        let scale = match bandwidth_mhz {
            100 => 1,
            400 => 4,
            other => {
                return Err(Error::Config(format!(
                    "unsupported bandwidth {other} MHz (expected 100 or 400)"
                )))
            }
        };
        Ok(Self {
            fft_size: 1024 * scale,
            occupied_subcarriers: 792 * scale,
            subcarrier_spacing_hz: 120e3,
            cp_samples: 72 * scale,
            long_cp_extra: 16 * scale,
            dmrs_symbol_index: 2,
            symbols_per_slot: 14,
            pilot_comb_offset: 0,
            seed: 1,
            data_seed: 2,
            simple_cp: true,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * self.subcarrier_spacing_hz
    }

    pub fn slot_len(&self) -> usize {
        self.symbols_per_slot * (self.fft_size + self.cp_samples) + self.long_cp_extra
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_len() as f64 / self.sample_rate_hz()
    }

    /// CP length of symbol `l`.
    pub fn cp_len(&self, l: usize) -> usize {
        if !self.simple_cp && l == 0 {
            self.cp_samples + self.long_cp_extra
        } else {
            self.cp_samples
        }
    }

    /// First sample of symbol `l` (start of its CP).
    pub fn symbol_start(&self, l: usize) -> usize {
        (0..l).map(|k| self.cp_len(k) + self.fft_size).sum()
    }

    /// Range of samples occupied by the pilot symbol, CP included.
    pub fn pilot_symbol_span(&self) -> std::ops::Range<usize> {
        let s = self.symbol_start(self.dmrs_symbol_index);
        s..s + self.cp_len(self.dmrs_symbol_index) + self.fft_size
    }

    pub fn is_pilot(&self, symbol: usize, subcarrier: usize) -> bool {
        symbol == self.dmrs_symbol_index && subcarrier % 2 == self.pilot_comb_offset
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.fft_size == 0 || self.occupied_subcarriers == 0 {
            return fail("fft_size and occupied_subcarriers must be positive");
        }
        if self.occupied_subcarriers > self.fft_size {
            return fail("occupied_subcarriers exceeds fft_size");
        }
        if self.occupied_subcarriers % 12 != 0 {
            return fail("occupied_subcarriers must be a whole number of resource blocks");
        }
        if self.cp_samples >= self.fft_size {
            return fail("cp_samples must be shorter than the FFT");
        }
        if self.symbols_per_slot == 0 || self.dmrs_symbol_index >= self.symbols_per_slot {
            return fail("dmrs_symbol_index outside the slot");
        }
        if self.pilot_comb_offset > 1 {
            return fail("pilot_comb_offset must be 0 or 1");
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return fail("subcarrier_spacing_hz must be positive");
        }
        Ok(())
    }
}

/// Multi-element complex baseband capture, stored element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture {
    pub samples: Vec<Complex64>,
    pub elements: usize,
    pub sample_rate_hz: f64,
    pub pulses: usize,
    pub samples_per_pulse: usize,
}

impl IqCapture {
    pub fn single(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        let n = samples.len();
        Self { samples, elements: 1, sample_rate_hz, pulses: 1, samples_per_pulse: n }
    }

    pub fn zeros(elements: usize, pulses: usize, samples_per_pulse: usize, sample_rate_hz: f64) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); elements * pulses * samples_per_pulse],
            elements,
            sample_rate_hz,
            pulses,
            samples_per_pulse,
        }
    }

    /// Samples per element.
    pub fn len(&self) -> usize {
        self.pulses * self.samples_per_pulse
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn element(&self, e: usize) -> &[Complex64] {
        let n = self.len();
        &self.samples[e * n..(e + 1) * n]
    }

    pub fn element_mut(&mut self, e: usize) -> &mut [Complex64] {
        let n = self.len();
        &mut self.samples[e * n..(e + 1) * n]
    }

    pub fn pulse(&self, e: usize, p: usize) -> &[Complex64] {
        let s = self.samples_per_pulse;
        &self.element(e)[p * s..(p + 1) * s]
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.elements * self.pulses * self.samples_per_pulse {
            return Err(Error::Dimension(format!(
                "capture holds {} samples, expected {} x {} x {}",
                self.samples.len(),
                self.elements,
                self.pulses,
                self.samples_per_pulse
            )));
        }
        if self.samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Dimension("capture contains non-finite samples".into()));
        }
        Ok(())
    }
}

fn qpsk<R: Rng>(rng: &mut R) -> Complex64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bits: u8 = rng.random_range(0..4);
    Complex64::new(
        if bits & 1 == 0 { h } else { -h },
        if bits & 2 == 0 { h } else { -h },
    )
}

/// Resource grid `[symbol][subcarrier]` over the occupied band, lowest
/// frequency first. `with_data = false` yields the pilot-only grid.
pub fn resource_grid(cfg: &WaveformConfig, with_data: bool) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let mut pilots = substream(cfg.seed, &[PILOT_STREAM]);
    let mut grid = Vec::with_capacity(cfg.symbols_per_slot);
    for l in 0..cfg.symbols_per_slot {
        let mut data = substream(cfg.data_seed, &[DATA_STREAM, l as u64]);
        let row = (0..cfg.occupied_subcarriers)
            .map(|k| {
                if cfg.is_pilot(l, k) {
                    qpsk(&mut pilots)
                } else if with_data {
                    qpsk(&mut data)
                } else {
                    zero
                }
            })
            .collect();
        grid.push(row);
    }
    Ok(grid)
}

fn bin_of(cfg: &WaveformConfig, k: usize) -> usize {
    let n = cfg.fft_size as isize;
    let signed = k as isize - (cfg.occupied_subcarriers / 2) as isize;
    signed.rem_euclid(n) as usize
}

/// OFDM-modulate a resource grid into one slot, scaled to unit power per
/// sample when every occupied resource element is loaded.
pub fn modulate(cfg: &WaveformConfig, grid: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if grid.len() != cfg.symbols_per_slot
        || grid.iter().any(|r| r.len() != cfg.occupied_subcarriers)
    {
        return Err(Error::Dimension("resource grid does not match the configuration".into()));
    }
    let n = cfg.fft_size;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let scale = 1.0 / (cfg.occupied_subcarriers as f64).sqrt();
    let mut out = Vec::with_capacity(cfg.slot_len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (l, row) in grid.iter().enumerate() {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (k, &v) in row.iter().enumerate() {
            buf[bin_of(cfg, k)] = v;
        }
        ifft.process(&mut buf);
        let cp = cfg.cp_len(l);
        out.extend(buf[n - cp..].iter().map(|s| s * scale));
        out.extend(buf.iter().map(|s| s * scale));
    }
    out.resize(cfg.slot_len(), Complex64::new(0.0, 0.0));
    Ok(out)
}

/// Remove the CP and FFT each symbol, undoing [`modulate`].
pub fn demodulate(cfg: &WaveformConfig, slot: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    if slot.len() < cfg.slot_len() {
        return Err(Error::Dimension("slot shorter than the configured length".into()));
    }
    let n = cfg.fft_size;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let scale = (cfg.occupied_subcarriers as f64).sqrt() / n as f64;
    (0..cfg.symbols_per_slot)
        .map(|l| {
            let start = cfg.symbol_start(l) + cfg.cp_len(l);
            let mut buf = slot[start..start + n].to_vec();
            fft.process(&mut buf);
            Ok((0..cfg.occupied_subcarriers)
                .map(|k| buf[bin_of(cfg, k)] * scale)
                .collect())
        })
        .collect()
}

/// One slot of pilots plus random data.
pub fn generate_slot(cfg: &WaveformConfig) -> Result<IqCapture> {
    let grid = resource_grid(cfg, true)?;
    Ok(IqCapture::single(modulate(cfg, &grid)?, cfg.sample_rate_hz()))
}

/// Pilot-only slot used as the matched-filter reference.
pub fn matched_reference(cfg: &WaveformConfig) -> Result<IqCapture> {
    let grid = resource_grid(cfg, false)?;
    Ok(IqCapture::single(modulate(cfg, &grid)?, cfg.sample_rate_hz()))
}

/// Repeat a single-pulse capture `count` times back to back.
pub fn pulse_train(slot: &IqCapture, count: usize) -> Result<IqCapture> {
    if count < 1 {
        return Err(Error::Config("pulse count must be at least 1".into()));
    }
    if slot.pulses != 1 {
        return Err(Error::Dimension("pulse_train expects a single-pulse capture".into()));
    }
    let spp = slot.samples_per_pulse;
    let mut samples = Vec::with_capacity(slot.samples.len() * count);
    for e in 0..slot.elements {
        for _ in 0..count {
            samples.extend_from_slice(slot.element(e));
        }
    }
    Ok(IqCapture {
        samples,
        elements: slot.elements,
        sample_rate_hz: slot.sample_rate_hz,
        pulses: count,
        samples_per_pulse: spp,
    })
}

fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Write interleaved little-endian f32 I/Q, sample-major with elements
/// interleaved per sample, plus a `<path>.meta` sidecar.
pub fn write_raw(path: &Path, capture: &IqCapture) -> Result<()> {
    capture.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    for n in 0..capture.len() {
        for e in 0..capture.elements {
            let s = capture.element(e)[n];
            w.write_all(&(s.re as f32).to_le_bytes())?;
            w.write_all(&(s.im as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    let mut m = BufWriter::new(File::create(meta_path(path))?);
    writeln!(m, "format = cf32_le")?;
    writeln!(m, "layout = sample_major")?;
    writeln!(m, "sample_rate_hz = {}", capture.sample_rate_hz)?;
    writeln!(m, "elements = {}", capture.elements)?;
    writeln!(m, "pulses = {}", capture.pulses)?;
    writeln!(m, "samples_per_pulse = {}", capture.samples_per_pulse)?;
    m.flush()?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<IqCapture> {
    let meta = BufReader::new(File::open(meta_path(path))?);
    let (mut rate, mut elements, mut pulses, mut spp) = (None, None, None, None);
    for line in meta.lines() {
        let line = line?;
        let Some((k, v)) = line.split_once('=') else { continue };
        let v = v.trim();
        let bad = || Error::Config(format!("bad metadata line '{line}'"));
        match k.trim() {
            "sample_rate_hz" => rate = Some(v.parse::<f64>().map_err(|_| bad())?),
            "elements" => elements = Some(v.parse::<usize>().map_err(|_| bad())?),
            "pulses" => pulses = Some(v.parse::<usize>().map_err(|_| bad())?),
            "samples_per_pulse" => spp = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => {}
        }
    }
    let missing = || Error::Config("incomplete raw capture metadata".into());
    let (rate, elements, pulses, spp) = (
        rate.ok_or_else(missing)?,
        elements.ok_or_else(missing)?,
        pulses.ok_or_else(missing)?,
        spp.ok_or_else(missing)?,
    );
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let len = pulses * spp;
    if bytes.len() != len * elements * 8 {
        return Err(Error::Dimension("raw file size does not match metadata".into()));
    }
    let mut cap = IqCapture::zeros(elements, pulses, spp, rate);
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        let re = f32::from_le_bytes(chunk[0..4].try_into().expect("4 bytes"));
        let im = f32::from_le_bytes(chunk[4..8].try_into().expect("4 bytes"));
        let (n, e) = (i / elements, i % elements);
        cap.element_mut(e)[n] = Complex64::new(f64::from(re), f64::from(im));
    }
    Ok(cap)
}
