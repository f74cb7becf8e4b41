//! Simplified speech-to-reverberation modulation energy ratio.
//!
//! 1. Eight acoustic bands, log-spaced between 125 Hz and 8 kHz, isolated by
//!    masking the signal's spectrum.
//! 2. Envelope of each band: full-wave rectification followed by a 32-sample
//!    moving average, decimated to 500 Hz.
//! 3. Modulation spectrum of each mean-removed, Hann-weighted envelope.
//! 4. Energy in the octave modulation bands centred at 4, 8, 16, 32 Hz over
//!    the energy in the bands centred at 64 and 128 Hz, summed over acoustic
//!    bands and scaled by [`SRMR_SCALE`].

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::SAMPLE_RATE;
use crate::error::{Error, Result};

pub const ACOUSTIC_BANDS: usize = 8;
pub const MOD_CENTRES_LOW: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
pub const MOD_CENTRES_HIGH: [f64; 2] = [64.0, 128.0];
/// Normalisation ceiling used by [`srmr_norm`].
pub const S_MAX: f64 = 20.0;
/// Puts clean synthetic speech around 10.
pub const SRMR_SCALE: f64 = 0.6;

const ENV_DECIMATION: usize = 32;

fn band_edges() -> Vec<f64> {
    (0..=ACOUSTIC_BANDS)
        .map(|i| 125.0 * (8000.0f64 / 125.0).powf(i as f64 / ACOUSTIC_BANDS as f64))
        .collect()
}

/// Per-band (low, high) modulation energies.
pub fn modulation_energies(x: &[f32]) -> Result<Vec<(f64, f64)>> {
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Metric("SRMR is undefined for an all-zero signal".into()));
    }
    if x.len() < 4 * ENV_DECIMATION {
        return Err(Error::Length(format!("{} samples is too short for SRMR", x.len())));
    }
    let fs = SAMPLE_RATE as f64;
    let n = x.len().next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    spec.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut spec);

    let env_len = x.len() / ENV_DECIMATION;
    let env_fs = fs / ENV_DECIMATION as f64;
    let m = (2 * env_len).next_power_of_two();
    let mod_fft = planner.plan_fft_forward(m);
    let hann: Vec<f64> = (0..env_len)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / env_len as f64).cos())
        .collect();

    let edges = band_edges();
    let mut out = Vec::with_capacity(ACOUSTIC_BANDS);
    for b in 0..ACOUSTIC_BANDS {
        let (lo, hi) = (edges[b], edges[b + 1]);
        let mut band = vec![Complex::new(0.0, 0.0); n];
        for k in 0..=n / 2 {
            let f = fs * k as f64 / n as f64;
            if f >= lo && f < hi {
                band[k] = spec[k];
                if k != 0 && k != n / 2 {
                    band[n - k] = spec[n - k];
                }
            }
        }
        inv.process(&mut band);
        let scale = 1.0 / n as f64;
        let mut env: Vec<f64> = (0..env_len)
            .map(|i| {
                band[i * ENV_DECIMATION..(i + 1) * ENV_DECIMATION]
                    .iter()
                    .map(|c| (c.re * scale).abs())
                    .sum::<f64>()
                    / ENV_DECIMATION as f64
            })
            .collect();
        let mean = env.iter().sum::<f64>() / env_len as f64;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (i, e) in env.iter_mut().enumerate() {
            buf[i].re = (*e - mean) * hann[i];
        }
        mod_fft.process(&mut buf);
        let energy_in = |centres: &[f64]| -> f64 {
            centres
                .iter()
                .map(|&c| {
                    let (flo, fhi) = (c / std::f64::consts::SQRT_2, c * std::f64::consts::SQRT_2);
                    (0..=m / 2)
                        .filter(|&k| {
                            let f = env_fs * k as f64 / m as f64;
                            f >= flo && f < fhi
                        })
                        .map(|k| buf[k].norm_sqr())
                        .sum::<f64>()
                })
                .sum()
        };
        out.push((energy_in(&MOD_CENTRES_LOW), energy_in(&MOD_CENTRES_HIGH)));
    }
    Ok(out)
}

/// Higher values mean drier, more modulated speech.
pub fn srmr(x: &[f32]) -> Result<f64> {
    let e = modulation_energies(x)?;
    let low: f64 = e.iter().map(|v| v.0).sum();
    let high: f64 = e.iter().map(|v| v.1).sum();
    if high <= 0.0 {
        return Err(Error::Metric("no high-rate modulation energy".into()));
    }
    Ok(SRMR_SCALE * low / high)
}

/// `min(srmr, S_MAX) / S_MAX`.
pub fn srmr_norm(x: &[f32]) -> Result<f64> {
    srmr(x).map(normalize_srmr)
}

pub fn normalize_srmr(s: f64) -> f64 {
    s.clamp(0.0, S_MAX) / S_MAX
}
