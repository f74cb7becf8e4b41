//! Waveform augmentation for the optional supervised-baseline mode.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{convolve_truncated, Rir, Waveform};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Spectral exponent range for `1/f^beta` noise.
    pub beta_range: (f64, f64),
    pub snr_db_range: (f64, f64),
    /// Scales the noise after SNR calibration; 0 disables it.
    pub noise_gain: f64,
    pub p_invert: f64,
    pub p_rir: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            beta_range: (0.0, 2.0),
            snr_db_range: (10.0, 30.0),
            noise_gain: 1.0,
            p_invert: 0.5,
            p_rir: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentOutcome {
    pub audio: Waveform,
    pub inverted: bool,
    /// Index into the RIR pool, when a convolution was applied.
    pub rir: Option<usize>,
    pub beta: f64,
    pub snr_db: f64,
}

/// Zero-mean Gaussian noise with power spectrum `~ 1/f^beta`, unit variance.
pub fn colored_noise<R: Rng + ?Sized>(rng: &mut R, len: usize, beta: f64) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let white: Vec<f64> = vam_nn::init::normal(rng, len, 1.0);
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = white.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(len - k) as f64;
        *c *= f.powf(-beta / 2.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let var = out.iter().map(|v| v * v).sum::<f64>() / len as f64;
    let s = if var > 0.0 { var.sqrt().recip() } else { 0.0 };
    out.into_iter().map(|v| v * s).collect()
}

/// Colored noise at a random SNR, polarity inversion with `p_invert`, and
/// convolution with a random pool RIR with `p_rir`.
pub fn augment<R: Rng + ?Sized>(w: &Waveform, pool: &[Rir], cfg: &AugmentConfig, rng: &mut R) -> Result<AugmentOutcome> {
    if cfg.p_rir > 0.0 && pool.is_empty() {
        return Err(Error::Config("augmentation requests RIR convolution but the RIR pool is empty".into()));
    }
    let mut x = w.to_f64();
    let beta = rng.random_range(cfg.beta_range.0..=cfg.beta_range.1);
    let snr_db = rng.random_range(cfg.snr_db_range.0..=cfg.snr_db_range.1);
    let noise = colored_noise(rng, x.len(), beta);
    if cfg.noise_gain != 0.0 {
        let power = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
        let scale = cfg.noise_gain * (power / 10f64.powf(snr_db / 10.0)).sqrt();
        for (v, n) in x.iter_mut().zip(&noise) {
            *v += scale * n;
        }
    }
    let inverted = rng.random::<f64>() < cfg.p_invert;
    if inverted {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let rir = if rng.random::<f64>() < cfg.p_rir {
        let i = rng.random_range(0..pool.len());
        let h: Vec<f64> = pool[i].samples.iter().map(|&v| v as f64).collect();
        x = convolve_truncated(&x, &h);
        Some(i)
    } else {
        None
    };
    Ok(AugmentOutcome {
        audio: Waveform {
            samples: x.into_iter().map(|v| v as f32).collect(),
            sample_rate: w.sample_rate,
        },
        inverted,
        rir,
        beta,
        snr_db,
    })
}
