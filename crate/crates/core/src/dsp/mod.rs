//! Signal-processing primitives: transforms, RIR convolution, decay
//! analysis, augmentation and WAV I/O.

mod augment;
mod bands;
mod convolve;
mod decay;
mod stft;
mod wav;

pub use augment::{augment, colored_noise, AugmentConfig, AugmentOutcome};
pub use bands::{BandFeatures, BandLayout, FrontEnd, FEATURE_FLOOR_DB};
pub use convolve::{convolve_rir, convolve_truncated, FftConvolver, Rendered};
pub use decay::{
    blind_rt60, drr, energy_decay_curve_db, fit_decay_rt60, schroeder_rt60, schroeder_rt60_samples,
    DecayFit, DIRECT_HALF_WINDOW, MIN_DECAY_RANGE_DB,
};
pub use stft::{magnitude_backward, polar, ComplexSpec, Spectrogram, Stft, StftConfig, Window};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;
/// 2.56 s at 16 kHz.
pub const CLIP_SAMPLES: usize = 40_960;
/// Peak level used whenever audio is renormalised.
pub const PEAK_TARGET: f32 = 0.9;

/// Mono audio at [`SAMPLE_RATE`].
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    /// Rejects non-finite samples.
    pub fn new(samples: Vec<f32>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Contract(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        peak(&self.samples)
    }

    /// Scale so the peak equals `target`; returns the applied gain (1 for silence).
    pub fn normalize_peak(&mut self, target: f32) -> f32 {
        normalize_peak(&mut self.samples, target)
    }

    /// Truncate or right-pad with zeros.
    pub fn fit_length(mut self, len: usize) -> Self {
        self.samples.resize(len, 0.0);
        self
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }
}

pub fn peak(x: &[f32]) -> f32 {
    x.iter().fold(0.0f32, |m, s| m.max(s.abs()))
}

pub fn normalize_peak(x: &mut [f32], target: f32) -> f32 {
    let p = peak(x);
    if p == 0.0 {
        return 1.0;
    }
    let g = target / p;
    x.iter_mut().for_each(|s| *s *= g);
    g
}

/// Rounds samples to the values a 16-bit PCM file stores.
pub fn quantize_pcm16(x: &mut [f32]) {
    x.iter_mut().for_each(|s| *s = pcm16(*s) as f32 / 32768.0);
}

pub(crate) fn pcm16(s: f32) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Signal-to-noise ratio of `estimate` against `reference` in dB.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> f64 {
    let sig: f64 = reference.iter().map(|x| x * x).sum();
    let err: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (sig / err.max(1e-300)).log10()
}

/// Room impulse response with ground-truth annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Rir {
    pub samples: Vec<f32>,
    pub rt60_true: f64,
    pub drr_true: f64,
    pub direct_delay: usize,
}

impl Rir {
    /// Unit impulse at delay zero.
    pub fn identity() -> Self {
        Self {
            samples: vec![1.0],
            rt60_true: f64::MIN_POSITIVE,
            drr_true: f64::INFINITY,
            direct_delay: 0,
        }
    }
}
