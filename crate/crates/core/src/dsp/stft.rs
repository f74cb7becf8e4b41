//! Short-time Fourier transform with a periodic Hann window, its inverse
//! (weighted overlap-add) and the adjoints of both maps.
//!
//! The signal is zero padded by `fft_size - hop` samples on each side so that
//! every original sample is covered by the same number of frames, which makes
//! inversion exact inside the original support.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use vam_nn::Real;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop: 128,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn padding(&self) -> usize {
        self.fft_size - self.hop
    }

    /// `floor((len + 2p - fft_size) / hop) + 1`.
    pub fn num_frames(&self, len: usize) -> usize {
        (len + 2 * self.padding() - self.fft_size) / self.hop + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 4 || self.fft_size % 2 != 0 {
            return Err(Error::Config(format!("fft_size {} must be even and >= 4", self.fft_size)));
        }
        if self.hop == 0 || self.fft_size % self.hop != 0 || self.fft_size / self.hop < 2 {
            return Err(Error::Config(format!(
                "hop {} must divide fft_size {} with at least 2x overlap",
                self.hop, self.fft_size
            )));
        }
        Ok(())
    }
}

/// Complex STFT coefficients, row-major `[frames, bins]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpec<T> {
    pub data: Vec<Complex<T>>,
    pub frames: usize,
    pub bins: usize,
    /// Length of the analysed signal.
    pub length: usize,
}

/// Magnitude spectrogram with optional unit phasors.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram<T> {
    pub magnitudes: Vec<T>,
    /// Unit-modulus phase factors; `1 + 0i` where the magnitude is zero.
    pub phases: Option<Vec<Complex<T>>>,
    pub frames: usize,
    pub bins: usize,
    pub length: usize,
    pub config: StftConfig,
}

impl<T: Real> Spectrogram<T> {
    pub fn magnitude(&self, frame: usize, bin: usize) -> T {
        self.magnitudes[frame * self.bins + bin]
    }
}

/// Planned transforms for one configuration.
#[derive(Clone)]
pub struct Stft<T: Real> {
    cfg: StftConfig,
    window: Vec<T>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Stft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl<T: Real> Stft<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fft_size;
        let window = match cfg.window {
            Window::Hann => (0..n)
                .map(|i| T::of(0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()))
                .collect(),
        };
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len < self.cfg.fft_size {
            return Err(Error::Length(format!(
                "signal of {len} samples is shorter than one frame ({})",
                self.cfg.fft_size
            )));
        }
        Ok(())
    }

    /// Sum of squared windows over the padded support of a `frames`-frame signal.
    fn window_sum_square(&self, frames: usize) -> Vec<T> {
        let (n, hop) = (self.cfg.fft_size, self.cfg.hop);
        let mut wss = vec![T::zero(); (frames - 1) * hop + n];
        for t in 0..frames {
            for (i, &w) in self.window.iter().enumerate() {
                wss[t * hop + i] += w * w;
            }
        }
        wss
    }

    pub fn analyze(&self, x: &[T]) -> Result<ComplexSpec<T>> {
        self.check_len(x.len())?;
        let (n, hop, p) = (self.cfg.fft_size, self.cfg.hop, self.cfg.padding());
        let bins = self.cfg.bins();
        let frames = self.cfg.num_frames(x.len());
        let mut buf = vec![Complex::new(T::zero(), T::zero()); frames * n];
        for t in 0..frames {
            for i in 0..n {
                let src = (t * hop + i) as isize - p as isize;
                if src >= 0 && (src as usize) < x.len() {
                    buf[t * n + i].re = x[src as usize] * self.window[i];
                }
            }
        }
        self.fwd.process(&mut buf);
        let mut data = Vec::with_capacity(frames * bins);
        for t in 0..frames {
            data.extend_from_slice(&buf[t * n..t * n + bins]);
        }
        Ok(ComplexSpec {
            data,
            frames,
            bins,
            length: x.len(),
        })
    }

    /// Adjoint of [`Stft::analyze`]: maps coefficient gradients (real and
    /// imaginary parts treated as independent reals) to a signal gradient.
    pub fn analyze_adjoint(&self, g: &[Complex<T>], frames: usize, length: usize) -> Vec<T> {
        let (n, hop, p) = (self.cfg.fft_size, self.cfg.hop, self.cfg.padding());
        let bins = self.cfg.bins();
        debug_assert_eq!(g.len(), frames * bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); frames * n];
        for t in 0..frames {
            buf[t * n..t * n + bins].copy_from_slice(&g[t * bins..(t + 1) * bins]);
        }
        // sum_k g_k e^{+i 2 pi k n / N}, real part.
        self.inv.process(&mut buf);
        let mut out = vec![T::zero(); length];
        for t in 0..frames {
            for i in 0..n {
                let dst = (t * hop + i) as isize - p as isize;
                if dst >= 0 && (dst as usize) < length {
                    out[dst as usize] += buf[t * n + i].re * self.window[i];
                }
            }
        }
        out
    }

    /// Weighted overlap-add inverse. Imaginary parts of the DC and Nyquist
    /// bins are ignored.
    pub fn synthesize(&self, spec: &[Complex<T>], frames: usize, length: usize) -> Vec<T> {
        let (n, hop, p) = (self.cfg.fft_size, self.cfg.hop, self.cfg.padding());
        let bins = self.cfg.bins();
        debug_assert_eq!(spec.len(), frames * bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); frames * n];
        for t in 0..frames {
            let row = &spec[t * bins..(t + 1) * bins];
            let dst = &mut buf[t * n..(t + 1) * n];
            dst[0] = Complex::new(row[0].re, T::zero());
            dst[n / 2] = Complex::new(row[n / 2].re, T::zero());
            for k in 1..n / 2 {
                dst[k] = row[k];
                dst[n - k] = row[k].conj();
            }
        }
        self.inv.process(&mut buf);
        let scale = T::one() / T::of(n as f64);
        let wss = self.window_sum_square(frames);
        let mut acc = vec![T::zero(); wss.len()];
        for t in 0..frames {
            for i in 0..n {
                acc[t * hop + i] += buf[t * n + i].re * scale * self.window[i];
            }
        }
        (0..length).map(|j| acc[j + p] / wss[j + p]).collect()
    }

    /// Adjoint of [`Stft::synthesize`].
    pub fn synthesize_adjoint(&self, gy: &[T], frames: usize) -> Vec<Complex<T>> {
        let (n, hop, p) = (self.cfg.fft_size, self.cfg.hop, self.cfg.padding());
        let bins = self.cfg.bins();
        let wss = self.window_sum_square(frames);
        let mut u = vec![T::zero(); wss.len()];
        for (j, &g) in gy.iter().enumerate() {
            u[j + p] = g / wss[j + p];
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); frames * n];
        for t in 0..frames {
            for i in 0..n {
                buf[t * n + i].re = u[t * hop + i] * self.window[i];
            }
        }
        self.fwd.process(&mut buf);
        let inv_n = T::one() / T::of(n as f64);
        let two = T::of(2.0);
        let mut out = Vec::with_capacity(frames * bins);
        for t in 0..frames {
            let row = &buf[t * n..t * n + bins];
            for (k, c) in row.iter().enumerate() {
                if k == 0 || k == n / 2 {
                    out.push(Complex::new(c.re * inv_n, T::zero()));
                } else {
                    out.push(Complex::new(c.re * two * inv_n, c.im * two * inv_n));
                }
            }
        }
        out
    }

    pub fn spectrogram(&self, x: &[T]) -> Result<Spectrogram<T>> {
        let c = self.analyze(x)?;
        let (magnitudes, phases) = polar(&c.data);
        Ok(Spectrogram {
            magnitudes,
            phases: Some(phases),
            frames: c.frames,
            bins: c.bins,
            length: c.length,
            config: self.cfg,
        })
    }

    pub fn magnitudes(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.analyze(x)?.data.iter().map(|c| c.norm()).collect())
    }

    /// Inverse of a magnitude spectrogram using its stored phases.
    pub fn inverse(&self, s: &Spectrogram<T>) -> Result<Vec<T>> {
        let phases = s
            .phases
            .as_ref()
            .ok_or_else(|| Error::Contract("inverse STFT needs phases".into()))?;
        if s.config != self.cfg {
            return Err(Error::Config("spectrogram was computed with a different STFT configuration".into()));
        }
        Ok(self.resynthesize(&s.magnitudes, phases, s.frames, s.length))
    }

    /// `istft(mag * phase)`.
    pub fn resynthesize(&self, mag: &[T], phases: &[Complex<T>], frames: usize, length: usize) -> Vec<T> {
        let spec: Vec<Complex<T>> = mag.iter().zip(phases).map(|(&m, &ph)| ph * m).collect();
        self.synthesize(&spec, frames, length)
    }
}

/// Split coefficients into magnitudes and unit phasors.
pub fn polar<T: Real>(c: &[Complex<T>]) -> (Vec<T>, Vec<Complex<T>>) {
    let mut mags = Vec::with_capacity(c.len());
    let mut phases = Vec::with_capacity(c.len());
    for z in c {
        let m = z.norm();
        mags.push(m);
        phases.push(if m > T::zero() {
            *z / m
        } else {
            Complex::new(T::one(), T::zero())
        });
    }
    (mags, phases)
}

/// Gradient of `|z|` pulled back to `z`; zero where `|z| = 0`.
pub fn magnitude_backward<T: Real>(c: &[Complex<T>], dmag: &[T]) -> Vec<Complex<T>> {
    c.iter()
        .zip(dmag)
        .map(|(z, &g)| {
            let m = z.norm();
            if m > T::zero() {
                *z * (g / m)
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_for_training_clip() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.num_frames(40960), 323);
        assert_eq!(cfg.bins(), 257);
    }

    #[test]
    fn short_signal_is_rejected() {
        let s = Stft::<f64>::new(StftConfig::default()).unwrap();
        assert!(matches!(s.analyze(&[0.0; 100]), Err(Error::Length(_))));
    }

    #[test]
    fn missing_phases_is_contract_error() {
        let s = Stft::<f64>::new(StftConfig::default()).unwrap();
        let mut spec = s.spectrogram(&vec![0.1; 1024]).unwrap();
        spec.phases = None;
        assert!(matches!(s.inverse(&spec), Err(Error::Contract(_))));
    }

    fn dot_c(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    }

    #[test]
    fn analyze_adjoint_dot_product() {
        let s = Stft::<f64>::new(StftConfig { fft_size: 16, hop: 4, window: Window::Hann }).unwrap();
        let len = 53;
        let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let c = s.analyze(&x).unwrap();
        let g: Vec<Complex<f64>> = (0..c.data.len())
            .map(|i| Complex::new((i as f64 * 0.13).cos(), (i as f64 * 0.29).sin()))
            .collect();
        let lhs = dot_c(&c.data, &g);
        let ax = s.analyze_adjoint(&g, c.frames, len);
        let rhs: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn synthesize_adjoint_dot_product() {
        let s = Stft::<f64>::new(StftConfig { fft_size: 16, hop: 4, window: Window::Hann }).unwrap();
        let len = 53;
        let frames = s.config().num_frames(len);
        let bins = 9;
        let mut spec: Vec<Complex<f64>> = (0..frames * bins)
            .map(|i| Complex::new((i as f64 * 0.71).sin(), (i as f64 * 0.23).cos()))
            .collect();
        // Imaginary parts of DC and Nyquist are ignored by the forward map.
        for t in 0..frames {
            spec[t * bins].im = 0.0;
            spec[t * bins + 8].im = 0.0;
        }
        let y = s.synthesize(&spec, frames, len);
        let gy: Vec<f64> = (0..len).map(|i| (i as f64 * 0.17).cos()).collect();
        let lhs: f64 = y.iter().zip(&gy).map(|(a, b)| a * b).sum();
        let adj = s.synthesize_adjoint(&gy, frames);
        let rhs = dot_c(&spec, &adj);
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
