use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use vam_nn::Real;

use super::{normalize_peak, Rir, Waveform, PEAK_TARGET};

/// Linear convolution through a fixed-size FFT. Inputs whose full
/// convolution exceeds the size wrap around, so callers size it as
/// `>= len(x) + len(h) - 1` or only read the unaffected prefix.
#[derive(Clone)]
pub struct FftConvolver<T: Real> {
    size: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for FftConvolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftConvolver").field("size", &self.size).finish()
    }
}

impl<T: Real> FftConvolver<T> {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    /// Smallest power of two holding the full convolution of the two lengths.
    pub fn for_lengths(a: usize, b: usize) -> Self {
        Self::new((a + b).saturating_sub(1).max(1).next_power_of_two())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spectrum(&self, x: &[T]) -> Vec<Complex<T>> {
        assert!(x.len() <= self.size, "signal longer than FFT size");
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.size];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// Real part of the inverse transform of a product spectrum, first `len` samples.
    pub fn inverse(&self, mut spec: Vec<Complex<T>>, len: usize) -> Vec<T> {
        self.inv.process(&mut spec);
        let scale = T::one() / T::of(self.size as f64);
        spec.iter().take(len).map(|c| c.re * scale).collect()
    }

    /// `(x * h)[0..len]`.
    pub fn convolve(&self, x: &[T], h: &[T], len: usize) -> Vec<T> {
        let a = self.spectrum(x);
        let b = self.spectrum(h);
        let prod: Vec<Complex<T>> = a.iter().zip(&b).map(|(u, v)| u * v).collect();
        self.inverse(prod, len)
    }

    /// `c[k] = sum_n g[n + k] x[n]` for `k < len`: the adjoint of
    /// `h -> (x * h)[0..g.len()]` applied to `g`.
    pub fn correlate(&self, g: &[T], x: &[T], len: usize) -> Vec<T> {
        let a = self.spectrum(g);
        let b = self.spectrum(x);
        let prod: Vec<Complex<T>> = a.iter().zip(&b).map(|(u, v)| u * v.conj()).collect();
        self.inverse(prod, len)
    }
}

/// Full linear convolution truncated to `len(x)`.
pub fn convolve_truncated<T: Real>(x: &[T], h: &[T]) -> Vec<T> {
    if x.is_empty() || h.is_empty() {
        return vec![T::zero(); x.len()];
    }
    FftConvolver::for_lengths(x.len(), h.len()).convolve(x, h, x.len())
}

/// Output of [`convolve_rir`]: `audio = gain * (w * rir)[0..len(w)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub audio: Waveform,
    pub gain: f32,
}

/// Render `w` in the room described by `r`, then renormalise the peak.
pub fn convolve_rir(w: &Waveform, r: &Rir) -> Rendered {
    let x = w.to_f64();
    let h: Vec<f64> = r.samples.iter().map(|&v| v as f64).collect();
    let mut y: Vec<f32> = convolve_truncated(&x, &h).into_iter().map(|v| v as f32).collect();
    let gain = normalize_peak(&mut y, PEAK_TARGET);
    Rendered {
        audio: Waveform {
            samples: y,
            sample_rate: w.sample_rate,
        },
        gain,
    }
}
