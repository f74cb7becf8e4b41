use vam_nn::Real;

use crate::dsp::{magnitude_backward, Stft, StftConfig};
use crate::error::{Error, Result};

/// Mean squared error between (optionally `log1p`-compressed) magnitude
/// spectrograms, with its gradient w.r.t. the predicted waveform.
#[derive(Clone, Debug)]
pub struct SpectralMse<T: Real> {
    stft: Stft<T>,
    log: bool,
}

impl<T: Real> SpectralMse<T> {
    pub fn new(cfg: StftConfig, log: bool) -> Result<Self> {
        Ok(Self {
            stft: Stft::new(cfg)?,
            log,
        })
    }

    pub fn log_magnitude() -> Self {
        Self::new(StftConfig::default(), true).expect("default STFT config is valid")
    }

    pub fn magnitude() -> Self {
        Self::new(StftConfig::default(), false).expect("default STFT config is valid")
    }

    pub fn stft(&self) -> &Stft<T> {
        &self.stft
    }

    /// Compressed magnitudes of `x`, the comparison domain of the loss.
    pub fn features(&self, x: &[T]) -> Result<Vec<T>> {
        let mags = self.stft.magnitudes(x)?;
        Ok(if self.log {
            mags.into_iter().map(|m| m.ln_1p()).collect()
        } else {
            mags
        })
    }

    pub fn value(&self, pred: &[T], target: &[T]) -> Result<T> {
        check_lengths(pred.len(), target.len())?;
        let t = self.features(target)?;
        self.value_to(pred, &t)
    }

    pub fn value_to(&self, pred: &[T], target_features: &[T]) -> Result<T> {
        let p = self.features(pred)?;
        if p.len() != target_features.len() {
            return Err(Error::Length("target features do not match prediction".into()));
        }
        let n = T::of(p.len() as f64);
        Ok(p.iter().zip(target_features).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
    }

    /// Loss and `dL/dpred`.
    pub fn value_and_grad(&self, pred: &[T], target_features: &[T]) -> Result<(T, Vec<T>)> {
        let c = self.stft.analyze(pred)?;
        if c.data.len() != target_features.len() {
            return Err(Error::Length("target features do not match prediction".into()));
        }
        let n = T::of(c.data.len() as f64);
        let two = T::of(2.0);
        let mut loss = T::zero();
        let mut dmag = Vec::with_capacity(c.data.len());
        for (z, &t) in c.data.iter().zip(target_features) {
            let m = z.norm();
            let (f, df) = if self.log {
                (m.ln_1p(), T::one() / (T::one() + m))
            } else {
                (m, T::one())
            };
            let d = f - t;
            loss += d * d;
            dmag.push(two * d * df / n);
        }
        let dz = magnitude_backward(&c.data, &dmag);
        Ok((loss / n, self.stft.analyze_adjoint(&dz, c.frames, c.length)))
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Length(format!("prediction has {a} samples, target {b}")));
    }
    Ok(())
}

fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// MSE between magnitude spectrograms.
pub fn stft_error(pred: &[f32], target: &[f32]) -> Result<f64> {
    check_lengths(pred.len(), target.len())?;
    SpectralMse::<f64>::magnitude().value(&to_f64(pred), &to_f64(target))
}

/// MSE between `log(1 + |S|)` spectrograms.
pub fn log_stft_error(pred: &[f32], target: &[f32]) -> Result<f64> {
    check_lengths(pred.len(), target.len())?;
    SpectralMse::<f64>::log_magnitude().value(&to_f64(pred), &to_f64(target))
}
