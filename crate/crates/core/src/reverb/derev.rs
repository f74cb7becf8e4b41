use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use vam_nn::{clip_grad_norm, leaky_relu_backward, leaky_relu_inplace, prefixed, sigmoid, Adam, Conv1d, Param, Parameterized, Real};

use super::trunk::{Trunk, TrunkCache, TrunkConfig};
use crate::dsp::{normalize_peak, polar, BandLayout, FrontEnd, Stft, PEAK_TARGET};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

const SLOPE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerevConfig {
    pub trunk: TrunkConfig,
    /// Initial mask logit; `sigmoid(2) ~ 0.88` starts close to identity.
    pub mask_bias: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for DerevConfig {
    fn default() -> Self {
        Self {
            trunk: TrunkConfig::default(),
            mask_bias: 2.0,
            epochs: 12,
            batch_size: 8,
            lr: 2e-3,
            seed: 29,
        }
    }
}

/// "Off-the-shelf" dereverberator: the reverberator trunk read in reverse,
/// predicting a per-frame band mask that is spread over STFT bins and
/// applied to the input magnitudes. Output phase is the input phase.
#[derive(Clone, Debug)]
pub struct Dereverberator<T: Real = f32> {
    cfg: DerevConfig,
    trunk: Trunk<T>,
    mask: Conv1d<T>,
    trained: bool,
    front: FrontEnd,
    stft: Stft<T>,
}

struct MaskCache<T> {
    trunk: TrunkCache<T>,
    skip_pre: Vec<T>,
    skip: Vec<T>,
    band_mask: Vec<T>,
    frames: usize,
}

impl<T: Real> Dereverberator<T> {
    pub fn new<R: Rng + ?Sized>(cfg: DerevConfig, rng: &mut R) -> Self {
        let front = FrontEnd::standard();
        let bands = front.layout().bands;
        let trunk = Trunk::new(TrunkConfig { in_channels: bands, ..cfg.trunk.clone() }, rng);
        let mut mask = Conv1d::new(cfg.trunk.channels, bands, 1, 1, rng);
        mask.bias.value.iter_mut().for_each(|b| *b = T::of(cfg.mask_bias));
        Self {
            stft: Stft::new(Default::default()).expect("default STFT config is valid"),
            cfg,
            trunk,
            mask,
            trained: false,
            front,
        }
    }

    pub fn config(&self) -> &DerevConfig {
        &self.cfg
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn set_trained(&mut self, trained: bool) {
        self.trained = trained;
    }

    fn layout(&self) -> &BandLayout {
        self.front.layout()
    }

    fn band_mask(&self, input: &[T]) -> Result<(Vec<T>, MaskCache<T>)> {
        let mut xf: Vec<f32> = input.iter().map(|v| v.as_f64() as f32).collect();
        normalize_peak(&mut xf, PEAK_TARGET);
        let feats = self.front.features(&xf)?;
        let frames = feats.frames;
        let f: Vec<T> = feats.data.iter().map(|&v| T::of(v as f64)).collect();
        let (skip_pre, trunk) = self.trunk.forward(&f, frames, None);
        let mut skip = skip_pre.clone();
        leaky_relu_inplace(&mut skip, T::of(SLOPE));
        let logits = self.mask.forward(&skip, frames);
        let band_mask: Vec<T> = logits.into_iter().map(sigmoid).collect();
        let bins = self.layout().expand(&band_mask, frames);
        Ok((
            bins,
            MaskCache {
                trunk,
                skip_pre,
                skip,
                band_mask,
                frames,
            },
        ))
    }

    /// `[frames, bins]` mask in `(0, 1)` for `input`.
    pub fn mask(&self, input: &[T]) -> Result<Vec<T>> {
        self.band_mask(input).map(|r| r.0)
    }

    /// Same-length dereverberated waveform.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let spec = self.stft.analyze(input)?;
        let (mags, phases) = polar(&spec.data);
        let (mask, _) = self.band_mask(input)?;
        let m: Vec<T> = mags.iter().zip(&mask).map(|(a, b)| *a * *b).collect();
        Ok(self.stft.resynthesize(&m, &phases, spec.frames, spec.length))
    }

    /// Requires a trained model.
    pub fn dereverberate(&self, input: &[T]) -> Result<Vec<T>> {
        if !self.trained {
            return Err(Error::StagedDependency("dereverberator has not been trained".into()));
        }
        self.forward(input)
    }

    /// `log(1 + |S|)` of a clean target.
    pub fn target_features(&self, target: &[T]) -> Result<Vec<T>> {
        Ok(self.stft.magnitudes(target)?.into_iter().map(|m| m.ln_1p()).collect())
    }

    /// MSE between `log(1 + mask |X|)` and the target features, taken on the
    /// masked magnitudes directly. Adds `scale * dL/dtheta` to the gradients.
    pub fn accumulate(&mut self, input: &[T], target_features: &[T], scale: T) -> Result<T> {
        let mags = self.stft.magnitudes(input)?;
        if mags.len() != target_features.len() {
            return Err(Error::Length("target does not match input length".into()));
        }
        let (mask, cache) = self.band_mask(input)?;
        let n = T::of(mags.len() as f64);
        let two = T::of(2.0);
        let mut loss = T::zero();
        let mut dmask = Vec::with_capacity(mags.len());
        for ((&m, &w), &t) in mags.iter().zip(&mask).zip(target_features) {
            let y = m * w;
            let d = y.ln_1p() - t;
            loss += d * d;
            dmask.push(scale * two * d / (T::one() + y) * m / n);
        }
        let frames = cache.frames;
        let mut dlogit = self.layout().expand_adjoint(&dmask, frames);
        dlogit
            .iter_mut()
            .zip(&cache.band_mask)
            .for_each(|(g, s)| *g *= *s * (T::one() - *s));
        let mut dskip = self.mask.backward(&cache.skip, &dlogit, frames);
        leaky_relu_backward(&cache.skip_pre, &mut dskip, T::of(SLOPE));
        self.trunk.backward(&cache.trunk, &dskip, None);
        Ok(loss / n)
    }

    pub fn loss_value(&self, input: &[T], target_features: &[T]) -> Result<T> {
        let mags = self.stft.magnitudes(input)?;
        if mags.len() != target_features.len() {
            return Err(Error::Length("target does not match input length".into()));
        }
        let (mask, _) = self.band_mask(input)?;
        let n = T::of(mags.len() as f64);
        Ok(mags
            .iter()
            .zip(&mask)
            .zip(target_features)
            .map(|((&m, &w), &t)| {
                let d = (m * w).ln_1p() - t;
                d * d
            })
            .sum::<T>()
            / n)
    }
}

impl Dereverberator<f32> {
    /// Fixed-budget supervised training on (reverberant, anechoic) pairs.
    /// Returns the mean loss of every epoch.
    pub fn pretrain(&mut self, pairs: &[(Vec<f32>, Vec<f32>)]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Err(Error::Config("paired pool is empty".into()));
        }
        let targets = pairs
            .iter()
            .map(|(_, s)| self.target_features(s))
            .collect::<Result<Vec<_>>>()?;
        let mut opt = Adam::new(self.cfg.lr);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut history = Vec::new();
        let bs = self.cfg.batch_size.max(1);
        for epoch in 0..self.cfg.epochs {
            order.shuffle(&mut rng_for(self.cfg.seed, &[tag("derev"), epoch as u64]));
            let mut total = 0.0;
            for batch in order.chunks(bs) {
                self.zero_grad();
                let scale = 1.0 / batch.len() as f32;
                for &i in batch {
                    total += self.accumulate(&pairs[i].0, &targets[i], scale)? as f64;
                }
                clip_grad_norm(self, 5.0);
                opt.step(self);
            }
            history.push(total / pairs.len() as f64);
        }
        self.trained = true;
        Ok(history)
    }
}

impl<T: Real> Parameterized<T> for Dereverberator<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = prefixed("trunk", self.trunk.named_params());
        out.extend(prefixed("mask", self.mask.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.trunk.params_mut();
        out.extend(self.mask.params_mut());
        out
    }
}
