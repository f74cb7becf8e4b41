use rand::Rng;
use serde::{Deserialize, Serialize};
use vam_nn::{leaky_relu_backward, leaky_relu_inplace, prefixed, sigmoid, BiLstm, BiLstmCache, Linear, Param, Parameterized, Real};

use crate::dsp::{ComplexSpec, Stft, StftConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub hidden: usize,
    pub layers: usize,
    pub fc_hidden: usize,
    pub slope: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            layers: 2,
            fc_hidden: 300,
            slope: 0.01,
        }
    }
}

/// Spectral-mask generator: `log(1 + |X|)` frames go through a
/// bidirectional LSTM and two affine layers; a sigmoid mask scales the
/// input magnitudes and the input phases are reused for resynthesis.
#[derive(Clone, Debug)]
pub struct Generator<T: Real = f32> {
    cfg: GeneratorConfig,
    lstm: BiLstm<T>,
    fc1: Linear<T>,
    fc2: Linear<T>,
    stft: Stft<T>,
}

pub struct GeneratorCache<T> {
    specs: Vec<ComplexSpec<T>>,
    lstm: BiLstmCache<T>,
    lstm_out: Vec<T>,
    fc1_pre: Vec<T>,
    fc1_out: Vec<T>,
    /// `[steps, batch, bins]`.
    mask: Vec<T>,
    steps: usize,
}

impl<T: Real> Generator<T> {
    pub fn new<R: Rng + ?Sized>(cfg: GeneratorConfig, rng: &mut R) -> Self {
        let stft = Stft::new(StftConfig::default()).expect("default STFT config is valid");
        let bins = stft.config().bins();
        let lstm = BiLstm::new(bins, cfg.hidden, cfg.layers, rng);
        let fc1 = Linear::new(lstm.output_dim(), cfg.fc_hidden, rng);
        let fc2 = Linear::new(cfg.fc_hidden, bins, rng);
        Self {
            cfg,
            lstm,
            fc1,
            fc2,
            stft,
        }
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn stft(&self) -> &Stft<T> {
        &self.stft
    }

    fn bins(&self) -> usize {
        self.stft.config().bins()
    }

    /// Masks for a batch of equal-length clips.
    pub fn forward_masks(&self, inputs: &[&[T]]) -> Result<GeneratorCache<T>> {
        let len = inputs.first().map_or(0, |x| x.len());
        if inputs.iter().any(|x| x.len() != len) {
            return Err(Error::Length("generator batch mixes clip lengths".into()));
        }
        let specs = inputs.iter().map(|x| self.stft.analyze(x)).collect::<Result<Vec<_>>>()?;
        let steps = specs[0].frames;
        let bins = self.bins();
        let batch = inputs.len();
        let mut lstm_in = vec![T::zero(); steps * batch * bins];
        for (b, s) in specs.iter().enumerate() {
            for t in 0..steps {
                let dst = &mut lstm_in[(t * batch + b) * bins..(t * batch + b + 1) * bins];
                for (d, c) in dst.iter_mut().zip(&s.data[t * bins..(t + 1) * bins]) {
                    *d = c.norm().ln_1p();
                }
            }
        }
        let (lstm_out, lstm) = self.lstm.forward(&lstm_in, steps, batch);
        let rows = steps * batch;
        let fc1_pre = self.fc1.forward(&lstm_out, rows);
        let mut fc1_out = fc1_pre.clone();
        leaky_relu_inplace(&mut fc1_out, T::of(self.cfg.slope));
        let mask = self.fc2.forward(&fc1_out, rows).into_iter().map(sigmoid).collect();
        Ok(GeneratorCache {
            specs,
            lstm,
            lstm_out,
            fc1_pre,
            fc1_out,
            mask,
            steps,
        })
    }

    /// `[frames, bins]` mask of clip `b` in a batch cache.
    pub fn clip_mask(&self, cache: &GeneratorCache<T>, b: usize) -> Vec<T> {
        let bins = self.bins();
        let batch = cache.specs.len();
        let mut out = Vec::with_capacity(cache.steps * bins);
        for t in 0..cache.steps {
            out.extend_from_slice(&cache.mask[(t * batch + b) * bins..(t * batch + b + 1) * bins]);
        }
        out
    }

    /// Resynthesised outputs of a batch cache.
    pub fn outputs(&self, cache: &GeneratorCache<T>) -> Vec<Vec<T>> {
        (0..cache.specs.len())
            .map(|b| self.apply(&cache.specs[b], &self.clip_mask(cache, b)))
            .collect()
    }

    fn apply(&self, spec: &ComplexSpec<T>, mask: &[T]) -> Vec<T> {
        let masked: Vec<_> = spec.data.iter().zip(mask).map(|(c, &m)| c * m).collect();
        self.stft.synthesize(&masked, spec.frames, spec.length)
    }

    /// `istft(mask * |X|, phase(X))` for an externally supplied mask.
    pub fn apply_mask(&self, input: &[T], mask: &[T]) -> Result<Vec<T>> {
        let spec = self.stft.analyze(input)?;
        if mask.len() != spec.data.len() {
            return Err(Error::Shape(format!("mask has {} entries, spectrogram {}", mask.len(), spec.data.len())));
        }
        Ok(self.apply(&spec, mask))
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let cache = self.forward_masks(&[input])?;
        Ok(self.outputs(&cache).pop().expect("batch of one"))
    }

    pub fn forward_batch(&self, inputs: &[&[T]]) -> Result<Vec<Vec<T>>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.outputs(&self.forward_masks(inputs)?))
    }

    /// Accumulates parameter gradients given `dL/d output` for every clip.
    pub fn backward(&mut self, cache: &GeneratorCache<T>, dout: &[Vec<T>]) {
        let bins = self.bins();
        let batch = cache.specs.len();
        let rows = cache.steps * batch;
        let mut dlogit = vec![T::zero(); rows * bins];
        for (b, (spec, dy)) in cache.specs.iter().zip(dout).enumerate() {
            let dspec = self.stft.synthesize_adjoint(dy, spec.frames);
            for t in 0..cache.steps {
                for k in 0..bins {
                    let r = (t * batch + b) * bins + k;
                    let x = spec.data[t * bins + k];
                    let d = dspec[t * bins + k];
                    let dm = d.re * x.re + d.im * x.im;
                    let m = cache.mask[r];
                    dlogit[r] = dm * m * (T::one() - m);
                }
            }
        }
        let mut dh = self.fc2.backward(&cache.fc1_out, &dlogit, rows);
        leaky_relu_backward(&cache.fc1_pre, &mut dh, T::of(self.cfg.slope));
        let dl = self.fc1.backward(&cache.lstm_out, &dh, rows);
        self.lstm.backward(&cache.lstm, &dl);
    }
}

impl<T: Real> Parameterized<T> for Generator<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = prefixed("lstm", self.lstm.named_params());
        out.extend(prefixed("fc1", self.fc1.named_params()));
        out.extend(prefixed("fc2", self.fc2.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.lstm.params_mut();
        out.extend(self.fc1.params_mut());
        out.extend(self.fc2.params_mut());
        out
    }
}
