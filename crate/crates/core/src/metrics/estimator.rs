//! Blind RT60 regressor over log band energies.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use vam_nn::{leaky_relu_backward, leaky_relu_inplace, prefixed, sigmoid, softplus, Adam, Conv2d, Dims2, Linear, Param, Parameterized};

use crate::dsp::{schroeder_rt60, BandFeatures, FrontEnd, CLIP_SAMPLES};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};
use crate::synth::{render_sample, sample_room};

const SLOPE: f32 = 0.1;
const CHANNELS: [usize; 4] = [8, 16, 16, 32];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rt60Estimate {
    pub seconds: f64,
    /// The input carried no energy; `seconds` is the network's response to
    /// an all-floor feature map.
    pub silent: bool,
}

/// Four strided 3x3 conv blocks over the `[bands, frames]` map, mean and
/// max pooling, then a two-layer head with a softplus output.
#[derive(Clone, Debug)]
pub struct Rt60Estimator {
    convs: Vec<Conv2d<f32>>,
    fc1: Linear<f32>,
    fc2: Linear<f32>,
    trained: bool,
    front: FrontEnd,
}

struct Cache {
    dims: Vec<Dims2>,
    cols: Vec<Vec<f32>>,
    pre: Vec<Vec<f32>>,
    pooled: Vec<f32>,
    argmax: Vec<usize>,
    hidden_pre: Vec<f32>,
    hidden: Vec<f32>,
    z: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for EstimatorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 32,
            lr: 2e-3,
            seed: 17,
        }
    }
}

/// Training clip with its Schroeder RT60 label.
#[derive(Clone, Debug)]
pub struct LabelledClip {
    pub audio: Vec<f32>,
    pub rt60: f64,
}

impl Rt60Estimator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut convs = Vec::new();
        let mut c_in = 1;
        for &c in &CHANNELS {
            convs.push(Conv2d::new(c_in, c, (3, 3), (2, 2), (1, 1), rng));
            c_in = c;
        }
        let mut fc2 = Linear::new(32, 1, rng);
        fc2.bias.value[0] = 0.0;
        Self {
            convs,
            fc1: Linear::new(2 * c_in, 32, rng),
            fc2,
            trained: false,
            front: FrontEnd::standard(),
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Marks parameters as usable (e.g. after loading a checkpoint).
    pub fn set_trained(&mut self, trained: bool) {
        self.trained = trained;
    }

    pub fn features(&self, audio: &[f32]) -> Result<BandFeatures> {
        let mut x = audio.to_vec();
        x.resize(CLIP_SAMPLES, 0.0);
        self.front.features(&x)
    }

    fn forward(&self, f: &BandFeatures) -> (f32, Cache) {
        let mut x = f.data.clone();
        let mut d = Dims2 { h: f.bands, w: f.frames };
        let mut dims = Vec::new();
        let mut cols = Vec::new();
        let mut pre = Vec::new();
        for conv in &self.convs {
            let (y, o, c) = conv.forward(&x, d);
            dims.push(d);
            cols.push(c);
            pre.push(y.clone());
            x = y;
            leaky_relu_inplace(&mut x, SLOPE);
            d = o;
        }
        let c = self.convs.last().unwrap().out_channels();
        let n = d.h * d.w;
        let mut pooled = vec![0.0f32; 2 * c];
        let mut argmax = vec![0usize; c];
        for ch in 0..c {
            let s = &x[ch * n..(ch + 1) * n];
            pooled[ch] = s.iter().sum::<f32>() / n as f32;
            let (i, m) = s.iter().enumerate().fold((0, f32::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            pooled[c + ch] = m;
            argmax[ch] = i;
        }
        dims.push(d);
        let hidden_pre = self.fc1.forward(&pooled, 1);
        let mut hidden = hidden_pre.clone();
        leaky_relu_inplace(&mut hidden, SLOPE);
        let z = self.fc2.forward(&hidden, 1)[0];
        (
            softplus(z),
            Cache {
                dims,
                cols,
                pre,
                pooled,
                argmax,
                hidden_pre,
                hidden,
                z,
            },
        )
    }

    fn backward(&mut self, cache: &Cache, dout: f32) {
        let dz = [dout * sigmoid(cache.z)];
        let mut dh = self.fc2.backward(&cache.hidden, &dz, 1);
        leaky_relu_backward(&cache.hidden_pre, &mut dh, SLOPE);
        let dpool = self.fc1.backward(&cache.pooled, &dh, 1);
        let c = self.convs.last().unwrap().out_channels();
        let last = cache.dims[self.convs.len()];
        let n = last.h * last.w;
        let mut dx = vec![0.0f32; c * n];
        for ch in 0..c {
            let g = dpool[ch] / n as f32;
            dx[ch * n..(ch + 1) * n].iter_mut().for_each(|v| *v = g);
            dx[ch * n + cache.argmax[ch]] += dpool[c + ch];
        }
        for (i, conv) in self.convs.iter_mut().enumerate().rev() {
            leaky_relu_backward(&cache.pre[i], &mut dx, SLOPE);
            dx = conv.backward(&cache.cols[i], &dx, cache.dims[i], true);
        }
    }

    /// Forward pass on precomputed features; no training flag check.
    pub fn predict_features(&self, f: &BandFeatures) -> f64 {
        self.forward(f).0 as f64
    }

    /// RT60 of a clip. Clips shorter than 2.56 s are right-padded with zeros.
    pub fn estimate(&self, audio: &[f32]) -> Result<Rt60Estimate> {
        if !self.trained {
            return Err(Error::Contract("RT60 estimator has not been trained".into()));
        }
        let f = self.features(audio)?;
        Ok(Rt60Estimate {
            seconds: self.predict_features(&f),
            silent: f.silent,
        })
    }

    pub fn estimate_seconds(&self, audio: &[f32]) -> Result<f64> {
        self.estimate(audio).map(|e| e.seconds)
    }

    /// Supervised MSE training on labelled clips. Returns the per-epoch
    /// training loss.
    pub fn train(&mut self, clips: &[LabelledClip], cfg: &EstimatorTrainConfig) -> Result<Vec<f64>> {
        if clips.is_empty() {
            return Err(Error::Config("no labelled clips".into()));
        }
        let mean = clips.iter().map(|c| c.rt60).sum::<f64>() / clips.len() as f64;
        let var = clips.iter().map(|c| (c.rt60 - mean).powi(2)).sum::<f64>() / clips.len() as f64;
        if var.sqrt() < 1e-3 {
            return Err(Error::Estimation(format!(
                "degenerate RT60 labels: all near {mean:.3} s; training needs a spread of decay times"
            )));
        }
        let feats = clips
            .iter()
            .map(|c| self.features(&c.audio))
            .collect::<Result<Vec<_>>>()?;
        let mut opt = Adam::new(cfg.lr);
        let mut order: Vec<usize> = (0..clips.len()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let mut rng = rng_for(cfg.seed, &[tag("rt60-estimator"), epoch as u64]);
            order.shuffle(&mut rng);
            // Step decay for the final quarter.
            opt.lr = if epoch >= cfg.epochs * 3 / 4 { cfg.lr * 0.1 } else { cfg.lr };
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size.max(1)) {
                self.zero_grad();
                for &i in batch {
                    let (y, cache) = self.forward(&feats[i]);
                    let err = y - clips[i].rt60 as f32;
                    total += (err * err) as f64;
                    self.backward(&cache, 2.0 * err / batch.len() as f32);
                }
                opt.step(self);
            }
            history.push(total / clips.len() as f64);
        }
        self.trained = true;
        Ok(history)
    }
}

impl Parameterized<f32> for Rt60Estimator {
    fn named_params(&self) -> Vec<(String, &Param<f32>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.extend(prefixed(&format!("conv{i}"), c.named_params()));
        }
        out.extend(prefixed("fc1", self.fc1.named_params()));
        out.extend(prefixed("fc2", self.fc2.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<f32>> {
        let mut out = Vec::new();
        for c in self.convs.iter_mut() {
            out.extend(c.params_mut());
        }
        out.extend(self.fc1.params_mut());
        out.extend(self.fc2.params_mut());
        out
    }
}

/// Renders `n` reverberant clips from fresh rooms with RT60 drawn from
/// `rt_range`, each labelled with the Schroeder RT60 of its RIR.
pub fn labelled_clips(n: usize, seed: u64, rt_range: (f64, f64)) -> Result<Vec<LabelledClip>> {
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, &[tag("labelled-clip"), i as u64]);
            let room = sample_room(&mut rng, rt_range);
            let s = render_sample(&room, &mut rng)?;
            Ok(LabelledClip {
                rt60: schroeder_rt60(&s.rir)?,
                audio: s.audio.samples,
            })
        })
        .collect()
}
