use rand::Rng;
use serde::{Deserialize, Serialize};
use vam_nn::{leaky_relu_backward, leaky_relu_inplace, prefixed, Conv2d, Dims2, Linear, Param, Parameterized, Real};

use crate::dsp::{magnitude_backward, Stft, StftConfig};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub conv_layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub fc: Vec<usize>,
    pub slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            conv_layers: 4,
            channels: 15,
            kernel: 5,
            stride: 2,
            fc: vec![50, 10],
            slope: 0.3,
        }
    }
}

/// Metric surrogate: strided 2-D convolutions over the `log(1 + |X|)`
/// spectrogram, channel-wise spatial averaging, then an MLP to one scalar.
#[derive(Clone, Debug)]
pub struct Discriminator<T: Real = f32> {
    cfg: DiscriminatorConfig,
    convs: Vec<Conv2d<T>>,
    fcs: Vec<Linear<T>>,
    stft: Stft<T>,
}

pub struct DiscCache<T> {
    spec: Vec<rustfft::num_complex::Complex<T>>,
    mags: Vec<T>,
    frames: usize,
    length: usize,
    dims: Vec<Dims2>,
    cols: Vec<Vec<T>>,
    conv_pre: Vec<Vec<T>>,
    fc_in: Vec<Vec<T>>,
    fc_pre: Vec<Vec<T>>,
}

impl<T: Real> Discriminator<T> {
    pub fn new<R: Rng + ?Sized>(cfg: DiscriminatorConfig, rng: &mut R) -> Self {
        let k = cfg.kernel;
        let pad = k / 2;
        let mut convs = Vec::new();
        let mut c_in = 1;
        for _ in 0..cfg.conv_layers {
            convs.push(Conv2d::new(c_in, cfg.channels, (k, k), (cfg.stride, cfg.stride), (pad, pad), rng));
            c_in = cfg.channels;
        }
        let mut fcs = Vec::new();
        let mut d = c_in;
        for &w in cfg.fc.iter().chain(std::iter::once(&1)) {
            fcs.push(Linear::new(d, w, rng));
            d = w;
        }
        Self {
            cfg,
            convs,
            fcs,
            stft: Stft::new(StftConfig::default()).expect("default STFT config is valid"),
        }
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    fn run(&self, x: &[T]) -> Result<(T, DiscCache<T>)> {
        let c = self.stft.analyze(x)?;
        let mags: Vec<T> = c.data.iter().map(|z| z.norm()).collect();
        let slope = T::of(self.cfg.slope);
        let mut h: Vec<T> = mags.iter().map(|m| m.ln_1p()).collect();
        let mut d = Dims2 { h: c.frames, w: c.bins };
        let mut dims = Vec::new();
        let mut cols = Vec::new();
        let mut conv_pre = Vec::new();
        for conv in &self.convs {
            let (y, o, col) = conv.forward(&h, d);
            dims.push(d);
            cols.push(col);
            h = y.clone();
            conv_pre.push(y);
            leaky_relu_inplace(&mut h, slope);
            d = o;
        }
        dims.push(d);
        let n = d.h * d.w;
        let ch = self.cfg.channels;
        let pooled: Vec<T> = (0..ch)
            .map(|k| h[k * n..(k + 1) * n].iter().copied().sum::<T>() / T::of(n as f64))
            .collect();
        let mut v = pooled.clone();
        let mut fc_in = Vec::new();
        let mut fc_pre = Vec::new();
        for (i, fc) in self.fcs.iter().enumerate() {
            let y = fc.forward(&v, 1);
            fc_in.push(v);
            v = y.clone();
            if i + 1 < self.fcs.len() {
                leaky_relu_inplace(&mut v, slope);
            }
            fc_pre.push(y);
        }
        Ok((
            v[0],
            DiscCache {
                spec: c.data,
                mags,
                frames: c.frames,
                length: c.length,
                dims,
                cols,
                conv_pre,
                fc_in,
                fc_pre,
            },
        ))
    }

    /// Predicted metric score of a waveform.
    pub fn score(&self, x: &[T]) -> Result<T> {
        self.run(x).map(|r| r.0)
    }

    pub fn forward(&self, x: &[T]) -> Result<(T, DiscCache<T>)> {
        self.run(x)
    }

    /// Backpropagates `dscore`. Parameter gradients are accumulated only
    /// when `accumulate`; the waveform gradient is returned when `input_grad`.
    pub fn backward(&mut self, cache: &DiscCache<T>, dscore: T, accumulate: bool, input_grad: bool) -> Option<Vec<T>> {
        let slope = T::of(self.cfg.slope);
        let mut g = vec![dscore];
        for i in (0..self.fcs.len()).rev() {
            if i + 1 < self.fcs.len() {
                leaky_relu_backward(&cache.fc_pre[i], &mut g, slope);
            }
            g = if accumulate {
                self.fcs[i].backward(&cache.fc_in[i], &g, 1)
            } else {
                self.fcs[i].backward_input(&g, 1)
            };
        }
        let last = cache.dims[self.convs.len()];
        let n = last.h * last.w;
        let mut dh = Vec::with_capacity(g.len() * n);
        for v in &g {
            dh.extend(std::iter::repeat_n(*v / T::of(n as f64), n));
        }
        for i in (0..self.convs.len()).rev() {
            leaky_relu_backward(&cache.conv_pre[i], &mut dh, slope);
            if i == 0 && !input_grad {
                if accumulate {
                    self.convs[0].backward(&cache.cols[0], &dh, cache.dims[0], true);
                }
                return None;
            }
            dh = if accumulate {
                self.convs[i].backward(&cache.cols[i], &dh, cache.dims[i], true)
            } else {
                self.convs[i].backward_input(&dh, cache.dims[i])
            };
        }
        let dmag: Vec<T> = dh.iter().zip(&cache.mags).map(|(d, m)| *d / (T::one() + *m)).collect();
        let dz = magnitude_backward(&cache.spec, &dmag);
        Some(self.stft.analyze_adjoint(&dz, cache.frames, cache.length))
    }
}

impl<T: Real> Parameterized<T> for Discriminator<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.extend(prefixed(&format!("conv{i}"), c.named_params()));
        }
        for (i, f) in self.fcs.iter().enumerate() {
            out.extend(prefixed(&format!("fc{i}"), f.named_params()));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        for c in self.convs.iter_mut() {
            out.extend(c.params_mut());
        }
        for f in self.fcs.iter_mut() {
            out.extend(f.params_mut());
        }
        out
    }
}
