use rand::Rng;
use serde::{Deserialize, Serialize};
use vam_nn::{prefixed, sigmoid, Conv1d, Linear, Param, Parameterized, Real};

/// Shape of the dilated-convolution stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrunkConfig {
    pub in_channels: usize,
    pub channels: usize,
    pub blocks: usize,
    pub dilations: Vec<usize>,
    pub kernel: usize,
}

impl Default for TrunkConfig {
    fn default() -> Self {
        Self {
            in_channels: 32,
            channels: 32,
            blocks: 2,
            dilations: vec![1, 2, 4, 8],
            kernel: 3,
        }
    }
}

impl TrunkConfig {
    pub fn layers(&self) -> usize {
        self.blocks * self.dilations.len()
    }

    /// Receptive field in frames.
    pub fn receptive_field(&self) -> usize {
        1 + self.blocks * self.dilations.iter().map(|d| d * (self.kernel - 1)).sum::<usize>()
    }
}

/// Per-block channel gates and biases produced by a [`Fusion`] net.
#[derive(Clone, Debug)]
pub struct Modulation<T> {
    /// `[blocks, channels]`, each in `(0, 2)`.
    pub gate: Vec<T>,
    /// `[blocks, channels]`.
    pub bias: Vec<T>,
}

/// WaveNet-style stack over a `[channels, frames]` map: each layer applies a
/// dilated convolution, a sine, then separate 1x1 residual and skip
/// projections. Skip outputs are summed over layers.
#[derive(Clone, Debug)]
pub struct Trunk<T> {
    cfg: TrunkConfig,
    in_proj: Conv1d<T>,
    dilated: Vec<Conv1d<T>>,
    res: Vec<Conv1d<T>>,
    skip: Vec<Conv1d<T>>,
}

pub struct TrunkCache<T> {
    len: usize,
    input: Vec<T>,
    /// Input of every layer.
    h: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    sin: Vec<Vec<T>>,
    act: Vec<Vec<T>>,
}

impl<T: Real> Trunk<T> {
    pub fn new<R: Rng + ?Sized>(cfg: TrunkConfig, rng: &mut R) -> Self {
        let c = cfg.channels;
        let in_proj = Conv1d::new(cfg.in_channels, c, 1, 1, rng);
        let mut dilated = Vec::new();
        let mut res = Vec::new();
        let mut skip = Vec::new();
        for _ in 0..cfg.blocks {
            for &d in &cfg.dilations {
                dilated.push(Conv1d::new(c, c, cfg.kernel, d, rng));
                res.push(Conv1d::new(c, c, 1, 1, rng));
                skip.push(Conv1d::new(c, c, 1, 1, rng));
            }
        }
        Self {
            cfg,
            in_proj,
            dilated,
            res,
            skip,
        }
    }

    pub fn config(&self) -> &TrunkConfig {
        &self.cfg
    }

    /// Returns the summed skip map `[channels, len]`.
    pub fn forward(&self, x: &[T], len: usize, m: Option<&Modulation<T>>) -> (Vec<T>, TrunkCache<T>) {
        let c = self.cfg.channels;
        let per_block = self.cfg.dilations.len();
        let mut h = self.in_proj.forward(x, len);
        let mut out = vec![T::zero(); c * len];
        let mut cache = TrunkCache {
            len,
            input: x.to_vec(),
            h: Vec::new(),
            pre: Vec::new(),
            sin: Vec::new(),
            act: Vec::new(),
        };
        for l in 0..self.dilated.len() {
            let pre = self.dilated[l].forward(&h, len);
            let s: Vec<T> = pre.iter().map(|v| v.sin()).collect();
            let act = match m {
                Some(m) => {
                    let b = l / per_block;
                    let mut a = s.clone();
                    for ch in 0..c {
                        let (g, o) = (m.gate[b * c + ch], m.bias[b * c + ch]);
                        a[ch * len..(ch + 1) * len].iter_mut().for_each(|v| *v = *v * g + o);
                    }
                    a
                }
                None => s.clone(),
            };
            let r = self.res[l].forward(&act, len);
            let k = self.skip[l].forward(&act, len);
            out.iter_mut().zip(&k).for_each(|(o, v)| *o += *v);
            let next: Vec<T> = h.iter().zip(&r).map(|(a, b)| *a + *b).collect();
            cache.h.push(std::mem::replace(&mut h, next));
            cache.pre.push(pre);
            cache.sin.push(s);
            cache.act.push(act);
        }
        (out, cache)
    }

    /// Accumulates parameter gradients from `dout` (gradient of the skip
    /// sum). Returns gradients of the modulation when one was used.
    pub fn backward(&mut self, cache: &TrunkCache<T>, dout: &[T], m: Option<&Modulation<T>>) -> Option<Modulation<T>> {
        let len = cache.len;
        let c = self.cfg.channels;
        let per_block = self.cfg.dilations.len();
        let mut dm = m.map(|m| Modulation {
            gate: vec![T::zero(); m.gate.len()],
            bias: vec![T::zero(); m.bias.len()],
        });
        let mut dh = vec![T::zero(); c * len];
        for l in (0..self.dilated.len()).rev() {
            let mut dact = self.skip[l].backward(&cache.act[l], dout, len);
            let dr = self.res[l].backward(&cache.act[l], &dh, len);
            dact.iter_mut().zip(&dr).for_each(|(a, b)| *a += *b);
            let mut ds = dact;
            if let (Some(m), Some(dm)) = (m, dm.as_mut()) {
                let b = l / per_block;
                for ch in 0..c {
                    let g = m.gate[b * c + ch];
                    let range = ch * len..(ch + 1) * len;
                    let mut dg = T::zero();
                    let mut db = T::zero();
                    for (d, &s) in ds[range.clone()].iter_mut().zip(&cache.sin[l][range]) {
                        dg += *d * s;
                        db += *d;
                        *d *= g;
                    }
                    dm.gate[b * c + ch] += dg;
                    dm.bias[b * c + ch] += db;
                }
            }
            ds.iter_mut().zip(&cache.pre[l]).for_each(|(d, p)| *d *= p.cos());
            let dprev = self.dilated[l].backward(&cache.h[l], &ds, len);
            dh.iter_mut().zip(&dprev).for_each(|(a, b)| *a += *b);
        }
        self.in_proj.accumulate_grads(&cache.input, &dh, len);
        dm
    }
}

impl<T: Real> Parameterized<T> for Trunk<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = prefixed("in_proj", self.in_proj.named_params());
        for l in 0..self.dilated.len() {
            out.extend(prefixed(&format!("layer{l}.dilated"), self.dilated[l].named_params()));
            out.extend(prefixed(&format!("layer{l}.res"), self.res[l].named_params()));
            out.extend(prefixed(&format!("layer{l}.skip"), self.skip[l].named_params()));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.in_proj.params_mut();
        for ((d, r), s) in self.dilated.iter_mut().zip(self.res.iter_mut()).zip(self.skip.iter_mut()) {
            out.extend(d.params_mut());
            out.extend(r.params_mut());
            out.extend(s.params_mut());
        }
        out
    }
}

/// Two-layer projection of a conditioner vector to per-block gates
/// (`2 sigmoid(u)`) and biases.
#[derive(Clone, Debug)]
pub struct Fusion<T> {
    l1: Linear<T>,
    l2: Linear<T>,
    blocks: usize,
    channels: usize,
}

pub struct FusionCache<T> {
    cond: Vec<T>,
    hidden: Vec<T>,
    u: Vec<T>,
}

impl<T: Real> Fusion<T> {
    pub fn new<R: Rng + ?Sized>(cond_dim: usize, hidden: usize, blocks: usize, channels: usize, rng: &mut R) -> Self {
        Self {
            l1: Linear::new(cond_dim, hidden, rng),
            l2: Linear::new(hidden, 2 * blocks * channels, rng),
            blocks,
            channels,
        }
    }

    pub fn cond_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn forward(&self, cond: &[T]) -> (Modulation<T>, FusionCache<T>) {
        let hidden: Vec<T> = self.l1.forward(cond, 1).into_iter().map(|v| v.tanh()).collect();
        let u = self.l2.forward(&hidden, 1);
        let n = self.blocks * self.channels;
        let two = T::of(2.0);
        let mut m = Modulation {
            gate: Vec::with_capacity(n),
            bias: Vec::with_capacity(n),
        };
        for b in 0..self.blocks {
            let base = 2 * b * self.channels;
            for ch in 0..self.channels {
                m.gate.push(two * sigmoid(u[base + ch]));
                m.bias.push(u[base + self.channels + ch]);
            }
        }
        (
            m,
            FusionCache {
                cond: cond.to_vec(),
                hidden,
                u,
            },
        )
    }

    pub fn backward(&mut self, cache: &FusionCache<T>, dm: &Modulation<T>) {
        let mut du = vec![T::zero(); cache.u.len()];
        let two = T::of(2.0);
        for b in 0..self.blocks {
            let base = 2 * b * self.channels;
            for ch in 0..self.channels {
                let s = sigmoid(cache.u[base + ch]);
                du[base + ch] = dm.gate[b * self.channels + ch] * two * s * (T::one() - s);
                du[base + self.channels + ch] = dm.bias[b * self.channels + ch];
            }
        }
        let mut dh = self.l2.backward(&cache.hidden, &du, 1);
        dh.iter_mut().zip(&cache.hidden).for_each(|(d, h)| *d *= T::one() - *h * *h);
        self.l1.accumulate_grads(&cache.cond, &dh, 1);
    }
}

impl<T: Real> Parameterized<T> for Fusion<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = prefixed("l1", self.l1.named_params());
        out.extend(prefixed("l2", self.l2.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.l1.params_mut();
        out.extend(self.l2.params_mut());
        out
    }
}
