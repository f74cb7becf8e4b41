use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vam_nn::{leaky_relu_backward, leaky_relu_inplace, prefixed, sigmoid, Linear, Param, Parameterized, Real};

use super::trunk::{Fusion, FusionCache, Modulation, Trunk, TrunkCache, TrunkConfig};
use crate::dsp::{normalize_peak, FftConvolver, FrontEnd, PEAK_TARGET, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::metrics::{log_stft_error, SpectralMse};
use crate::synth::{DESCRIPTOR_DIM, TAIL_OFFSET};

const SLOPE: f64 = 0.1;
/// Predicted decay times live in `[RT_MIN, RT_MIN + RT_SPAN]` seconds.
pub const RT_MIN: f64 = 0.05;
pub const RT_SPAN: f64 = 1.55;
const INIT_GAIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverbKind {
    /// Conditioned on a scene descriptor through gated fusion.
    Visual,
    /// Audio only; has no fusion path at all.
    Blind,
}

/// Training objective for the reverberators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverbLoss {
    /// MSE between `log(1 + |STFT|)` maps; identical to `log_stft_error`.
    #[default]
    LogSpectral,
    /// Plain waveform MSE.
    WaveformL2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReverbConfig {
    pub trunk: TrunkConfig,
    pub cond_dim: usize,
    pub fusion_hidden: usize,
    pub head_hidden: usize,
    /// Length of the synthetic decay tail in samples.
    pub tail_len: usize,
    pub tail_seed: u64,
    /// Scale the tail to unit energy for every decay time.
    pub normalize_tail: bool,
    pub loss: ReverbLoss,
}

impl Default for ReverbConfig {
    fn default() -> Self {
        Self {
            trunk: TrunkConfig::default(),
            cond_dim: DESCRIPTOR_DIM,
            fusion_hidden: 32,
            head_hidden: 32,
            tail_len: 24_000,
            tail_seed: 0x7a11,
            normalize_tail: true,
            loss: ReverbLoss::LogSpectral,
        }
    }
}

/// Decay parameters decoded by the head.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RirParams {
    pub rt60: f64,
    pub wet_gain: f64,
    pub direct_gain: f64,
}

/// Fixed Gaussian noise shaped by `exp(-6.908 t / T)`.
#[derive(Clone, Debug)]
struct DecayTail<T> {
    noise: Vec<T>,
    normalize: bool,
}

impl<T: Real> DecayTail<T> {
    fn new(len: usize, seed: u64, normalize: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = TAIL_OFFSET.min(len / 2);
        let noise = vam_nn::init::normal(&mut rng, len, 1.0)
            .into_iter()
            .enumerate()
            .map(|(k, v): (usize, f64)| if k < start { T::zero() } else { T::of(v) })
            .collect();
        Self { noise, normalize }
    }

    /// `(e_T, de_T/dT)`.
    fn render(&self, rt60: T) -> (Vec<T>, Vec<T>) {
        let c = T::of(6.908 / SAMPLE_RATE as f64);
        let mut e = Vec::with_capacity(self.noise.len());
        let mut de = Vec::with_capacity(self.noise.len());
        for (k, &n) in self.noise.iter().enumerate() {
            let kk = T::of(k as f64);
            let v = n * (-c * kk / rt60).exp();
            e.push(v);
            de.push(v * c * kk / (rt60 * rt60));
        }
        if self.normalize {
            let energy: T = e.iter().map(|v| *v * *v).sum();
            let norm = energy.sqrt();
            e.iter_mut().for_each(|v| *v /= norm);
            let proj: T = e.iter().zip(&de).map(|(a, b)| *a * *b).sum();
            de.iter_mut().zip(&e).for_each(|(d, v)| *d = (*d - *v * proj) / norm);
        }
        (e, de)
    }
}

/// Conditional reverberator: a dilated-convolution trunk reads log band
/// energies of the (dry) input and, for the visual variant, a conditioner;
/// a pooled head decodes a decay time, wet gain and direct gain which
/// render `y = a x + g (x * e_T)`.
#[derive(Clone, Debug)]
pub struct ReverbModel<T: Real = f32> {
    kind: ReverbKind,
    cfg: ReverbConfig,
    trunk: Trunk<T>,
    fusion: Option<Fusion<T>>,
    head1: Linear<T>,
    head2: Linear<T>,
    tail: DecayTail<T>,
    front: FrontEnd,
    spectral: SpectralMse<T>,
    trained: bool,
}

struct ForwardCache<T> {
    x: Vec<T>,
    frames: usize,
    trunk: TrunkCache<T>,
    fusion: Option<(Modulation<T>, FusionCache<T>)>,
    pooled: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    z: Vec<T>,
    e: Vec<T>,
    de: Vec<T>,
    wet: Vec<T>,
}

impl<T: Real> ReverbModel<T> {
    pub fn new<R: Rng + ?Sized>(kind: ReverbKind, cfg: ReverbConfig, rng: &mut R) -> Self {
        let trunk = Trunk::new(cfg.trunk.clone(), rng);
        let fusion = (kind == ReverbKind::Visual)
            .then(|| Fusion::new(cfg.cond_dim, cfg.fusion_hidden, cfg.trunk.blocks, cfg.trunk.channels, rng));
        let head1 = Linear::new(cfg.trunk.channels, cfg.head_hidden, rng);
        let mut head2 = Linear::new(cfg.head_hidden, 3, rng);
        // Zero weights with tiny gains: the output starts near silence but
        // not at exactly zero, where the log-magnitude loss has no gradient.
        head2.weight.value.iter_mut().for_each(|v| *v = T::zero());
        head2.bias.value = vec![T::zero(), T::of(INIT_GAIN), T::of(INIT_GAIN)];
        Self {
            kind,
            tail: DecayTail::new(cfg.tail_len, cfg.tail_seed, cfg.normalize_tail),
            cfg,
            trunk,
            fusion,
            head1,
            head2,
            front: FrontEnd::standard(),
            spectral: SpectralMse::log_magnitude(),
            trained: false,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn set_trained(&mut self, trained: bool) {
        self.trained = trained;
    }

    pub fn visual<R: Rng + ?Sized>(cfg: ReverbConfig, rng: &mut R) -> Self {
        Self::new(ReverbKind::Visual, cfg, rng)
    }

    pub fn blind<R: Rng + ?Sized>(cfg: ReverbConfig, rng: &mut R) -> Self {
        Self::new(ReverbKind::Blind, cfg, rng)
    }

    pub fn kind(&self) -> ReverbKind {
        self.kind
    }

    pub fn config(&self) -> &ReverbConfig {
        &self.cfg
    }

    pub fn describe(&self) -> String {
        format!(
            "{:?} reverberator: {} blocks x {} layers, {} channels, receptive field {} frames, {} parameters",
            self.kind,
            self.cfg.trunk.blocks,
            self.cfg.trunk.dilations.len(),
            self.cfg.trunk.channels,
            self.cfg.trunk.receptive_field(),
            self.num_params()
        )
    }

    fn check_cond(&self, cond: Option<&[f32]>) -> Result<()> {
        match (self.kind, cond) {
            (ReverbKind::Blind, Some(_)) => Err(Error::Contract("blind reverberator takes no conditioner".into())),
            (ReverbKind::Visual, None) => Err(Error::Contract("visual reverberator requires a conditioner".into())),
            (ReverbKind::Visual, Some(v)) if v.len() != self.cfg.cond_dim => Err(Error::Shape(format!(
                "conditioner has {} values, model expects {}",
                v.len(),
                self.cfg.cond_dim
            ))),
            _ => Ok(()),
        }
    }

    fn run(&self, input: &[T], cond: Option<&[f32]>) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_cond(cond)?;
        let mut xf: Vec<f32> = input.iter().map(|v| v.as_f64() as f32).collect();
        normalize_peak(&mut xf, PEAK_TARGET);
        let feats = self.front.features(&xf)?;
        let x: Vec<T> = xf.iter().map(|&v| T::of(v as f64)).collect();
        let f: Vec<T> = feats.data.iter().map(|&v| T::of(v as f64)).collect();
        let frames = feats.frames;

        let fusion = match (&self.fusion, cond) {
            (Some(net), Some(c)) => {
                let c: Vec<T> = c.iter().map(|&v| T::of(v as f64)).collect();
                Some(net.forward(&c))
            }
            _ => None,
        };
        let (skip, trunk) = self.trunk.forward(&f, frames, fusion.as_ref().map(|f| &f.0));
        let ch = self.cfg.trunk.channels;
        let inv = T::one() / T::of(frames as f64);
        let pooled: Vec<T> = (0..ch)
            .map(|c| skip[c * frames..(c + 1) * frames].iter().copied().sum::<T>() * inv)
            .collect();
        let hidden_pre = self.head1.forward(&pooled, 1);
        let mut hidden = hidden_pre.clone();
        leaky_relu_inplace(&mut hidden, T::of(SLOPE));
        let z = self.head2.forward(&hidden, 1);
        let rt = T::of(RT_MIN) + T::of(RT_SPAN) * sigmoid(z[0]);
        let (e, de) = self.tail.render(rt);
        let len = x.len();
        let conv = FftConvolver::for_lengths(len, e.len());
        let wet = conv.convolve(&x, &e, len);
        let (a, g) = (z[1], z[2]);
        let y = x.iter().zip(&wet).map(|(xv, w)| a * *xv + g * *w).collect();
        Ok((
            y,
            ForwardCache {
                x,
                frames,
                trunk,
                fusion,
                pooled,
                hidden_pre,
                hidden,
                z,
                e,
                de,
                wet,
            },
        ))
    }

    /// Reverberated copy of `input` (same length). The input is
    /// peak-normalised first, so the output is independent of input gain.
    pub fn forward(&self, input: &[T], cond: Option<&[f32]>) -> Result<Vec<T>> {
        self.run(input, cond).map(|r| r.0)
    }

    pub fn rir_params(&self, input: &[T], cond: Option<&[f32]>) -> Result<RirParams> {
        let (_, c) = self.run(input, cond)?;
        Ok(RirParams {
            rt60: RT_MIN + RT_SPAN * sigmoid(c.z[0].as_f64()),
            direct_gain: c.z[1].as_f64(),
            wet_gain: c.z[2].as_f64(),
        })
    }

    /// Backpropagates `dy = dL/dy` into parameter gradients.
    fn backward(&mut self, c: &ForwardCache<T>, dy: &[T]) {
        let (a_grad, g_grad): (T, T) = (
            dy.iter().zip(&c.x).map(|(d, x)| *d * *x).sum(),
            dy.iter().zip(&c.wet).map(|(d, w)| *d * *w).sum(),
        );
        let g = c.z[2];
        let conv = FftConvolver::for_lengths(c.x.len(), c.e.len());
        let dwet: Vec<T> = dy.iter().map(|d| *d * g).collect();
        let de = conv.correlate(&dwet, &c.x, c.e.len());
        let drt: T = de.iter().zip(&c.de).map(|(a, b)| *a * *b).sum();
        let s = sigmoid(c.z[0]);
        let dz = [drt * T::of(RT_SPAN) * s * (T::one() - s), a_grad, g_grad];
        let mut dh = self.head2.backward(&c.hidden, &dz, 1);
        leaky_relu_backward(&c.hidden_pre, &mut dh, T::of(SLOPE));
        let dpool = self.head1.backward(&c.pooled, &dh, 1);
        let inv = T::one() / T::of(c.frames as f64);
        let mut dskip = Vec::with_capacity(dpool.len() * c.frames);
        for d in &dpool {
            dskip.extend(std::iter::repeat_n(*d * inv, c.frames));
        }
        let m = c.fusion.as_ref().map(|f| &f.0);
        let dm = self.trunk.backward(&c.trunk, &dskip, m);
        if let (Some(net), Some((_, fc)), Some(dm)) = (self.fusion.as_mut(), c.fusion.as_ref(), dm) {
            net.backward(fc, &dm);
        }
    }

    /// Loss features of a target, for use with [`ReverbModel::accumulate`].
    pub fn target_features(&self, target: &[T]) -> Result<Vec<T>> {
        match self.cfg.loss {
            ReverbLoss::LogSpectral => self.spectral.features(target),
            ReverbLoss::WaveformL2 => Ok(target.to_vec()),
        }
    }

    /// One sample's loss; parameter gradients of `scale * loss` are added.
    pub fn accumulate(&mut self, input: &[T], cond: Option<&[f32]>, target_features: &[T], scale: T) -> Result<T> {
        let (y, cache) = self.run(input, cond)?;
        let (loss, mut dy) = match self.cfg.loss {
            ReverbLoss::LogSpectral => self.spectral.value_and_grad(&y, target_features)?,
            ReverbLoss::WaveformL2 => waveform_mse(&y, target_features)?,
        };
        dy.iter_mut().for_each(|d| *d *= scale);
        self.backward(&cache, &dy);
        Ok(loss)
    }

    /// Loss value only, in the model's own precision.
    pub fn loss_value(&self, input: &[T], cond: Option<&[f32]>, target_features: &[T]) -> Result<T> {
        let y = self.forward(input, cond)?;
        match self.cfg.loss {
            ReverbLoss::LogSpectral => self.spectral.value_to(&y, target_features),
            ReverbLoss::WaveformL2 => waveform_mse(&y, target_features).map(|r| r.0),
        }
    }
}

impl ReverbModel<f32> {
    /// Reverberator loss reported by the metrics module: `log_stft_error`
    /// for the log-spectral objective, waveform MSE otherwise.
    pub fn loss(&self, input: &[f32], cond: Option<&[f32]>, target: &[f32]) -> Result<f64> {
        let y = self.forward(input, cond)?;
        match self.cfg.loss {
            ReverbLoss::LogSpectral => log_stft_error(&y, target),
            ReverbLoss::WaveformL2 => {
                if y.len() != target.len() {
                    return Err(Error::Length(format!("prediction has {} samples, target {}", y.len(), target.len())));
                }
                Ok(y.iter().zip(target).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>() / y.len() as f64)
            }
        }
    }
}

fn waveform_mse<T: Real>(y: &[T], t: &[T]) -> Result<(T, Vec<T>)> {
    if y.len() != t.len() {
        return Err(Error::Length(format!("prediction has {} samples, target {}", y.len(), t.len())));
    }
    let n = T::of(y.len() as f64);
    let two = T::of(2.0);
    let loss = y.iter().zip(t).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / n;
    let grad = y.iter().zip(t).map(|(a, b)| two * (*a - *b) / n).collect();
    Ok((loss, grad))
}

impl<T: Real> Parameterized<T> for ReverbModel<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = prefixed("trunk", self.trunk.named_params());
        if let Some(f) = &self.fusion {
            out.extend(prefixed("fusion", f.named_params()));
        }
        out.extend(prefixed("head1", self.head1.named_params()));
        out.extend(prefixed("head2", self.head2.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.trunk.params_mut();
        if let Some(f) = self.fusion.as_mut() {
            out.extend(f.params_mut());
        }
        out.extend(self.head1.params_mut());
        out.extend(self.head2.params_mut());
        out
    }
}
