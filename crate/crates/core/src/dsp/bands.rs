use vam_nn::Real;

use super::{Stft, StftConfig};

/// Log-frequency band layout over STFT bins.
///
/// Bin weights form a partition of unity: triangles between neighbouring
/// log-spaced centres, with everything below the first centre in band 0 and
/// everything above the last in the top band. The same weights pool bin
/// powers into band energies and spread band gains back to bins.
#[derive(Clone, Debug, PartialEq)]
pub struct BandLayout {
    pub bands: usize,
    pub bins: usize,
    /// `[bands, bins]`.
    weights: Vec<f64>,
    /// Per-band weight totals.
    norms: Vec<f64>,
}

impl BandLayout {
    pub fn new(bands: usize, bins: usize, sample_rate: f64, f_lo: f64, f_hi: f64) -> Self {
        assert!(bands >= 2 && bins >= bands);
        let nyq = sample_rate / 2.0;
        let centres: Vec<f64> = (0..bands)
            .map(|b| (f_lo.ln() + (f_hi / f_lo).ln() * b as f64 / (bands - 1) as f64).exp())
            .collect();
        let mut weights = vec![0.0; bands * bins];
        for k in 0..bins {
            let f = nyq * k as f64 / (bins - 1) as f64;
            if f <= centres[0] {
                weights[k] = 1.0;
            } else if f >= centres[bands - 1] {
                weights[(bands - 1) * bins + k] = 1.0;
            } else {
                let b = centres.iter().rposition(|&c| c <= f).unwrap();
                let t = (f.ln() - centres[b].ln()) / (centres[b + 1].ln() - centres[b].ln());
                weights[b * bins + k] = 1.0 - t;
                weights[(b + 1) * bins + k] = t;
            }
        }
        let norms = (0..bands)
            .map(|b| weights[b * bins..(b + 1) * bins].iter().sum())
            .collect();
        Self {
            bands,
            bins,
            weights,
            norms,
        }
    }

    /// 32 bands between 150 Hz and 7 kHz for a 512-point STFT at 16 kHz.
    pub fn standard() -> Self {
        Self::new(32, 257, 16_000.0, 150.0, 7_000.0)
    }

    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        self.weights[band * self.bins + bin]
    }

    pub fn norm(&self, band: usize) -> f64 {
        self.norms[band]
    }

    /// Mean power per band for every frame of `[frames, bins]` magnitudes;
    /// output is `[bands, frames]` (channel-major, ready for 1-D convs).
    pub fn band_power<T: Real>(&self, mags: &[T], frames: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.bands * frames];
        for t in 0..frames {
            let row = &mags[t * self.bins..(t + 1) * self.bins];
            for b in 0..self.bands {
                let w = &self.weights[b * self.bins..(b + 1) * self.bins];
                let mut acc = 0.0;
                for (k, &wk) in w.iter().enumerate() {
                    if wk != 0.0 {
                        let m = row[k].as_f64();
                        acc += wk * m * m;
                    }
                }
                out[b * frames + t] = acc / self.norms[b];
            }
        }
        out
    }

    /// Spread `[bands, frames]` gains to `[frames, bins]`.
    pub fn expand<T: Real>(&self, gains: &[T], frames: usize) -> Vec<T> {
        let mut out = vec![T::zero(); frames * self.bins];
        for b in 0..self.bands {
            for k in 0..self.bins {
                let w = self.weights[b * self.bins + k];
                if w == 0.0 {
                    continue;
                }
                let w = T::of(w);
                for t in 0..frames {
                    out[t * self.bins + k] += w * gains[b * frames + t];
                }
            }
        }
        out
    }

    /// Adjoint of [`BandLayout::expand`].
    pub fn expand_adjoint<T: Real>(&self, g: &[T], frames: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.bands * frames];
        for b in 0..self.bands {
            for k in 0..self.bins {
                let w = self.weights[b * self.bins + k];
                if w == 0.0 {
                    continue;
                }
                let w = T::of(w);
                for t in 0..frames {
                    out[b * frames + t] += w * g[t * self.bins + k];
                }
            }
        }
        out
    }
}

/// Log band energies of peak-normalised audio: dB relative to the loudest
/// band/frame, floored at -80 dB, mapped to roughly `[-2, 2]`.
#[derive(Clone, Debug)]
pub struct FrontEnd {
    stft: Stft<f32>,
    layout: BandLayout,
}

/// `[bands, frames]` feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct BandFeatures {
    pub data: Vec<f32>,
    pub bands: usize,
    pub frames: usize,
    /// True when the input had no energy at all.
    pub silent: bool,
}

pub const FEATURE_FLOOR_DB: f64 = -80.0;

impl FrontEnd {
    pub fn new(cfg: StftConfig, layout: BandLayout) -> crate::Result<Self> {
        Ok(Self {
            stft: Stft::new(cfg)?,
            layout,
        })
    }

    pub fn standard() -> Self {
        Self::new(StftConfig::default(), BandLayout::standard()).expect("default STFT config is valid")
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    pub fn stft(&self) -> &Stft<f32> {
        &self.stft
    }

    pub fn features(&self, x: &[f32]) -> crate::Result<BandFeatures> {
        let mags = self.stft.magnitudes(x)?;
        Ok(self.features_from_magnitudes(&mags, self.stft.config().num_frames(x.len())))
    }

    pub fn features_from_magnitudes(&self, mags: &[f32], frames: usize) -> BandFeatures {
        let power = self.layout.band_power(mags, frames);
        let max = power.iter().cloned().fold(0.0f64, f64::max);
        let silent = max == 0.0;
        let data = power
            .iter()
            .map(|&p| {
                let db = if silent {
                    FEATURE_FLOOR_DB
                } else {
                    (10.0 * (p / max).max(1e-30).log10()).max(FEATURE_FLOOR_DB)
                };
                (db / 20.0 + 2.0) as f32
            })
            .collect();
        BandFeatures {
            data,
            bands: self.layout.bands,
            frames,
            silent,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_no_empty_band() {
        let l = BandLayout::standard();
        for k in 0..l.bins {
            let s: f64 = (0..l.bands).map(|b| l.weight(b, k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        for b in 0..l.bands {
            assert!(l.norm(b) > 0.3, "band {b} has weight {}", l.norm(b));
        }
    }

    #[test]
    fn constant_gain_expands_to_constant() {
        let l = BandLayout::standard();
        let g = vec![0.25f64; l.bands * 3];
        assert!(l.expand(&g, 3).iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }
}
