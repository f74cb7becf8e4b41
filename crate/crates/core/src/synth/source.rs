//! Speech-like source signals: syllables of formant-filtered glottal pulse
//! trains or noise, separated by silent gaps.

use rand::Rng;

use crate::dsp::{normalize_peak, Waveform, CLIP_SAMPLES, PEAK_TARGET, SAMPLE_RATE};

const FS: f64 = SAMPLE_RATE as f64;

/// Two-pole resonator with unity gain at its centre frequency.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64) -> Self {
        let r = (-std::f64::consts::PI * bandwidth / FS).exp();
        let th = std::f64::consts::TAU * freq / FS;
        Self {
            a1: 2.0 * r * th.cos(),
            a2: -r * r,
            gain: (1.0 - r) * (1.0 - 2.0 * r * (2.0 * th).cos() + r * r).sqrt(),
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

fn ms(v: f64) -> usize {
    (v * FS / 1000.0).round() as usize
}

/// Syllable schedule over `len` samples: syllables of 100-250 ms separated
/// by 50-400 ms gaps, with at least one gap of 300 ms or more.
pub fn syllable_schedule<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<Segment> {
    let mut syl = Vec::new();
    let mut gaps = Vec::new();
    let mut t = ms(rng.random_range(20.0..150.0));
    while t < len {
        let s = ms(rng.random_range(100.0..250.0)).min(len - t);
        syl.push(Segment { start: t, len: s });
        t += s;
        let g = ms(rng.random_range(50.0..400.0));
        gaps.push(g);
        t += g;
    }
    // Guarantee a long gap among those that end inside the clip.
    let inner = syl.len().saturating_sub(1);
    if inner > 0 && !gaps[..inner].iter().any(|&g| g >= ms(300.0)) {
        let k = rng.random_range(0..inner);
        gaps[k] = ms(rng.random_range(300.0..400.0));
    }
    let mut out = Vec::with_capacity(syl.len());
    let mut t = syl.first().map_or(0, |s| s.start);
    for (s, g) in syl.iter().zip(&gaps) {
        if t >= len {
            break;
        }
        out.push(Segment {
            start: t,
            len: s.len.min(len - t),
        });
        t += s.len + g;
    }
    out
}

fn envelope(i: usize, n: usize) -> f64 {
    let attack = ms(15.0).min(n / 2).max(1);
    let release = ms(10.0).min(n / 2).max(1);
    if i < attack {
        0.5 - 0.5 * (std::f64::consts::PI * i as f64 / attack as f64).cos()
    } else if i + release > n {
        let k = n - i;
        0.5 - 0.5 * (std::f64::consts::PI * k as f64 / release as f64).cos()
    } else {
        1.0
    }
}

fn voiced<R: Rng + ?Sized>(rng: &mut R, n: usize, base_f0: f64) -> Vec<f64> {
    let f = [
        rng.random_range(300.0..900.0),
        rng.random_range(900.0..2500.0),
        rng.random_range(2200.0..3200.0),
    ];
    let mut res: Vec<Resonator> = f
        .iter()
        .zip([80.0, 120.0, 160.0])
        .map(|(&f, b)| Resonator::new(f, b))
        .collect();
    let glide = rng.random_range(-0.15..0.15);
    let vib_rate = rng.random_range(3.0..6.0);
    let mut phase = 0.0;
    let mut tilt = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / FS;
        let frac = i as f64 / n.max(1) as f64;
        let f0 = base_f0 * (1.0 + glide * frac + 0.03 * (std::f64::consts::TAU * vib_rate * t).sin());
        let jitter = 1.0 + 0.01 * (rng.random::<f64>() - 0.5);
        phase += f0 * jitter / FS;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        tilt = pulse + 0.7 * tilt;
        let y: f64 = res.iter_mut().map(|r| r.step(tilt)).sum();
        out.push(y);
    }
    out
}

fn unvoiced<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut r = Resonator::new(rng.random_range(2500.0..5000.0), rng.random_range(800.0..2000.0));
    let noise: Vec<f64> = vam_nn::init::normal(rng, n, 1.0);
    noise.into_iter().map(|x| r.step(x)).collect()
}

/// A 2.56 s speech-like clip, peak-normalised to 0.9.
pub fn synth_source<R: Rng + ?Sized>(rng: &mut R) -> Waveform {
    synth_source_len(rng, CLIP_SAMPLES)
}

pub fn synth_source_len<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Waveform {
    let base_f0 = rng.random_range(80.0..300.0);
    let mut x = vec![0.0f64; len];
    for seg in syllable_schedule(rng, len) {
        let amp = rng.random_range(0.5..1.0);
        let sig = if rng.random::<f64>() < 0.8 {
            let v = voiced(rng, seg.len, base_f0);
            let p = v.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
            v.into_iter().map(|s| s / p).collect::<Vec<_>>()
        } else {
            let u = unvoiced(rng, seg.len);
            let p = u.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
            u.into_iter().map(|s| 0.5 * s / p).collect()
        };
        for (i, s) in sig.into_iter().enumerate() {
            x[seg.start + i] = amp * envelope(i, seg.len) * s;
        }
    }
    let mut samples: Vec<f32> = x.into_iter().map(|v| v as f32).collect();
    normalize_peak(&mut samples, PEAK_TARGET);
    Waveform {
        samples,
        sample_rate: SAMPLE_RATE,
    }
}
