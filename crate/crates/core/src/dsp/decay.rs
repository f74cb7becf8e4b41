//! Energy-decay analysis: Schroeder backward integration, RT60 from the
//! -5..-25 dB segment, blind decay estimation on running audio, and DRR.

use super::{Rir, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Minimum peak-to-noise range (dB) for an RIR to be analysable.
pub const MIN_DECAY_RANGE_DB: f64 = 35.0;
/// Half width of the direct-sound window (2.5 ms at 16 kHz).
pub const DIRECT_HALF_WINDOW: usize = 40;

const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -25.0;
const BLOCK: usize = 160;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rt60: f64,
    /// Decay rate of the fitted line in dB per second (negative).
    pub slope_db_per_s: f64,
    /// Start and end levels of the fitted segment, dB relative to total energy.
    pub fit_range_db: (f64, f64),
}

fn db(x: f64) -> f64 {
    10.0 * x.max(1e-300).log10()
}

/// Schroeder energy-decay curve in dB relative to the total energy, with an
/// optional constant added to every backward sum (tail compensation).
pub fn energy_decay_curve_db(energy: &[f64], tail: f64) -> Vec<f64> {
    let mut edc = vec![0.0; energy.len()];
    let mut acc = tail;
    for i in (0..energy.len()).rev() {
        acc += energy[i];
        edc[i] = acc;
    }
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter().map(|&v| db(v / total)).collect()
}

/// Least-squares line through `(x, y)`; returns (slope, intercept).
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit the EDC between `start_db` and `end_db` and extrapolate to -60 dB.
pub fn fit_decay_rt60(edc_db: &[f64], fs: f64, start_db: f64, end_db: f64) -> Result<DecayFit> {
    let lowest = edc_db.iter().cloned().fold(f64::INFINITY, f64::min);
    if lowest > end_db {
        return Err(Error::Estimation(format!(
            "energy decay only reaches {lowest:.1} dB; the fit needs {end_db:.1} dB"
        )));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &v) in edc_db.iter().enumerate() {
        if v <= start_db && v >= end_db {
            xs.push(i as f64 / fs);
            ys.push(v);
        }
        if v < end_db {
            break;
        }
    }
    if xs.len() < 8 {
        return Err(Error::Estimation(format!(
            "only {} samples between {start_db} and {end_db} dB",
            xs.len()
        )));
    }
    let (slope, _) = line_fit(&xs, &ys);
    if slope >= 0.0 || !slope.is_finite() {
        return Err(Error::Estimation(format!("non-decaying energy curve (slope {slope:.3} dB/s)")));
    }
    Ok(DecayFit {
        rt60: -60.0 / slope,
        slope_db_per_s: slope,
        fit_range_db: (start_db, end_db),
    })
}

fn block_levels_db(energy: &[f64]) -> Vec<f64> {
    energy
        .chunks(BLOCK)
        .map(|c| db(c.iter().sum::<f64>() / c.len() as f64))
        .collect()
}

/// Truncation point and tail-energy compensation for a noisy decay, in the
/// spirit of Lundeby's iterative method: fit the envelope above the noise
/// floor, intersect with the floor, re-estimate the floor past the crossing.
fn noise_truncation(energy: &[f64], fs: f64) -> (usize, f64) {
    let levels = block_levels_db(energy);
    let nb = levels.len();
    if nb < 10 {
        return (energy.len(), 0.0);
    }
    let peak_block = levels
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    let tail_start = nb - (nb / 10).max(1);
    let mut noise_db = levels[tail_start..].iter().map(|l| 10f64.powf(l / 10.0)).sum::<f64>() / (nb - tail_start) as f64;
    noise_db = db(noise_db);
    if peak_block.1 - noise_db > 100.0 {
        return (energy.len(), 0.0);
    }
    let block_t = BLOCK as f64 / fs;
    let mut crossing = nb;
    let mut line = (0.0, 0.0);
    for _ in 0..4 {
        let stop = (peak_block.0..nb)
            .find(|&i| levels[i] < noise_db + 10.0)
            .unwrap_or(nb);
        if stop < peak_block.0 + 3 {
            break;
        }
        let xs: Vec<f64> = (peak_block.0..stop).map(|i| i as f64 * block_t).collect();
        let ys: Vec<f64> = levels[peak_block.0..stop].to_vec();
        let (slope, icpt) = line_fit(&xs, &ys);
        if slope >= 0.0 {
            break;
        }
        line = (slope, icpt);
        let tc = (noise_db - icpt) / slope;
        crossing = ((tc / block_t).round() as usize).clamp(peak_block.0 + 1, nb);
        // Noise re-estimated from blocks that are 5 dB of decay past the crossing.
        let guard = ((5.0 / -slope) / block_t).ceil() as usize;
        let from = (crossing + guard).min(tail_start);
        let n = nb - from;
        noise_db = db(levels[from..].iter().map(|l| 10f64.powf(l / 10.0)).sum::<f64>() / n as f64);
    }
    if crossing >= nb || line.0 >= 0.0 {
        return (energy.len(), 0.0);
    }
    let cut = (crossing * BLOCK).min(energy.len());
    let level_at_cut = 10f64.powf((line.0 * cut as f64 / fs + line.1) / 10.0);
    let per_sample = 10f64.powf(line.0 / fs / 10.0);
    let tail = level_at_cut * per_sample / (1.0 - per_sample);
    (cut, tail)
}

/// Schroeder RT60 of an impulse response that starts at its direct sound.
pub fn schroeder_rt60_samples(x: &[f32], fs: f64) -> Result<DecayFit> {
    let energy: Vec<f64> = x.iter().map(|&v| (v as f64) * (v as f64)).collect();
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Estimation("impulse response is all zeros".into()));
    }
    let tail_len = (energy.len() / 10).max(1);
    let noise = energy[energy.len() - tail_len..].iter().sum::<f64>() / tail_len as f64;
    let range = db(peak / noise.max(1e-300));
    if range < MIN_DECAY_RANGE_DB {
        return Err(Error::Estimation(format!(
            "decay range {range:.1} dB is below the required {MIN_DECAY_RANGE_DB} dB"
        )));
    }
    let (cut, tail) = noise_truncation(&energy, fs);
    let edc = energy_decay_curve_db(&energy[..cut], tail);
    fit_decay_rt60(&edc, fs, FIT_START_DB, FIT_END_DB)
}

/// Schroeder RT60 (seconds) of an RIR, analysed from its direct arrival.
pub fn schroeder_rt60(r: &Rir) -> Result<f64> {
    let start = r.direct_delay.min(r.samples.len());
    schroeder_rt60_samples(&r.samples[start..], SAMPLE_RATE as f64).map(|f| f.rt60)
}

/// Direct-to-reverberant ratio in dB; `+inf` when there is no energy
/// outside the direct window.
pub fn drr(r: &Rir) -> f64 {
    let lo = r.direct_delay.saturating_sub(DIRECT_HALF_WINDOW);
    let hi = (r.direct_delay + DIRECT_HALF_WINDOW + 1).min(r.samples.len());
    let mut direct = 0.0;
    let mut rest = 0.0;
    for (i, &v) in r.samples.iter().enumerate() {
        let e = (v as f64) * (v as f64);
        if i >= lo && i < hi {
            direct += e;
        } else {
            rest += e;
        }
    }
    if rest == 0.0 {
        f64::INFINITY
    } else {
        db(direct / rest)
    }
}

/// Blind RT60 of running audio: Schroeder analysis of the free decays that
/// follow sound offsets. The decay with the widest dynamic range wins.
pub fn blind_rt60(x: &[f32], fs: f64) -> Result<f64> {
    let energy: Vec<f64> = x.iter().map(|&v| (v as f64) * (v as f64)).collect();
    let levels = block_levels_db(&energy);
    let max_level = levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<(f64, f64)> = None;
    for i in 1..levels.len().saturating_sub(1) {
        let is_peak = levels[i] >= levels[i - 1] && levels[i] > levels[i + 1];
        if !is_peak || levels[i] < max_level - 30.0 {
            continue;
        }
        let mut min_at = i;
        let mut j = i + 1;
        while j < levels.len() && levels[j] <= levels[min_at] + 2.0 {
            if levels[j] < levels[min_at] {
                min_at = j;
            }
            j += 1;
        }
        let drop = levels[i] - levels[min_at];
        if drop < 20.0 {
            continue;
        }
        let seg = &energy[i * BLOCK..((min_at + 1) * BLOCK).min(energy.len())];
        let edc = energy_decay_curve_db(seg, 0.0);
        let end = FIT_END_DB.max(-(drop - 10.0)).min(-15.0);
        if let Ok(fit) = fit_decay_rt60(&edc, fs, FIT_START_DB, end) {
            if best.map_or(true, |(d, _)| drop > d) {
                best = Some((drop, fit.rt60));
            }
        }
    }
    best.map(|(_, rt)| rt)
        .ok_or_else(|| Error::Estimation("no free decay of at least 20 dB found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_decay(t60: f64, secs: f64) -> Vec<f32> {
        let fs = SAMPLE_RATE as f64;
        (0..(secs * fs) as usize)
            .map(|n| (-6.908 * n as f64 / fs / t60).exp() as f32)
            .collect()
    }

    #[test]
    fn ideal_exponentials() {
        for t in [0.2, 0.5, 1.0] {
            let r = Rir {
                samples: ideal_decay(t, 2.0 * t),
                rt60_true: t,
                drr_true: 0.0,
                direct_delay: 0,
            };
            let est = schroeder_rt60(&r).unwrap();
            assert!((est - t).abs() / t < 0.05, "T={t} est={est}");
        }
    }

    #[test]
    fn short_range_is_rejected() {
        let r = Rir {
            samples: vec![1.0, 0.5, 0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
            rt60_true: 0.1,
            drr_true: 0.0,
            direct_delay: 0,
        };
        assert!(matches!(schroeder_rt60(&r), Err(Error::Estimation(_))));
    }

    #[test]
    fn drr_special_cases() {
        let imp = Rir {
            samples: vec![0.0, 0.0, 1.0, 0.0],
            rt60_true: 0.1,
            drr_true: 0.0,
            direct_delay: 2,
        };
        assert_eq!(drr(&imp), f64::INFINITY);
        let mut s = vec![0.0f32; 200];
        s[0] = 1.0;
        s[100] = 1.0;
        let eq = Rir {
            samples: s,
            rt60_true: 0.1,
            drr_true: 0.0,
            direct_delay: 0,
        };
        assert!(drr(&eq).abs() < 1e-12);
    }
}
