use rand::Rng;

use super::room::{sabine_rt60, RoomSpec, SPEED_OF_SOUND};
use crate::dsp::{drr, Rir, DIRECT_HALF_WINDOW, SAMPLE_RATE};
use crate::error::Result;

/// The diffuse tail starts right after the direct-sound window.
pub const TAIL_OFFSET: usize = DIRECT_HALF_WINDOW + 1;
/// Tails run until the envelope is 70 dB down.
const TAIL_SPAN_DB: f64 = 70.0;

/// Distance law `DRR = 20 log10(r_c / d)` with `r_c` the critical distance.
pub fn target_drr_db(spec: &RoomSpec, rt60: f64) -> f64 {
    20.0 * (spec.critical_distance(rt60) / spec.distance).log10()
}

/// Direct impulse of unit amplitude at `delay` followed by Gaussian noise
/// under an `exp(-6.908 t / T)` envelope, scaled so the tail carries exactly
/// the energy implied by `drr_db`.
pub fn exponential_rir<R: Rng + ?Sized>(rt60: f64, drr_db: f64, delay: usize, rng: &mut R) -> Rir {
    let fs = SAMPLE_RATE as f64;
    let tail_len = (rt60 * fs * TAIL_SPAN_DB / 60.0).ceil() as usize;
    let len = delay + TAIL_OFFSET + tail_len;
    let mut h = vec![0.0f64; len];
    h[delay] = 1.0;
    let noise: Vec<f64> = vam_nn::init::normal(rng, tail_len, 1.0);
    let mut energy = 0.0;
    for (i, n) in noise.iter().enumerate() {
        let t = (TAIL_OFFSET + i) as f64 / fs;
        let v = n * (-6.908 * t / rt60).exp();
        h[delay + TAIL_OFFSET + i] = v;
        energy += v * v;
    }
    let target = 10f64.powf(-drr_db / 10.0);
    let g = (target / energy).sqrt();
    for v in &mut h[delay + TAIL_OFFSET..] {
        *v *= g;
    }
    let mut rir = Rir {
        samples: h.into_iter().map(|v| v as f32).collect(),
        rt60_true: rt60,
        drr_true: drr_db,
        direct_delay: delay,
    };
    rir.drr_true = drr(&rir);
    rir
}

/// RIR for a room: Sabine decay time, propagation delay `d / c` and the
/// distance-law DRR.
pub fn synth_rir<R: Rng + ?Sized>(spec: &RoomSpec, rng: &mut R) -> Result<Rir> {
    let rt60 = sabine_rt60(spec)?;
    let delay = (spec.distance / SPEED_OF_SOUND * SAMPLE_RATE as f64).round() as usize;
    Ok(exponential_rir(rt60, target_drr_db(spec, rt60), delay, rng))
}
