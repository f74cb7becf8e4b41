use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::dsp::*;
use vam::synth::{exponential_rir, synth_source};

fn noise(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vam_nn::init::normal(&mut rng, len, 0.3)
}

#[test]
fn stft_of_clip_has_257_bins() {
    let s = Stft::<f64>::new(StftConfig::default()).unwrap();
    let spec = s.spectrogram(&noise(1, CLIP_SAMPLES)).unwrap();
    assert_eq!(spec.bins, 257);
    assert_eq!(spec.frames, 323);
    assert!(spec.magnitudes.iter().all(|&m| m >= 0.0));
}

#[test]
fn sine_energy_lands_in_its_bin() {
    let s = Stft::<f64>::new(StftConfig::default()).unwrap();
    let x: Vec<f64> = (0..8000)
        .map(|n| (std::f64::consts::TAU * 1000.0 * n as f64 / 16000.0).sin())
        .collect();
    let spec = s.spectrogram(&x).unwrap();
    let t = spec.frames / 2;
    let argmax = (0..spec.bins)
        .max_by(|&a, &b| spec.magnitude(t, a).partial_cmp(&spec.magnitude(t, b)).unwrap())
        .unwrap();
    // 1 kHz at 31.25 Hz per bin.
    assert_eq!(argmax, 32);
}

#[test]
fn roundtrip_and_identity_resynthesis() {
    let s = Stft::<f64>::new(StftConfig::default()).unwrap();
    let x = noise(2, CLIP_SAMPLES);
    let spec = s.spectrogram(&x).unwrap();
    let y = s.inverse(&spec).unwrap();
    assert_eq!(y.len(), x.len());
    assert!(snr_db(&x, &y) >= 50.0);

    let zeros = Spectrogram {
        magnitudes: vec![0.0; spec.magnitudes.len()],
        ..spec.clone()
    };
    assert!(s.inverse(&zeros).unwrap().iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn roundtrip_snr_above_50db(len in 512usize..6000, seed in 0u64..1000) {
        let s = Stft::<f64>::new(StftConfig::default()).unwrap();
        let x = noise(seed, len);
        let y = s.inverse(&s.spectrogram(&x).unwrap()).unwrap();
        prop_assert!(snr_db(&x, &y) >= 50.0);
    }

    #[test]
    fn drr_is_gain_invariant(gain in 0.01f32..10.0, seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = exponential_rir(0.4, 3.0, 30, &mut rng);
        let scaled = Rir { samples: r.samples.iter().map(|v| v * gain).collect(), ..r.clone() };
        prop_assert!((drr(&r) - drr(&scaled)).abs() < 1e-6);
    }

    #[test]
    fn unit_impulse_convolution_is_identity(seed in 0u64..100, len in 10usize..2000) {
        let w = Waveform::new(noise(seed, len).into_iter().map(|v| v as f32).collect()).unwrap();
        let out = convolve_rir(&w, &Rir::identity());
        for (a, b) in out.audio.samples.iter().zip(&w.samples) {
            prop_assert!((a - b * out.gain).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_probability_augment_is_identity(seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Waveform::new(noise(seed, 4096).into_iter().map(|v| v as f32).collect()).unwrap();
        let cfg = AugmentConfig { noise_gain: 0.0, p_invert: 0.0, p_rir: 0.0, ..AugmentConfig::default() };
        let out = augment(&w, &[], &cfg, &mut rng).unwrap();
        prop_assert_eq!(out.audio.samples, w.samples);
    }
}

#[test]
fn impulse_convolved_with_rir_returns_rir() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = exponential_rir(0.3, 2.0, 10, &mut rng);
    let mut imp = vec![0.0f32; 3000];
    imp[0] = 1.0;
    let out = convolve_rir(&Waveform::new(imp).unwrap(), &r);
    for (a, b) in out.audio.samples.iter().zip(&r.samples) {
        assert!((a - b * out.gain).abs() < 1e-5);
    }
}

#[test]
fn rendered_speech_decay_matches_rir() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut errs = Vec::new();
    for _ in 0..5 {
        let src = synth_source(&mut rng);
        let r = exponential_rir(0.8, 0.0, 20, &mut rng);
        let y = convolve_rir(&src, &r).audio;
        let est = blind_rt60(&y.samples, SAMPLE_RATE as f64).unwrap();
        errs.push((est - 0.8).abs() / 0.8);
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean < 0.2, "relative errors {errs:?}");
}

#[test]
fn schroeder_on_noisy_tails_within_ten_percent() {
    let fs = SAMPLE_RATE as f64;
    for t in [0.1, 0.3, 0.6, 1.0, 1.5] {
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n: Vec<f64> = vam_nn::init::normal(&mut rng, (2.0 * t * fs) as usize, 1.0);
            let samples = n
                .iter()
                .enumerate()
                .map(|(i, v)| (v * (-6.908 * i as f64 / fs / t).exp()) as f32)
                .collect();
            let r = Rir { samples, rt60_true: t, drr_true: 0.0, direct_delay: 0 };
            total += schroeder_rt60(&r).unwrap();
        }
        let mean = total / 20.0;
        assert!((mean - t).abs() / t < 0.10, "T={t} mean={mean}");
    }
}

#[test]
fn schroeder_with_noise_floor() {
    // Envelope starts 30 dB above a stationary white-noise floor.
    let fs = SAMPLE_RATE as f64;
    let t = 0.6;
    let mut total = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let len = (1.5 * fs) as usize;
        let n: Vec<f64> = vam_nn::init::normal(&mut rng, len, 1.0);
        let floor: Vec<f64> = vam_nn::init::normal(&mut rng, len, 10f64.powf(-30.0 / 20.0));
        let samples = (0..len)
            .map(|i| (n[i] * (-6.908 * i as f64 / fs / t).exp() + floor[i]) as f32)
            .collect();
        let r = Rir { samples, rt60_true: t, drr_true: 0.0, direct_delay: 0 };
        total += schroeder_rt60(&r).unwrap();
    }
    let mean = total / 20.0;
    assert!((mean - t).abs() / t < 0.10, "mean={mean}");
}

#[test]
fn drr_construction_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = exponential_rir(0.5, 6.0, 25, &mut rng);
    assert!((drr(&r) - 6.0).abs() < 0.5);
}

#[test]
fn augmentation_rates_and_inversion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = Waveform::new(noise(1, 1024).into_iter().map(|v| v as f32).collect()).unwrap();
    let pool = vec![Rir::identity()];
    let cfg = AugmentConfig { noise_gain: 0.0, ..AugmentConfig::default() };
    let (mut inv, mut rir) = (0, 0);
    let n = 10_000;
    for _ in 0..n {
        let o = augment(&w, &pool, &cfg, &mut rng).unwrap();
        inv += o.inverted as usize;
        rir += o.rir.is_some() as usize;
        if o.inverted && o.rir.is_none() {
            assert!(o.audio.samples.iter().zip(&w.samples).all(|(a, b)| *a == -*b));
        }
    }
    assert!((inv as f64 / n as f64 - 0.5).abs() < 0.02);
    assert!((rir as f64 / n as f64 - 0.9).abs() < 0.02);
    let empty = augment(&w, &[], &AugmentConfig::default(), &mut rng);
    assert!(matches!(empty, Err(vam::Error::Config(_))));
}

#[test]
fn wav_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let w = Waveform::new(noise(4, 1000).into_iter().map(|v| (v as f32).clamp(-0.99, 0.99)).collect()).unwrap();
    let p = dir.path().join("x.wav");
    write_wav(&p, &w).unwrap();
    let back = read_wav(&p).unwrap();
    assert_eq!(back.len(), w.len());
    assert!(back.samples.iter().zip(&w.samples).all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0));
}
