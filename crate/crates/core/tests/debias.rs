use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vam::debias::*;
use vam::dsp::snr_db;
use vam::metrics::Rt60Estimator;
use vam::reverb::{ReverbConfig, ReverbModel};
use vam::synth::synth_source;
use vam::Error;
use vam_nn::gradcheck::check_params;
use vam_nn::Parameterized;

fn tiny_gen() -> GeneratorConfig {
    GeneratorConfig { hidden: 3, layers: 2, fc_hidden: 4, slope: 0.01 }
}

fn tiny_disc() -> DiscriminatorConfig {
    DiscriminatorConfig { conv_layers: 2, channels: 3, kernel: 3, stride: 2, fc: vec![4], slope: 0.3 }
}

fn signal(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|i| 0.5 * (i as f64 * 0.07).sin() + 0.3 * rng.random_range(-1.0..1.0)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn residue_formula_oracles() {
    // Equal errors on both sides.
    assert_eq!(residue_score(0.75, 0.25, 0.5, 0.1), 0.5);
    // rt_target below the floor: denominator clamps to 0.1, gap 0.3 -> sigmoid(3).
    let s = residue_score(0.35, 0.05, 0.05, 0.1);
    assert!((s - 0.9525741268224334).abs() < 1e-12, "{s}");
    assert!((s - sigmoid(3.0)).abs() < 1e-12);
    // Above the floor the target RT60 normalises.
    assert!((residue_score(1.4, 1.0, 1.0, 0.1) - sigmoid(0.4)).abs() < 1e-12);
}

#[test]
fn combined_metric_reductions() {
    assert_eq!(combine(1.0, 0.37, 0.91), 0.37);
    assert_eq!(combine(0.0, 0.37, 0.91), 0.91);
    assert!((combine(0.7, 0.2, 0.6) - (0.14 + 0.18)).abs() < 1e-15);
}

#[test]
fn metric_networks_require_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let v = ReverbModel::visual(ReverbConfig::default(), &mut rng);
    let b = ReverbModel::blind(ReverbConfig::default(), &mut rng);
    let est = Rt60Estimator::new(&mut rng);
    let r = MetricNetworks::new(&v, &b, &est, ResidueMetricConfig::default());
    assert!(matches!(r, Err(Error::Contract(_))));
    let bad = ResidueMetricConfig { alpha: 1.5, ..Default::default() };
    assert!(matches!(MetricNetworks::new(&v, &b, &est, bad), Err(Error::Config(_))));
}

#[test]
fn disc_loss_is_sum_of_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = Discriminator::<f64>::new(tiny_disc(), &mut rng);
    let (a, g, h) = (signal(1, 1200), signal(2, 1200), signal(3, 1200));
    let (sa, sg, sh) = (0.8, 0.3, 0.55);
    let terms = disc_loss(
        &d,
        Scored { audio: &a, score: sa },
        Scored { audio: &g, score: sg },
        Some(Scored { audio: &h, score: sh }),
    )
    .unwrap();
    let sum = (d.score(&a).unwrap() - sa).powi(2) + (d.score(&g).unwrap() - sg).powi(2) + (d.score(&h).unwrap() - sh).powi(2);
    assert!((terms.total() - sum).abs() < 1e-14);
    let no_replay = disc_loss(&d, Scored { audio: &a, score: sa }, Scored { audio: &g, score: sg }, None).unwrap();
    assert_eq!(no_replay.replay, None);
    assert!((no_replay.total() - terms.real - terms.generated).abs() < 1e-15);
    let gl = gen_loss(&d, &g).unwrap();
    assert!((gl - (d.score(&g).unwrap() - 1.0).powi(2)).abs() < 1e-15);
}

#[test]
fn discriminator_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut d = Discriminator::<f64>::new(tiny_disc(), &mut rng);
    let (a, g, h) = (signal(4, 1500), signal(5, 1500), signal(6, 1500));
    let scored = |x: &'static str| -> f64 { if x == "a" { 0.9 } else { 0.2 } };
    let (err, name) = check_params(
        &mut d,
        |d| {
            d.zero_grad();
            disc_loss_backward(
                d,
                Scored { audio: &a, score: scored("a") },
                Scored { audio: &g, score: scored("g") },
                Some(Scored { audio: &h, score: 0.5 }),
                1.0,
            )
            .unwrap()
            .total()
        },
        |d| {
            disc_loss(
                d,
                Scored { audio: &a, score: scored("a") },
                Scored { audio: &g, score: scored("g") },
                Some(Scored { audio: &h, score: 0.5 }),
            )
            .unwrap()
            .total()
        },
        6,
        1e-6,
    );
    assert!(err < 1e-4, "{name} rel err {err}");
}

#[test]
fn generator_gradients_through_mask_and_resynthesis() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = Generator::<f64>::new(tiny_gen(), &mut rng);
    let d = Discriminator::<f64>::new(tiny_disc(), &mut rng);
    // With 257 inputs and 3 hidden units the default bound saturates the
    // first layer's gates; a stronger D lifts the loss's sensitivity to the
    // mask above finite-difference round-off.
    let names: Vec<String> = g.named_params().into_iter().map(|(n, _)| n).collect();
    for (n, p) in names.iter().zip(g.params_mut()) {
        if n.starts_with("lstm.l0.") && n.ends_with("w_ih") {
            p.value.iter_mut().for_each(|v| *v *= 0.05);
        }
    }
    let mut d = d;
    let names: Vec<String> = d.named_params().into_iter().map(|(n, _)| n).collect();
    for (n, p) in names.iter().zip(d.params_mut()) {
        if n.starts_with("conv") {
            p.value.iter_mut().for_each(|v| *v *= 3.0);
        }
    }
    let d = d;
    let x = signal(7, 1400);
    let d_before: Vec<Vec<f64>> = d.named_params().iter().map(|(_, p)| p.value.clone()).collect();
    let (err, name) = check_params(
        &mut g,
        |g| {
            g.zero_grad();
            let cache = g.forward_masks(&[&x]).unwrap();
            let y = g.outputs(&cache).pop().unwrap();
            let mut frozen = d.clone();
            let (loss, dy) = gen_loss_grad(&mut frozen, &y).unwrap();
            assert!(frozen.named_params().iter().all(|(_, p)| p.grad.iter().all(|&v| v == 0.0)));
            g.backward(&cache, &[dy]);
            loss
        },
        |g| gen_loss(&d, &g.forward(&x).unwrap()).unwrap(),
        5,
        1e-6,
    );
    assert!(err < 1e-3, "{name} rel err {err}");
    let d_after: Vec<Vec<f64>> = d.named_params().iter().map(|(_, p)| p.value.clone()).collect();
    assert_eq!(d_before, d_after);
}

#[test]
fn batched_generator_matches_single_clips() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Generator::<f64>::new(tiny_gen(), &mut rng);
    let (a, b) = (signal(8, 2000), signal(9, 2000));
    let batch = g.forward_batch(&[&a, &b]).unwrap();
    for (x, y) in [&a, &b].iter().zip(&batch) {
        let single = g.forward(x).unwrap();
        assert!(single.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12));
    }
    assert!(matches!(g.forward_batch(&[&a, &b[..1000]]), Err(Error::Length(_))));
}

#[test]
fn unit_mask_is_identity() {
    let g = Generator::<f32>::new(GeneratorConfig::default(), &mut ChaCha8Rng::seed_from_u64(5));
    let x = synth_source(&mut ChaCha8Rng::seed_from_u64(6)).samples;
    let frames = g.stft().analyze(&x).unwrap().frames;
    let bins = g.stft().config().bins();
    let y = g.apply_mask(&x, &vec![1.0; frames * bins]).unwrap();
    let snr = snr_db(&x.iter().map(|&v| v as f64).collect::<Vec<_>>(), &y.iter().map(|&v| v as f64).collect::<Vec<_>>());
    assert!(snr >= 50.0, "snr {snr}");
    assert!(matches!(g.apply_mask(&x, &[1.0; 10]), Err(Error::Shape(_))));
    // Learned masks never amplify.
    let cache = g.forward_masks(&[&x]).unwrap();
    assert!(g.clip_mask(&cache, 0).iter().all(|&m| (0.0..=1.0).contains(&m)));
}

fn entry(i: usize) -> ReplayEntry {
    ReplayEntry { audio: vec![i as f32; 4], score: i as f64 / 10.0, epoch: i }
}

#[test]
fn replay_buffer_is_bounded_fifo() {
    let mut buf = ReplayBuffer::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert!(buf.sample(&mut rng, 4).is_empty());
    for i in 0..5 {
        buf.push(entry(i));
    }
    assert_eq!(buf.len(), 3);
    let epochs: Vec<usize> = buf.iter().map(|e| e.epoch).collect();
    assert_eq!(epochs, vec![2, 3, 4]);
    assert_eq!(ReplayBuffer::default().capacity(), REPLAY_CAPACITY);
}

#[test]
fn replay_sampling_is_uniform() {
    let mut buf = ReplayBuffer::new(10);
    for i in 0..10 {
        buf.push(entry(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = [0usize; 10];
    let draws = 50_000;
    for e in buf.sample(&mut rng, draws) {
        counts[e.epoch] += 1;
    }
    // Chi-square with 9 degrees of freedom; 27.9 is the 0.999 quantile.
    let expect = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    assert!(chi2 < 27.9, "chi2 {chi2} counts {counts:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn residue_is_a_probability(rb in 0.0f64..3.0, rv in 0.0f64..3.0, rt in 0.0f64..3.0) {
        let s = residue_score(rb, rv, rt, 0.1);
        prop_assert!((0.0..=1.0).contains(&s));
        // A visual estimate closer to the target never scores below one half.
        if (rv - rt).abs() <= (rb - rt).abs() {
            prop_assert!(s >= 0.5);
        }
    }

    #[test]
    fn replay_scores_are_immutable(scores in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let mut buf = ReplayBuffer::new(16);
        for (i, &s) in scores.iter().enumerate() {
            buf.push(ReplayEntry { audio: vec![0.0; 2], score: s, epoch: i });
        }
        let kept = &scores[scores.len().saturating_sub(16)..];
        let stored: Vec<f64> = buf.iter().map(|e| e.score).collect();
        prop_assert_eq!(stored, kept.to_vec());
    }
}
