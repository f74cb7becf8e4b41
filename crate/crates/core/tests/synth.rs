use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::dsp::{drr, read_wav, schroeder_rt60, SAMPLE_RATE};
use vam::synth::*;

#[test]
fn sabine_reference_and_scaling() {
    let s = RoomSpec { dims: [10.0, 8.0, 3.0], mean_absorption: 0.2, distance: 2.0 };
    let rt = sabine_rt60(&s).unwrap();
    assert!((rt - 0.721).abs() < 5e-4, "{rt}");
    let s2 = RoomSpec { mean_absorption: 0.4, ..s };
    assert!((sabine_rt60(&s2).unwrap() - rt / 2.0).abs() < 1e-12);
    let s3 = RoomSpec { dims: [20.0, 16.0, 6.0], ..s };
    assert!((sabine_rt60(&s3).unwrap() - rt * 2.0).abs() < 1e-12);
}

#[test]
fn synthetic_rirs_decay_at_sabine_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let room = sample_room(&mut rng, RT60_RANGE);
        let spec = room.with_distance(sample_distance(&mut rng, &room));
        spec.validate().unwrap();
        let rir = synth_rir(&spec, &mut rng).unwrap();
        let sab = sabine_rt60(&spec).unwrap();
        let est = schroeder_rt60(&rir).unwrap();
        assert!((est - sab).abs() / sab < 0.10, "sabine {sab} schroeder {est} drr {}", rir.drr_true);
    }
}

#[test]
fn near_source_is_direct_dominated() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = RoomSpec { dims: [6.0, 5.0, 3.0], mean_absorption: 0.3, distance: 0.05 };
    let rir = synth_rir(&spec, &mut rng).unwrap();
    assert!(drr(&rir) > 10.0);
}

#[test]
fn drr_decreases_with_distance() {
    let room = Room { dims: [8.0, 6.0, 3.0], mean_absorption: 0.2 };
    let mut last = f64::INFINITY;
    for d in [0.5, 1.0, 2.0, 4.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = synth_rir(&room.with_distance(d), &mut rng).unwrap();
        assert!(r.drr_true < last);
        last = r.drr_true;
    }
}

#[test]
fn seeded_rirs_are_identical() {
    let spec = RoomSpec { dims: [7.0, 5.0, 3.0], mean_absorption: 0.25, distance: 2.0 };
    let a = synth_rir(&spec, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = synth_rir(&spec, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(a, b);
}

fn silent_gaps(samples: &[f32], min_len: usize) -> usize {
    let block = 80;
    let mut gaps = 0;
    let mut run = 0;
    for c in samples.chunks(block) {
        let rms = (c.iter().map(|v| v * v).sum::<f32>() / c.len() as f32).sqrt();
        if rms < 1e-3 {
            run += c.len();
        } else {
            if run >= min_len {
                gaps += 1;
            }
            run = 0;
        }
    }
    gaps + (run >= min_len) as usize
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sources_have_gaps_and_bounded_peak(seed in 0u64..10_000) {
        let s = synth_source(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(s.len(), 40_960);
        prop_assert!(s.peak() <= 1.0);
        prop_assert!(silent_gaps(&s.samples, 800) >= 2);
    }

    #[test]
    fn sampled_rooms_are_valid(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let room = sample_room(&mut rng, RT60_RANGE);
        let spec = room.with_distance(sample_distance(&mut rng, &room));
        prop_assert!(spec.validate().is_ok());
        let rt = sabine_rt60(&spec).unwrap();
        prop_assert!((0.1..=1.5).contains(&rt));
    }
}

#[test]
fn small_dataset_build() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig { train: 12, val: 4, test: 6, paired: 4, samples_per_room: 3, seed: 3 };
    let m = build_dataset(&cfg, dir.path()).unwrap();
    assert_eq!(m.split(Split::Train).len(), 12);
    assert_eq!(m.split(Split::Val).len(), 4);
    assert_eq!(m.split(Split::Test).len(), 6);
    m.check_room_disjoint().unwrap();
    let train = m.room_ids(Split::Train);
    assert!(m.room_ids(Split::Test).is_disjoint(&train));

    let store = AudioStore::new(DatasetManifest::load(dir.path()).unwrap());
    for e in &store.manifest().entries {
        let a = store.audio(e).unwrap();
        assert!(a.peak() <= 1.0);
        let r = store.rir(e).unwrap();
        let est = schroeder_rt60(&r).unwrap();
        assert!((est - e.rt60_true).abs() / e.rt60_true < 0.10, "{} {} {}", e.id, est, e.rt60_true);
    }
    assert_eq!(DatasetManifest::load(dir.path()).unwrap(), m);

    let dir2 = tempfile::tempdir().unwrap();
    let m2 = build_dataset(&cfg, dir2.path()).unwrap();
    assert_eq!(m.entries, m2.entries);
    for e in &m.entries {
        let a = read_wav(m.path(&e.wav)).unwrap();
        let b = read_wav(m2.path(&e.wav)).unwrap();
        assert_eq!(a, b);
    }

    store.enter_phase("stage2", true);
    let e = &store.manifest().entries[0];
    assert!(store.audio(e).is_ok());
    assert!(matches!(store.source(e), Err(vam::Error::Contract(_))));
    assert_eq!(store.privileged_reads_in("stage2").len(), 1);
    assert_eq!(SAMPLE_RATE, 16_000);
}
