mod common;

use std::cell::RefCell;
use std::collections::BTreeMap;

use common::{fixture, store, tiny_config};
use vam::train::*;
use vam::Error;

fn prereq_state() -> RunState {
    load_checkpoint(&fixture().prereq).unwrap().0
}

fn changed(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Vec<String> {
    let mut out: Vec<String> = a.iter().filter(|(k, v)| b.get(*k) != Some(v)).map(|(k, _)| k.clone()).collect();
    out.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    out.sort();
    out
}

#[test]
fn stages_require_their_predecessors() {
    let store = store();
    let cfg = tiny_config();
    let mut fresh = Trainer::new(cfg.clone(), &store, RunState::new(&cfg)).unwrap();
    assert!(matches!(fresh.run_stage(Stage::One), Err(Error::StagedDependency(_))));

    let mut t = Trainer::new(cfg.clone(), &store, prereq_state()).unwrap();
    assert!(matches!(t.run_stage(Stage::Two), Err(Error::StagedDependency(_))));
    assert!(matches!(t.run_stage(Stage::Three), Err(Error::StagedDependency(_))));
}

#[test]
fn zero_epochs_leave_the_generator_untouched() {
    let store = store();
    let mut cfg = tiny_config();
    cfg.stage1.epochs = 0;
    let mut t = Trainer::new(cfg, &store, prereq_state()).unwrap();
    let before = t.state.fingerprints();
    t.run_stage(Stage::One).unwrap();
    assert_eq!(t.state.fingerprints(), before);
    assert_eq!(t.state.completed, Some(Stage::One));
    assert!(t.state.history.is_empty());
}

#[test]
fn full_run_respects_freeze_and_copy_contracts() {
    let store = store();
    let cfg = tiny_config();
    let events = RefCell::new(Vec::new());
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("train.csv");
    let mut t = Trainer::new(cfg.clone(), &store, prereq_state())
        .unwrap()
        .with_log(&log)
        .with_observer(|stage, n, phase, s| {
            let replay: Vec<(f64, usize)> = s.replay.iter().map(|e| (e.score, e.epoch)).collect();
            events.borrow_mut().push((stage, n, phase, s.fingerprints(), replay));
        });
    let start = t.state.fingerprints();
    t.run_all().unwrap();
    assert_eq!(t.state.completed, Some(Stage::Three));
    assert!(t.state.targets.is_none());
    drop(t);

    let events = events.into_inner();
    let mut prev = start;
    let mut last_copy: Option<BTreeMap<String, String>> = None;
    for (stage, n, phase, fp, _) in &events {
        let diff = changed(&prev, fp);
        let allowed: &[&str] = match (stage, phase) {
            (Stage::One, Phase::Discriminator) => &["discriminator"],
            (Stage::One | Stage::Three, Phase::Generator) => &["generator"],
            (Stage::Two, Phase::Reverberators) => &["visual", "blind"],
            // The targets appear at stage start and train every batch.
            (Stage::Three, Phase::Discriminator) => &["discriminator", "visual_target", "blind_target"],
            (Stage::Three, Phase::TargetCopy) => &["visual", "blind"],
            other => panic!("unexpected phase {other:?}"),
        };
        for name in &diff {
            assert!(allowed.contains(&name.as_str()), "{stage} epoch {n} {phase:?} changed {name}");
        }
        if *phase == Phase::Discriminator {
            assert!(diff.contains(&"discriminator".to_string()), "{stage} epoch {n}: D did not train");
        }
        if *stage == Stage::Three {
            match phase {
                Phase::TargetCopy => {
                    assert_eq!(n % cfg.stage3.copy_period, 0);
                    assert_eq!(fp["visual"], fp["visual_target"]);
                    assert_eq!(fp["blind"], fp["blind_target"]);
                    last_copy = Some(fp.clone());
                }
                _ => {
                    // Between copies the metric networks stay as last copied.
                    if let Some(c) = &last_copy {
                        assert_eq!(fp["visual"], c["visual"]);
                        assert_eq!(fp["blind"], c["blind"]);
                    }
                    if *phase == Phase::Discriminator {
                        assert_ne!(fp["visual"], fp["visual_target"], "targets should move between copies");
                    }
                }
            }
        }
        prev = fp.clone();
    }
    let copies = events.iter().filter(|e| e.2 == Phase::TargetCopy).count();
    assert_eq!(copies, cfg.stage3.gan.epochs / cfg.stage3.copy_period);

    // Replay entries keep their scores across metric-network updates.
    let stage3: Vec<_> = events.iter().filter(|e| e.0 == Stage::Three).collect();
    for w in stage3.windows(2) {
        let (a, b) = (&w[0].4, &w[1].4);
        // Capacity exceeds the pushes of this run, so entries only append.
        assert!(b.len() >= a.len() && b[..a.len()] == a[..]);
    }
    assert!(stage3.last().unwrap().4.len() > 0);

    // The self-supervised stages never touched sources or impulse responses.
    assert!(store.privileged_reads_in("stage2").is_empty());
    assert!(store.privileged_reads_in("stage3").is_empty());
    assert!(store.access_log().iter().any(|r| r.phase == "stage3"));

    let mut r = csv::Reader::from_path(&log).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), LOG_HEADER);
    let rows = r.records().count();
    assert_eq!(rows, cfg.stage1.epochs + cfg.stage2.epochs + cfg.stage3.gan.epochs);
}

#[test]
fn metric_is_consulted_once_per_clip() {
    let store = store();
    let cfg = tiny_config();
    let mut t = Trainer::new(cfg.clone(), &store, prereq_state()).unwrap();
    t.run_all().unwrap();
    for rec in &t.state.history {
        let expected = match rec.stage {
            1 => 2 * cfg.stage1.samples_per_epoch,
            2 => 0,
            _ => 2 * cfg.stage3.gan.samples_per_epoch,
        };
        assert_eq!(rec.metric_calls, expected, "{rec:?}");
    }
}

#[test]
fn checkpoint_round_trip_and_resume() {
    let store = store();
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.safetensors");

    let mut a = Trainer::new(cfg.clone(), &store, prereq_state()).unwrap();
    a.run_epochs(Stage::One, 1).unwrap();
    save_checkpoint(&a.state, &cfg, &path).unwrap();
    let (loaded, loaded_cfg) = load_checkpoint(&path).unwrap();
    assert_eq!(loaded_cfg, cfg);
    assert_eq!(loaded.fingerprints(), a.state.fingerprints());
    assert_eq!(loaded.active, Some((Stage::One, 1)));
    assert_eq!(loaded.history, a.state.history);
    let scores = |s: &RunState| s.replay.iter().map(|e| (e.score, e.audio.clone())).collect::<Vec<_>>();
    assert_eq!(scores(&loaded), scores(&a.state));

    a.run_epochs(Stage::One, 2).unwrap();
    let mut b = Trainer::new(loaded_cfg, &store, loaded).unwrap();
    b.run_epochs(Stage::One, 2).unwrap();
    let (ra, rb) = (a.state.history.last().unwrap(), b.state.history.last().unwrap());
    for (x, y) in [(ra.d_loss, rb.d_loss), (ra.g_loss, rb.g_loss), (ra.mean_metric, rb.mean_metric)] {
        let (x, y) = (x.unwrap(), y.unwrap());
        assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-12), "{x} vs {y}");
    }
    assert_eq!(a.state.fingerprints(), b.state.fingerprints());
}

#[test]
fn version_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.safetensors");
    let cfg = tiny_config();
    save_checkpoint(&prereq_state(), &cfg, &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let at = bytes.windows(7).position(|w| w == b"version").unwrap();
    let digit = at + bytes[at..].iter().position(|b| b.is_ascii_digit()).unwrap();
    bytes[digit] = b'9';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Version { .. })));
}

#[test]
fn stage1_checkpoint_cannot_enter_stage3() {
    let store = store();
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1.safetensors");
    let mut t = Trainer::new(cfg.clone(), &store, prereq_state()).unwrap();
    t.run_stage(Stage::One).unwrap();
    save_checkpoint(&t.state, &cfg, &path).unwrap();
    let (s, c) = load_checkpoint(&path).unwrap();
    let mut t = Trainer::new(c, &store, s).unwrap();
    assert!(matches!(t.run_stage(Stage::Three), Err(Error::StagedDependency(_))));
}

#[test]
fn shortcut_generator_replaces_stage1() {
    let store = store();
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1.safetensors");
    let mut a = Trainer::new(cfg.clone(), &store, prereq_state()).unwrap();
    assert!(matches!(
        a.shortcut_generator(&fixture().prereq),
        Err(Error::StagedDependency(_))
    ));
    a.run_stage(Stage::One).unwrap();
    save_checkpoint(&a.state, &cfg, &path).unwrap();

    let mut b = Trainer::new(cfg, &store, prereq_state()).unwrap();
    b.shortcut_generator(&path).unwrap();
    assert_eq!(fingerprint(&b.state.generator), fingerprint(&a.state.generator));
    b.run_stage(Stage::Two).unwrap();
    assert!(b.state.visual.is_trained() && b.state.blind.is_trained());
}

#[test]
fn divergence_guard_halts_after_patience() {
    let store = store();
    let mut cfg = tiny_config();
    cfg.stage1.epochs = 6;
    cfg.divergence_threshold = 1e-12;
    cfg.divergence_patience = 3;
    let mut t = Trainer::new(cfg, &store, prereq_state()).unwrap();
    assert!(matches!(t.run_stage(Stage::One), Err(Error::Divergence(_))));
    assert_eq!(t.state.history.len(), 3);
    assert_eq!(t.state.completed, None);
}

#[test]
fn same_seed_same_history() {
    let store = store();
    let cfg = tiny_config();
    let run = || {
        let mut t = Trainer::new(cfg.clone(), &store, prereq_state()).unwrap();
        t.run_stage(Stage::One).unwrap();
        t.run_stage(Stage::Two).unwrap();
        (t.state.history.clone(), t.state.fingerprints())
    };
    assert_eq!(run(), run());
}
