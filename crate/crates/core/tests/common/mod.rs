#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use vam::debias::{DiscriminatorConfig, GeneratorConfig};
use vam::reverb::{ReverbConfig, TrunkConfig};
use vam::synth::{build_dataset, AudioStore, DatasetConfig, DatasetManifest};
use vam::train::{save_checkpoint, RunState, TrainConfig, Trainer};

fn tiny_trunk() -> TrunkConfig {
    TrunkConfig {
        channels: 6,
        blocks: 2,
        dilations: vec![1, 2],
        ..Default::default()
    }
}

/// Networks and budgets small enough for a full three-stage run in seconds.
pub fn tiny_config() -> TrainConfig {
    let mut c = TrainConfig::desk();
    c.prereq.estimator_clips = 12;
    c.prereq.estimator.epochs = 1;
    c.prereq.estimator.batch_size = 6;
    c.prereq.derev_pairs = 4;
    c.prereq.derev.epochs = 1;
    c.prereq.derev.trunk = tiny_trunk();
    c.generator = GeneratorConfig {
        hidden: 6,
        layers: 1,
        fc_hidden: 8,
        ..Default::default()
    };
    c.discriminator = DiscriminatorConfig {
        conv_layers: 2,
        channels: 3,
        kernel: 3,
        fc: vec![4],
        ..Default::default()
    };
    c.reverb = ReverbConfig {
        trunk: tiny_trunk(),
        fusion_hidden: 4,
        head_hidden: 4,
        ..Default::default()
    };
    for g in [&mut c.stage1, &mut c.stage3.gan] {
        g.epochs = 2;
        g.samples_per_epoch = 4;
        g.batch_size = 2;
    }
    c.stage3.gan.epochs = 4;
    c.stage3.copy_period = 2;
    c.stage2.epochs = 2;
    c.stage2.samples_per_epoch = 4;
    c.stage2.batch_size = 2;
    c.probe_size = 2;
    c.replay_push_rate = 1.0;
    // Tiny untrained critics sit far from the metric; the guard has its own test.
    c.divergence_patience = 1000;
    c
}

pub fn tiny_dataset(root: &Path) -> DatasetManifest {
    let cfg = DatasetConfig {
        train: 8,
        val: 2,
        test: 6,
        paired: 4,
        samples_per_room: 2,
        seed: 3,
    };
    build_dataset(&cfg, root).expect("tiny dataset")
}

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    /// Checkpoint with the RT60 estimator and dereverberator trained.
    pub prereq: PathBuf,
}

/// Dataset plus trained prerequisites, built once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("data");
        let manifest = tiny_dataset(&root);
        let store = AudioStore::new(manifest);
        let cfg = tiny_config();
        let mut t = Trainer::new(cfg.clone(), &store, RunState::new(&cfg)).unwrap();
        t.prepare().unwrap();
        let prereq = dir.path().join("prereq.safetensors");
        save_checkpoint(&t.state, &cfg, &prereq).unwrap();
        Fixture { _dir: dir, root, prereq }
    })
}

pub fn store() -> AudioStore {
    AudioStore::new(DatasetManifest::load(&fixture().root).unwrap())
}
