use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vam_nn::{Adam, Parameterized, Real};

use super::config::TrainConfig;
use crate::debias::{Discriminator, Generator, ReplayBuffer};
use crate::error::{Error, Result};
use crate::metrics::Rt60Estimator;
use crate::reverb::{Dereverberator, ReverbModel};
use crate::rng::{rng_for, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Pre-train the de-biaser against SRMR.
    One,
    /// Pre-train both reverberators on de-biased audio.
    Two,
    /// Joint fine-tuning with the combined metric and target networks.
    Three,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::One, Stage::Two, Stage::Three];

    pub fn number(self) -> u8 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
            Stage::Three => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|s| s.number() == n)
            .ok_or_else(|| Error::Config(format!("unknown stage {n}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::One => "stage1",
            Stage::Two => "stage2",
            Stage::Three => "stage3",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One row of the training log. Fields that do not apply to a stage are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub d_loss: Option<f64>,
    pub g_loss: Option<f64>,
    pub visual_loss: Option<f64>,
    pub blind_loss: Option<f64>,
    /// Mean metric score of generated audio during the discriminator epoch.
    pub mean_metric: Option<f64>,
    /// Mean `|D - M|` on the validation probe.
    pub probe_gap: Option<f64>,
    pub buffer: usize,
    pub metric_calls: usize,
    /// Target weights were copied into the metric networks after this epoch.
    pub copied: bool,
}

impl EpochRecord {
    pub fn new(stage: Stage, epoch: usize) -> Self {
        Self {
            stage: stage.number(),
            epoch,
            d_loss: None,
            g_loss: None,
            visual_loss: None,
            blind_loss: None,
            mean_metric: None,
            probe_gap: None,
            buffer: 0,
            metric_calls: 0,
            copied: false,
        }
    }
}

/// Target reverberators trained during stage 3.
#[derive(Clone, Debug)]
pub struct Targets {
    pub visual: ReverbModel,
    pub blind: ReverbModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub generator: Adam,
    pub discriminator: Adam,
    /// Updates `visual` in stage 2 and the visual target in stage 3.
    pub visual: Adam,
    pub blind: Adam,
}

impl Optimizers {
    pub fn new(lr_g: f64, lr_d: f64, lr_reverb: f64) -> Self {
        Self {
            generator: Adam::new(lr_g),
            discriminator: Adam::new(lr_d),
            visual: Adam::new(lr_reverb),
            blind: Adam::new(lr_reverb),
        }
    }

    pub fn for_stage(cfg: &TrainConfig, stage: Stage) -> Self {
        match stage {
            Stage::One => Self::new(cfg.stage1.lr_g, cfg.stage1.lr_d, cfg.stage2.lr),
            Stage::Two => Self::new(cfg.stage1.lr_g, cfg.stage1.lr_d, cfg.stage2.lr),
            Stage::Three => Self::new(cfg.stage3.gan.lr_g, cfg.stage3.gan.lr_d, cfg.stage3.lr_reverb),
        }
    }
}

/// Everything needed to continue training: all parameter sets, optimizer
/// moments, the replay buffer and the progress markers.
#[derive(Clone, Debug)]
pub struct RunState {
    pub estimator: Rt60Estimator,
    pub derev: Dereverberator,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub visual: ReverbModel,
    pub blind: ReverbModel,
    /// Present only while stage 3 is in progress.
    pub targets: Option<Targets>,
    pub replay: ReplayBuffer,
    pub optim: Optimizers,
    /// Last fully completed stage.
    pub completed: Option<Stage>,
    /// Stage in progress and the number of its epochs already run.
    pub active: Option<(Stage, usize)>,
    /// Consecutive epochs whose probe gap exceeded the divergence threshold.
    pub diverged_epochs: usize,
    pub history: Vec<EpochRecord>,
}

impl RunState {
    /// Freshly initialised networks, seeded from `cfg.seed`.
    pub fn new(cfg: &TrainConfig) -> Self {
        let init = |name: &str| rng_for(cfg.seed, &[tag("init"), tag(name)]);
        Self {
            estimator: Rt60Estimator::new(&mut init("estimator")),
            derev: Dereverberator::new(cfg.prereq.derev.clone(), &mut init("derev")),
            generator: Generator::new(cfg.generator.clone(), &mut init("generator")),
            discriminator: Discriminator::new(cfg.discriminator.clone(), &mut init("discriminator")),
            visual: ReverbModel::visual(cfg.reverb.clone(), &mut init("visual")),
            blind: ReverbModel::blind(cfg.reverb.clone(), &mut init("blind")),
            targets: None,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            optim: Optimizers::for_stage(cfg, Stage::One),
            completed: None,
            active: None,
            diverged_epochs: 0,
            history: Vec::new(),
        }
    }

    pub fn has_completed(&self, stage: Stage) -> bool {
        self.completed.is_some_and(|c| c >= stage)
    }

    /// SHA-256 of every parameter set, keyed by network name.
    pub fn fingerprints(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("estimator".into(), fingerprint(&self.estimator));
        out.insert("derev".into(), fingerprint(&self.derev));
        out.insert("generator".into(), fingerprint(&self.generator));
        out.insert("discriminator".into(), fingerprint(&self.discriminator));
        out.insert("visual".into(), fingerprint(&self.visual));
        out.insert("blind".into(), fingerprint(&self.blind));
        if let Some(t) = &self.targets {
            out.insert("visual_target".into(), fingerprint(&t.visual));
            out.insert("blind_target".into(), fingerprint(&t.blind));
        }
        out
    }
}

/// Hex SHA-256 over parameter names and the bit patterns of their values.
pub fn fingerprint<T: Real, M: Parameterized<T>>(model: &M) -> String {
    let mut h = Sha256::new();
    for (name, p) in model.named_params() {
        h.update(name.as_bytes());
        h.update((p.value.len() as u64).to_le_bytes());
        for v in &p.value {
            h.update(v.as_f64().to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
