use serde::{Deserialize, Serialize};

use crate::debias::{DiscriminatorConfig, GeneratorConfig, ResidueMetricConfig, REPLAY_CAPACITY, REPLAY_PUSH_RATE};
use crate::error::{Error, Result};
use crate::metrics::EstimatorTrainConfig;
use crate::reverb::{DerevConfig, ReverbConfig};

/// Prerequisite models trained before stage 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrereqConfig {
    /// Synthetic labelled clips for the RT60 estimator.
    pub estimator_clips: usize,
    pub estimator: EstimatorTrainConfig,
    /// Upper bound on dereverberator training pairs drawn from the paired split.
    pub derev_pairs: usize,
    pub derev: DerevConfig,
}

impl Default for PrereqConfig {
    fn default() -> Self {
        Self {
            estimator_clips: 2000,
            estimator: EstimatorTrainConfig::default(),
            derev_pairs: 400,
            derev: DerevConfig::default(),
        }
    }
}

/// GAN stage hyperparameters (stage 1, and the G/D part of stage 3).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanStageConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
}

impl GanStageConfig {
    fn stage1() -> Self {
        Self {
            epochs: 20,
            samples_per_epoch: 10_000,
            batch_size: 32,
            lr_g: 2e-6,
            lr_d: 5e-4,
        }
    }

    fn stage3() -> Self {
        Self {
            epochs: 24,
            batch_size: 2,
            ..Self::stage1()
        }
    }
}

impl Default for GanStageConfig {
    fn default() -> Self {
        Self::stage1()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReverbStageConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for ReverbStageConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            samples_per_epoch: 10_000,
            batch_size: 4,
            lr: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointStageConfig {
    pub gan: GanStageConfig,
    /// Learning rate of the target reverberators.
    pub lr_reverb: f64,
    /// Target weights are copied into the metric networks every this many epochs.
    pub copy_period: usize,
    pub metric: ResidueMetricConfig,
}

impl Default for JointStageConfig {
    fn default() -> Self {
        Self {
            gan: GanStageConfig::stage3(),
            lr_reverb: 1e-6,
            copy_period: 8,
            metric: ResidueMetricConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub prereq: PrereqConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub reverb: ReverbConfig,
    pub stage1: GanStageConfig,
    pub stage2: ReverbStageConfig,
    pub stage3: JointStageConfig,
    pub replay_capacity: usize,
    pub replay_push_rate: f64,
    /// Global gradient-norm bound applied to every update.
    pub grad_clip: f64,
    /// Held-out clips used for per-epoch diagnostics and the divergence guard.
    pub probe_size: usize,
    /// Mean `|D - M|` on the probe above which an epoch counts as diverged.
    pub divergence_threshold: f64,
    /// Consecutive diverged epochs that abort training.
    pub divergence_patience: usize,
    /// Clips whose preprocessed audio is kept in memory.
    pub cache_limit: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            prereq: PrereqConfig::default(),
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            reverb: ReverbConfig::default(),
            stage1: GanStageConfig::stage1(),
            stage2: ReverbStageConfig::default(),
            stage3: JointStageConfig::default(),
            replay_capacity: REPLAY_CAPACITY,
            replay_push_rate: REPLAY_PUSH_RATE,
            grad_clip: 5.0,
            probe_size: 16,
            divergence_threshold: 0.5,
            divergence_patience: 3,
            cache_limit: 2500,
        }
    }
}

impl TrainConfig {
    /// Budget for a single CPU: fewer samples per epoch and learning rates
    /// raised to make progress within that budget.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.stage1 = GanStageConfig {
            epochs: 12,
            samples_per_epoch: 64,
            batch_size: 8,
            lr_g: 2e-5,
            lr_d: 2e-3,
        };
        c.stage2 = ReverbStageConfig {
            epochs: 12,
            samples_per_epoch: 400,
            batch_size: 8,
            lr: 1e-3,
        };
        c.stage3 = JointStageConfig {
            gan: GanStageConfig {
                epochs: 24,
                samples_per_epoch: 32,
                batch_size: 2,
                lr_g: 2e-5,
                lr_d: 5e-4,
            },
            lr_reverb: 1e-5,
            ..Default::default()
        };
        c
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stage1.samples_per_epoch", self.stage1.samples_per_epoch),
            ("stage1.batch_size", self.stage1.batch_size),
            ("stage2.samples_per_epoch", self.stage2.samples_per_epoch),
            ("stage2.batch_size", self.stage2.batch_size),
            ("stage3.gan.samples_per_epoch", self.stage3.gan.samples_per_epoch),
            ("stage3.gan.batch_size", self.stage3.gan.batch_size),
            ("stage3.copy_period", self.stage3.copy_period),
            ("replay_capacity", self.replay_capacity),
            ("prereq.estimator_clips", self.prereq.estimator_clips),
            ("prereq.derev_pairs", self.prereq.derev_pairs),
            ("divergence_patience", self.divergence_patience),
        ];
        // Epoch counts may be zero: the stage then leaves its models untouched.
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let rates = [
            ("stage1.lr_g", self.stage1.lr_g),
            ("stage1.lr_d", self.stage1.lr_d),
            ("stage2.lr", self.stage2.lr),
            ("stage3.gan.lr_g", self.stage3.gan.lr_g),
            ("stage3.gan.lr_d", self.stage3.gan.lr_d),
            ("stage3.lr_reverb", self.stage3.lr_reverb),
            ("grad_clip", self.grad_clip),
            ("divergence_threshold", self.divergence_threshold),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.replay_push_rate) {
            return Err(Error::Config("replay_push_rate must lie in [0, 1]".into()));
        }
        self.stage3.metric.validate()
    }
}
