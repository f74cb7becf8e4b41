use std::cell::Cell;

use serde::{Deserialize, Serialize};
use vam_nn::sigmoid;

use crate::error::{Error, Result};
use crate::metrics::{srmr_norm, Rt60Estimator};
use crate::reverb::ReverbModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidueMetricConfig {
    /// Weight of the SRMR term in the combined metric.
    pub alpha: f64,
    /// Lower bound of the normalising RT60, seconds.
    pub rt60_floor: f64,
}

impl Default for ResidueMetricConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            rt60_floor: 0.1,
        }
    }
}

impl ResidueMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} is outside [0, 1]", self.alpha)));
        }
        if self.rt60_floor <= 0.0 {
            return Err(Error::Config("rt60_floor must be positive".into()));
        }
        Ok(())
    }
}

/// `sigmoid((|rt_blind - rt_target| - |rt_visual - rt_target|) / max(floor, rt_target))`.
pub fn residue_score(rt_blind: f64, rt_visual: f64, rt_target: f64, floor: f64) -> f64 {
    let gap = (rt_blind - rt_target).abs() - (rt_visual - rt_target).abs();
    sigmoid(gap / floor.max(rt_target))
}

/// `alpha * srmr + (1 - alpha) * residue`.
pub fn combine(alpha: f64, srmr_norm: f64, residue: f64) -> f64 {
    alpha * srmr_norm + (1.0 - alpha) * residue
}

/// The frozen networks behind the residue metric. Counts evaluations so
/// callers can verify when the metric was (not) consulted.
pub struct MetricNetworks<'a> {
    visual: &'a ReverbModel,
    blind: &'a ReverbModel,
    estimator: &'a Rt60Estimator,
    cfg: ResidueMetricConfig,
    calls: Cell<usize>,
}

impl<'a> MetricNetworks<'a> {
    pub fn new(
        visual: &'a ReverbModel,
        blind: &'a ReverbModel,
        estimator: &'a Rt60Estimator,
        cfg: ResidueMetricConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if !visual.is_trained() || !blind.is_trained() {
            return Err(Error::Contract("residue metric needs trained reverberators".into()));
        }
        if !estimator.is_trained() {
            return Err(Error::Contract("residue metric needs a trained RT60 estimator".into()));
        }
        Ok(Self {
            visual,
            blind,
            estimator,
            cfg,
            calls: Cell::new(0),
        })
    }

    pub fn config(&self) -> ResidueMetricConfig {
        self.cfg
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    /// RT60 of the target audio, the reference of the residue metric.
    pub fn target_rt60(&self, target: &[f32]) -> Result<f64> {
        self.estimator.estimate_seconds(target)
    }

    /// Residue score of `a` under conditioner `v`, given `RT(A_t)`.
    pub fn residue(&self, a: &[f32], v: &[f32], rt_target: f64) -> Result<f64> {
        self.calls.set(self.calls.get() + 1);
        let rb = self.estimator.estimate_seconds(&self.blind.forward(a, None)?)?;
        let rv = self.estimator.estimate_seconds(&self.visual.forward(a, Some(v))?)?;
        Ok(residue_score(rb, rv, rt_target, self.cfg.rt60_floor))
    }

    /// Combined objective; skips whichever term has zero weight.
    pub fn combined(&self, a: &[f32], v: &[f32], rt_target: f64) -> Result<f64> {
        let alpha = self.cfg.alpha;
        let s = if alpha > 0.0 { srmr_norm(a)? } else { 0.0 };
        let r = if alpha < 1.0 { self.residue(a, v, rt_target)? } else { 0.0 };
        Ok(combine(alpha, s, r))
    }
}
