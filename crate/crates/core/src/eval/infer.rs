use std::cell::Cell;
use std::str::FromStr;

use crate::debias::Generator;
use crate::error::{Error, Result};
use crate::metrics::Rt60Estimator;
use crate::reverb::{Dereverberator, ReverbModel};
use crate::train::{RunState, Stage};

/// Whether a source clip was recorded dry or carries room acoustics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Anechoic,
    Reverberant,
}

/// Which output an evaluation scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// `R_v(G(derev(a)), v)`, the full system.
    Visual,
    /// `R_b(G(derev(a)))`: same pipeline without the conditioner.
    Blind,
    /// The de-biased input copied to the output.
    Input,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Visual, Variant::Blind, Variant::Input];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Visual => "visual",
            Variant::Blind => "blind",
            Variant::Input => "input",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (visual|blind|input)")))
    }
}

/// How often each network was run since the system was built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub dereverberator: usize,
    pub generator: usize,
    pub visual: usize,
    pub blind: usize,
}

/// Frozen inference pipeline over borrowed, trained networks.
pub struct System<'a> {
    derev: &'a Dereverberator,
    generator: &'a Generator,
    visual: &'a ReverbModel,
    blind: &'a ReverbModel,
    estimator: &'a Rt60Estimator,
    calls: Cell<CallCounts>,
}

impl<'a> System<'a> {
    pub fn new(
        derev: &'a Dereverberator,
        generator: &'a Generator,
        visual: &'a ReverbModel,
        blind: &'a ReverbModel,
        estimator: &'a Rt60Estimator,
    ) -> Self {
        Self {
            derev,
            generator,
            visual,
            blind,
            estimator,
            calls: Cell::new(CallCounts::default()),
        }
    }

    /// Requires the reverberators to have been trained (stage 2 or later).
    pub fn from_state(s: &'a RunState) -> Result<Self> {
        if !s.has_completed(Stage::Two) {
            return Err(Error::StagedDependency(format!(
                "inference needs a run through stage 2 (last completed: {})",
                s.completed.map_or("none".to_string(), |c| c.to_string())
            )));
        }
        Ok(Self::new(&s.derev, &s.generator, &s.visual, &s.blind, &s.estimator))
    }

    pub fn estimator(&self) -> &'a Rt60Estimator {
        self.estimator
    }

    pub fn calls(&self) -> CallCounts {
        self.calls.get()
    }

    fn bump(&self, f: impl FnOnce(&mut CallCounts)) {
        let mut c = self.calls.get();
        f(&mut c);
        self.calls.set(c);
    }

    /// Dry sources pass through untouched; reverberant ones go through the
    /// dereverberator and the de-biaser.
    pub fn debias(&self, audio: &[f32], kind: SourceKind) -> Result<Vec<f32>> {
        match kind {
            SourceKind::Anechoic => Ok(audio.to_vec()),
            SourceKind::Reverberant => {
                self.bump(|c| c.dereverberator += 1);
                let d = self.derev.dereverberate(audio)?;
                self.bump(|c| c.generator += 1);
                self.generator.forward(&d)
            }
        }
    }

    /// Acoustic matching of `audio` to the scene described by `descriptor`.
    pub fn infer(&self, audio: &[f32], kind: SourceKind, descriptor: &[f32]) -> Result<Vec<f32>> {
        self.run(Variant::Visual, audio, kind, descriptor)
    }

    pub fn run(&self, variant: Variant, audio: &[f32], kind: SourceKind, descriptor: &[f32]) -> Result<Vec<f32>> {
        let model = match variant {
            Variant::Visual => Some(self.visual),
            Variant::Blind => Some(self.blind),
            Variant::Input => None,
        };
        if let Some(m) = model {
            if !m.is_trained() {
                return Err(Error::StagedDependency(format!("{} reverberator has not been trained", variant.name())));
            }
        }
        let x = self.debias(audio, kind)?;
        match variant {
            Variant::Visual => {
                self.bump(|c| c.visual += 1);
                self.visual.forward(&x, Some(descriptor))
            }
            Variant::Blind => {
                self.bump(|c| c.blind += 1);
                self.blind.forward(&x, None)
            }
            Variant::Input => Ok(x),
        }
    }
}
