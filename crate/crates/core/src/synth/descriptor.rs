use rand::Rng;
use serde::{Deserialize, Serialize};

use super::room::RoomSpec;
use crate::error::{Error, Result};

pub const DESCRIPTOR_DIM: usize = 8;
/// Relative noise on each informative descriptor entry.
pub const DESCRIPTOR_NOISE: f64 = 0.1;

/// Fixed-length stand-in for the target scene observation.
///
/// Entries 0..6 are log-encoded noisy copies of `Lx, Ly, Lz, mean absorption,
/// distance, surface area`, each relative to a typical value; entries 6..8
/// are independent standard normal nuisance values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor(pub Vec<f32>);

impl SceneDescriptor {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(Error::Shape(format!(
                "descriptor has {} values, expected {DESCRIPTOR_DIM}",
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

const REFERENCE: [f64; 6] = [6.0, 6.0, 3.0, 0.15, 2.0, 200.0];

pub fn encode_descriptor<R: Rng + ?Sized>(spec: &RoomSpec, rng: &mut R) -> SceneDescriptor {
    let truth = [
        spec.dims[0],
        spec.dims[1],
        spec.dims[2],
        spec.mean_absorption,
        spec.distance,
        spec.surface(),
    ];
    let eps: Vec<f64> = vam_nn::init::normal(rng, DESCRIPTOR_DIM, 1.0);
    let mut v = Vec::with_capacity(DESCRIPTOR_DIM);
    for i in 0..6 {
        let factor = (1.0 + DESCRIPTOR_NOISE * eps[i]).max(0.5);
        v.push((truth[i] * factor / REFERENCE[i]).ln() as f32);
    }
    v.push(eps[6] as f32);
    v.push(eps[7] as f32);
    SceneDescriptor(v)
}
