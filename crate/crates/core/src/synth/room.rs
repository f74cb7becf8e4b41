use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const ABSORPTION_RANGE: (f64, f64) = (0.02, 0.6);
pub const DIM_RANGE: (f64, f64) = (2.0, 20.0);
pub const RT60_RANGE: (f64, f64) = (0.1, 1.5);
pub const MIN_DISTANCE: f64 = 0.5;
pub const MAX_DISTANCE: f64 = 8.0;

/// Shoebox room with a mean absorption coefficient and one source-listener
/// distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    pub mean_absorption: f64,
    pub distance: f64,
}

impl RoomSpec {
    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn diagonal(&self) -> f64 {
        self.dims.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(DIM_RANGE.0..=DIM_RANGE.1).contains(&d)) {
            return Err(Error::Config(format!("room dimensions {:?} outside 2..20 m", self.dims)));
        }
        if !(ABSORPTION_RANGE.0..=ABSORPTION_RANGE.1).contains(&self.mean_absorption) {
            return Err(Error::Config(format!(
                "mean absorption {} outside [0.02, 0.6]",
                self.mean_absorption
            )));
        }
        if !(self.distance > 0.0 && self.distance < self.diagonal()) {
            return Err(Error::Config(format!(
                "distance {} m must be positive and below the room diagonal",
                self.distance
            )));
        }
        Ok(())
    }

    /// Critical distance `0.057 sqrt(V / T)` in metres.
    pub fn critical_distance(&self, rt60: f64) -> f64 {
        0.057 * (self.volume() / rt60).sqrt()
    }
}

/// Sabine reverberation time `0.161 V / (S a)`.
pub fn sabine_rt60(spec: &RoomSpec) -> Result<f64> {
    if spec.mean_absorption <= 0.0 {
        return Err(Error::Config("mean absorption must be positive".into()));
    }
    Ok(0.161 * spec.volume() / (spec.surface() * spec.mean_absorption))
}

/// Room geometry and absorption shared by every sample recorded in it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub dims: [f64; 3],
    pub mean_absorption: f64,
}

impl Room {
    pub fn with_distance(&self, distance: f64) -> RoomSpec {
        RoomSpec {
            dims: self.dims,
            mean_absorption: self.mean_absorption,
            distance,
        }
    }

    pub fn rt60(&self) -> f64 {
        0.161 * self.with_distance(1.0).volume() / (self.with_distance(1.0).surface() * self.mean_absorption)
    }

    pub fn max_distance(&self) -> f64 {
        (self.with_distance(1.0).diagonal() / 2.0).min(MAX_DISTANCE)
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp()
}

/// Draw a room whose Sabine RT60 is roughly uniform on `rt_range`: sample
/// the geometry and a target RT60, solve for the absorption, and reject
/// draws whose absorption falls outside the admissible range.
pub fn sample_room<R: Rng + ?Sized>(rng: &mut R, rt_range: (f64, f64)) -> Room {
    loop {
        let dims = [
            log_uniform(rng, 2.5, 16.0),
            log_uniform(rng, 2.5, 16.0),
            rng.random_range(2.2..5.0),
        ];
        let target = rng.random_range(rt_range.0..=rt_range.1);
        let probe = RoomSpec {
            dims,
            mean_absorption: 1.0,
            distance: 1.0,
        };
        let a = 0.161 * probe.volume() / (probe.surface() * target);
        if (ABSORPTION_RANGE.0..=ABSORPTION_RANGE.1).contains(&a) {
            return Room {
                dims,
                mean_absorption: a,
            };
        }
    }
}

pub fn sample_distance<R: Rng + ?Sized>(rng: &mut R, room: &Room) -> f64 {
    rng.random_range(MIN_DISTANCE..=room.max_distance().max(MIN_DISTANCE + 0.1))
}
