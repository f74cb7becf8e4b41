pub mod debias;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod reverb;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
