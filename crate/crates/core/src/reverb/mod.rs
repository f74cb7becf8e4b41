//! Conditional reverberators and the dereverberator that shares their trunk.

mod derev;
mod model;
mod trunk;

pub use derev::{DerevConfig, Dereverberator};
pub use model::{ReverbConfig, ReverbKind, ReverbLoss, ReverbModel, RirParams, RT_MIN, RT_SPAN};
pub use trunk::{Fusion, Modulation, Trunk, TrunkConfig};
