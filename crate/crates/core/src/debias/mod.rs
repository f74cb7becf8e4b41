//! De-biasing GAN: mask generator, metric-surrogate discriminator, replay
//! buffer and the acoustic residue metric.

mod discriminator;
mod generator;
mod loss;
mod replay;
mod residue;

pub use discriminator::{DiscCache, Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorCache, GeneratorConfig};
pub use loss::{disc_loss, disc_loss_backward, gen_loss, gen_loss_grad, DiscTerms, Scored};
pub use replay::{ReplayBuffer, ReplayEntry, REPLAY_CAPACITY, REPLAY_PUSH_RATE};
pub use residue::{combine, residue_score, MetricNetworks, ResidueMetricConfig};
