use vam_nn::Real;

use super::Discriminator;
use crate::error::Result;

/// The three squared-error terms of the discriminator objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscTerms {
    /// `(D(A) - M(A))^2` on the generator's input.
    pub real: f64,
    /// `(D(G(A)) - M(G(A)))^2`.
    pub generated: f64,
    /// `(D(A_hist) - s_hist)^2`; absent while the replay buffer is empty.
    pub replay: Option<f64>,
}

impl DiscTerms {
    pub fn total(&self) -> f64 {
        self.real + self.generated + self.replay.unwrap_or(0.0)
    }
}

/// One scored clip for the discriminator.
#[derive(Clone, Copy, Debug)]
pub struct Scored<'a, T> {
    pub audio: &'a [T],
    pub score: f64,
}

fn term<T: Real>(d: &mut Discriminator<T>, s: Scored<'_, T>, scale: T, grad: bool) -> Result<f64> {
    let (y, cache) = d.forward(s.audio)?;
    let err = y - T::of(s.score);
    if grad {
        d.backward(&cache, T::of(2.0) * err * scale, true, false);
    }
    Ok((err * err).as_f64())
}

/// Discriminator loss value. Scores must come from the current metric for
/// `real` and `generated`, and from storage for `replay`.
pub fn disc_loss<T: Real>(
    d: &Discriminator<T>,
    real: Scored<'_, T>,
    generated: Scored<'_, T>,
    replay: Option<Scored<'_, T>>,
) -> Result<DiscTerms> {
    let sq = |s: Scored<'_, T>| -> Result<f64> { Ok((d.score(s.audio)?.as_f64() - s.score).powi(2)) };
    Ok(DiscTerms {
        real: sq(real)?,
        generated: sq(generated)?,
        replay: replay.map(sq).transpose()?,
    })
}

/// As [`disc_loss`], also adding `scale * dL/dtheta` to D's gradients.
pub fn disc_loss_backward<T: Real>(
    d: &mut Discriminator<T>,
    real: Scored<'_, T>,
    generated: Scored<'_, T>,
    replay: Option<Scored<'_, T>>,
    scale: T,
) -> Result<DiscTerms> {
    Ok(DiscTerms {
        real: term(d, real, scale, true)?,
        generated: term(d, generated, scale, true)?,
        replay: replay.map(|r| term(d, r, scale, true)).transpose()?,
    })
}

/// `(D(G(A)) - 1)^2`.
pub fn gen_loss<T: Real>(d: &Discriminator<T>, g_out: &[T]) -> Result<f64> {
    Ok((d.score(g_out)?.as_f64() - 1.0).powi(2))
}

/// Generator loss and its gradient w.r.t. the generated waveform. D's
/// parameter gradients are left untouched.
pub fn gen_loss_grad<T: Real>(d: &mut Discriminator<T>, g_out: &[T]) -> Result<(f64, Vec<T>)> {
    let (y, cache) = d.forward(g_out)?;
    let err = y - T::one();
    let dx = d
        .backward(&cache, T::of(2.0) * err, false, true)
        .expect("input gradient requested");
    Ok(((err * err).as_f64(), dx))
}
