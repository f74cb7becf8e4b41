use rand::Rng;

use crate::Real;

/// `n` values drawn uniformly from `[-bound, bound)`.
pub fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, bound: f64) -> Vec<T> {
    (0..n)
        .map(|_| T::of(rng.random_range(-bound..bound)))
        .collect()
}

/// `n` standard normal values scaled by `std` (Box-Muller).
pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Vec<T> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = std::f64::consts::TAU * u2;
        out.push(T::of(std * r * th.cos()));
        if out.len() < n {
            out.push(T::of(std * r * th.sin()));
        }
    }
    out
}
