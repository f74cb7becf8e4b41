//! Elementwise activations with their derivatives.

use crate::Real;

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::of(20.0) {
        x
    } else if x < T::of(-20.0) {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn leaky_relu<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * slope
    }
}

#[inline]
pub fn leaky_relu_grad<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        slope
    }
}

pub fn leaky_relu_inplace<T: Real>(xs: &mut [T], slope: T) {
    for x in xs {
        *x = leaky_relu(*x, slope);
    }
}

/// `dy *= f'(pre)` for a leaky rectifier evaluated at `pre`.
pub fn leaky_relu_backward<T: Real>(pre: &[T], dy: &mut [T], slope: T) {
    for (g, &x) in dy.iter_mut().zip(pre) {
        *g *= leaky_relu_grad(x, slope);
    }
}
