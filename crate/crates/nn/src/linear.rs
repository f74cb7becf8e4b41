use rand::Rng;

use crate::gemm::gemm;
use crate::init::uniform;
use crate::param::{Param, Parameterized};
use crate::Real;

/// Affine map `y = x W^T + b` over rows of `x`.
#[derive(Clone, Debug)]
pub struct Linear<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_dim: usize,
    out_dim: usize,
}

impl<T: Real> Linear<T> {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: Param::from_vec(&[out_dim, in_dim], uniform(rng, out_dim * in_dim, bound)),
            bias: Param::from_vec(&[out_dim], uniform(rng, out_dim, bound)),
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `x` is `rows x in_dim`; returns `rows x out_dim`.
    pub fn forward(&self, x: &[T], rows: usize) -> Vec<T> {
        debug_assert_eq!(x.len(), rows * self.in_dim);
        let mut y = Vec::with_capacity(rows * self.out_dim);
        for _ in 0..rows {
            y.extend_from_slice(&self.bias.value);
        }
        gemm(
            false,
            true,
            rows,
            self.out_dim,
            self.in_dim,
            T::one(),
            x,
            &self.weight.value,
            T::one(),
            &mut y,
        );
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T], rows: usize) -> Vec<T> {
        self.accumulate_grads(x, dy, rows);
        self.backward_input(dy, rows)
    }

    pub fn accumulate_grads(&mut self, x: &[T], dy: &[T], rows: usize) {
        debug_assert_eq!(dy.len(), rows * self.out_dim);
        gemm(
            true,
            false,
            self.out_dim,
            self.in_dim,
            rows,
            T::one(),
            dy,
            x,
            T::one(),
            &mut self.weight.grad,
        );
        for r in 0..rows {
            for (g, &d) in self
                .bias
                .grad
                .iter_mut()
                .zip(&dy[r * self.out_dim..(r + 1) * self.out_dim])
            {
                *g += d;
            }
        }
    }

    /// `dL/dx` without touching parameter gradients.
    pub fn backward_input(&self, dy: &[T], rows: usize) -> Vec<T> {
        let mut dx = vec![T::zero(); rows * self.in_dim];
        gemm(
            false,
            false,
            rows,
            self.in_dim,
            self.out_dim,
            T::one(),
            dy,
            &self.weight.value,
            T::zero(),
            &mut dx,
        );
        dx
    }
}

impl<T: Real> Parameterized<T> for Linear<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
