use crate::param::Parameterized;
use crate::Real;

/// Adam with bias correction. Moments are kept in `f64` so that checkpoints
/// are independent of the parameter precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Apply one update from the accumulated gradients. Gradients are left in
    /// place; callers zero them before the next backward pass.
    pub fn step<T: Real, M: Parameterized<T> + ?Sized>(&mut self, model: &mut M) {
        let params = model.params_mut();
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "optimizer state does not match model");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i].as_f64();
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let upd = self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
                p.value[i] -= T::of(upd);
            }
        }
    }
}

/// Rescale gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real, M: Parameterized<T> + ?Sized>(model: &mut M, max_norm: f64) -> f64 {
    let mut params = model.params_mut();
    let total: f64 = params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|g| g.as_f64() * g.as_f64())
        .sum::<f64>()
        .sqrt();
    if total.is_finite() && total > max_norm && total > 0.0 {
        let s = T::of(max_norm / total);
        for p in params.iter_mut() {
            for g in p.grad.iter_mut() {
                *g *= s;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::Param;

    struct Quad {
        p: Param<f64>,
    }

    impl Parameterized<f64> for Quad {
        fn named_params(&self) -> Vec<(String, &Param<f64>)> {
            vec![("p".into(), &self.p)]
        }
        fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
            vec![&mut self.p]
        }
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut q = Quad { p: Param::from_vec(&[2], vec![1.0, -1.0]) };
        q.p.grad = vec![3.0, -0.5];
        let mut opt = Adam::new(0.1);
        opt.step(&mut q);
        assert!((q.p.value[0] - 0.9).abs() < 1e-6);
        assert!((q.p.value[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimises_quadratic() {
        let mut q = Quad { p: Param::from_vec(&[1], vec![5.0]) };
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            q.p.grad[0] = 2.0 * (q.p.value[0] - 2.0);
            opt.step(&mut q);
        }
        assert!((q.p.value[0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut q = Quad { p: Param::from_vec(&[2], vec![0.0, 0.0]) };
        q.p.grad = vec![3.0, 4.0];
        let n = clip_grad_norm(&mut q, 1.0);
        assert_eq!(n, 5.0);
        let after = (q.p.grad[0].powi(2) + q.p.grad[1].powi(2)).sqrt();
        assert!((after - 1.0).abs() < 1e-12);
    }
}
