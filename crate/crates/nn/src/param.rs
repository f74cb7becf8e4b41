use std::collections::HashMap;

use crate::Real;

/// A trainable tensor: flat row-major values, an equally sized gradient
/// accumulator and the logical shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    shape: Vec<usize>,
}

impl<T: Real> Param<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            value: vec![T::zero(); n],
            grad: vec![T::zero(); n],
            shape: shape.to_vec(),
        }
    }

    pub fn from_vec(shape: &[usize], value: Vec<T>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, value.len(), "param shape {shape:?} does not match data");
        Self {
            grad: vec![T::zero(); n],
            value,
            shape: shape.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Access to the parameters of a model in a stable order.
///
/// `named_params` and `params_mut` must enumerate the same tensors in the
/// same order; optimizers and checkpoints rely on it.
pub trait Parameterized<T: Real> {
    fn named_params(&self) -> Vec<(String, &Param<T>)>;

    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Overwrite parameter values (not gradients) with those of `other`.
    fn copy_params_from(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src: Vec<Vec<T>> = other
            .named_params()
            .into_iter()
            .map(|(_, p)| p.value.clone())
            .collect();
        let dst = self.params_mut();
        assert_eq!(src.len(), dst.len(), "parameter layout mismatch");
        for (d, s) in dst.into_iter().zip(src) {
            assert_eq!(d.value.len(), s.len(), "parameter size mismatch");
            d.value.copy_from_slice(&s);
        }
    }

    /// Load values by name; every parameter must be present with the right length.
    fn load_named(&mut self, values: &HashMap<String, Vec<T>>) -> Result<(), String> {
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        for (name, p) in names.iter().zip(self.params_mut()) {
            let v = values
                .get(name)
                .ok_or_else(|| format!("missing parameter `{name}`"))?;
            if v.len() != p.value.len() {
                return Err(format!(
                    "parameter `{name}` has {} values, expected {}",
                    v.len(),
                    p.value.len()
                ));
            }
            p.value.copy_from_slice(v);
        }
        Ok(())
    }

    /// Bitwise equality of all parameter values.
    fn params_bitwise_eq(&self, other: &Self) -> bool
    where
        Self: Sized,
    {
        let a = self.named_params();
        let b = other.named_params();
        a.len() == b.len()
            && a.iter().zip(&b).all(|((_, x), (_, y))| {
                x.value.len() == y.value.len()
                    && x
                        .value
                        .iter()
                        .zip(&y.value)
                        .all(|(u, v)| u.as_f64().to_bits() == v.as_f64().to_bits())
            })
    }
}

/// Prefix every name in `inner` with `prefix.`.
pub fn prefixed<'a, T>(prefix: &str, inner: Vec<(String, &'a Param<T>)>) -> Vec<(String, &'a Param<T>)> {
    inner
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}
