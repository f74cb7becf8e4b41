//! Central-difference gradient checks for `f64` models.

use crate::param::Parameterized;

/// `||a - b|| / max(||a||, ||b||, tiny)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

/// Indices `0, stride, 2*stride, ...` covering at most `max` coordinates.
pub fn sample_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let stride = len.div_ceil(max);
    (0..len).step_by(stride).collect()
}

/// Numerical gradient of `f` at `x` on the given coordinates.
pub fn numeric_grad<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], idx: &[usize], eps: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    idx.iter()
        .map(|&i| {
            let orig = xp[i];
            xp[i] = orig + eps;
            let up = f(&xp);
            xp[i] = orig - eps;
            let dn = f(&xp);
            xp[i] = orig;
            (up - dn) / (2.0 * eps)
        })
        .collect()
}

/// Compare analytic parameter gradients against central differences.
///
/// `loss_and_grad` must zero gradients, run forward and backward, and return
/// the loss. `loss` runs the forward pass only. Returns the worst relative
/// error over parameters together with that parameter's name.
pub fn check_params<M, G, L>(model: &mut M, mut loss_and_grad: G, mut loss: L, per_param: usize, eps: f64) -> (f64, String)
where
    M: Parameterized<f64>,
    G: FnMut(&mut M) -> f64,
    L: FnMut(&M) -> f64,
{
    loss_and_grad(model);
    let analytic: Vec<(String, Vec<f64>)> = model
        .named_params()
        .into_iter()
        .map(|(n, p)| (n, p.grad.clone()))
        .collect();
    let mut worst = (0.0, String::new());
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        let idx = sample_indices(grad.len(), per_param);
        let mut num = Vec::with_capacity(idx.len());
        for &i in &idx {
            let orig = model.params_mut()[pi].value[i];
            model.params_mut()[pi].value[i] = orig + eps;
            let up = loss(model);
            model.params_mut()[pi].value[i] = orig - eps;
            let dn = loss(model);
            model.params_mut()[pi].value[i] = orig;
            num.push((up - dn) / (2.0 * eps));
        }
        let ana: Vec<f64> = idx.iter().map(|&i| grad[i]).collect();
        let e = rel_error(&ana, &num);
        if e > worst.0 || worst.1.is_empty() {
            worst = (e, name.clone());
        }
    }
    worst
}
