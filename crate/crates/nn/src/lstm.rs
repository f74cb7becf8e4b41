//! Multi-layer bidirectional LSTM over time-major `[T, B, D]` sequences.

use rand::Rng;

use crate::activation::sigmoid;
use crate::gemm::gemm;
use crate::init::uniform;
use crate::param::{prefixed, Param, Parameterized};
use crate::Real;

/// One direction of one layer. Gate order is input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct LstmDirection<T> {
    pub w_ih: Param<T>,
    pub w_hh: Param<T>,
    pub bias: Param<T>,
    input: usize,
    hidden: usize,
    reverse: bool,
}

#[derive(Clone, Debug)]
struct DirCache<T> {
    /// Activated gates `[T, B, 4H]`.
    gates: Vec<T>,
    /// Cell states `[T, B, H]`.
    cells: Vec<T>,
    /// Hidden states `[T, B, H]`, i.e. the direction's output.
    hidden: Vec<T>,
}

impl<T: Real> LstmDirection<T> {
    fn new<R: Rng + ?Sized>(input: usize, hidden: usize, reverse: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut bias = Param::from_vec(&[4 * hidden], uniform(rng, 4 * hidden, bound));
        for b in &mut bias.value[hidden..2 * hidden] {
            *b = T::one();
        }
        Self {
            w_ih: Param::from_vec(&[4 * hidden, input], uniform(rng, 4 * hidden * input, bound)),
            w_hh: Param::from_vec(&[4 * hidden, hidden], uniform(rng, 4 * hidden * hidden, bound)),
            bias,
            input,
            hidden,
            reverse,
        }
    }

    fn order(&self, steps: usize) -> Vec<usize> {
        if self.reverse {
            (0..steps).rev().collect()
        } else {
            (0..steps).collect()
        }
    }

    fn forward(&self, x: &[T], steps: usize, batch: usize) -> DirCache<T> {
        let h = self.hidden;
        let g4 = 4 * h;
        let rows = steps * batch;
        let mut gates = Vec::with_capacity(rows * g4);
        for _ in 0..rows {
            gates.extend_from_slice(&self.bias.value);
        }
        gemm(false, true, rows, g4, self.input, T::one(), x, &self.w_ih.value, T::one(), &mut gates);

        let mut cells = vec![T::zero(); rows * h];
        let mut hidden = vec![T::zero(); rows * h];
        // `[H, 4H]` so each step is a row-times-matrix product without repacking.
        let mut w_hh_t = vec![T::zero(); h * g4];
        for r in 0..g4 {
            for c in 0..h {
                w_hh_t[c * g4 + r] = self.w_hh.value[r * h + c];
            }
        }
        let mut prev: Option<usize> = None;
        for t in self.order(steps) {
            let gs = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            if let Some(p) = prev {
                let hp = &hidden[p * batch * h..(p + 1) * batch * h];
                gemm(false, false, batch, g4, h, T::one(), hp, &w_hh_t, T::one(), gs);
            }
            for b in 0..batch {
                let row = &mut gs[b * g4..(b + 1) * g4];
                for j in 0..h {
                    row[j] = sigmoid(row[j]);
                    row[h + j] = sigmoid(row[h + j]);
                    row[2 * h + j] = row[2 * h + j].tanh();
                    row[3 * h + j] = sigmoid(row[3 * h + j]);
                }
                for j in 0..h {
                    let c_prev = match prev {
                        Some(p) => cells[(p * batch + b) * h + j],
                        None => T::zero(),
                    };
                    let c = row[h + j] * c_prev + row[j] * row[2 * h + j];
                    cells[(t * batch + b) * h + j] = c;
                    hidden[(t * batch + b) * h + j] = row[3 * h + j] * c.tanh();
                }
            }
            prev = Some(t);
        }
        DirCache { gates, cells, hidden }
    }

    /// Full BPTT. `dh_out` is the gradient w.r.t. this direction's outputs.
    fn backward(&mut self, x: &[T], cache: &DirCache<T>, dh_out: &[T], steps: usize, batch: usize) -> Vec<T> {
        let h = self.hidden;
        let g4 = 4 * h;
        let rows = steps * batch;
        let mut dgates = vec![T::zero(); rows * g4];
        let mut dh_next = vec![T::zero(); batch * h];
        let mut dc_next = vec![T::zero(); batch * h];
        let order = self.order(steps);
        for (k, &t) in order.iter().enumerate().rev() {
            let prev = if k > 0 { Some(order[k - 1]) } else { None };
            let gs = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
            let dgs = &mut dgates[t * batch * g4..(t + 1) * batch * g4];
            for b in 0..batch {
                let row = &gs[b * g4..(b + 1) * g4];
                let drow = &mut dgs[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let (i, f, g, o) = (row[j], row[h + j], row[2 * h + j], row[3 * h + j]);
                    let c = cache.cells[(t * batch + b) * h + j];
                    let c_prev = match prev {
                        Some(p) => cache.cells[(p * batch + b) * h + j],
                        None => T::zero(),
                    };
                    let tc = c.tanh();
                    let dh = dh_out[(t * batch + b) * h + j] + dh_next[b * h + j];
                    let dc = dc_next[b * h + j] + dh * o * (T::one() - tc * tc);
                    drow[j] = dc * g * i * (T::one() - i);
                    drow[h + j] = dc * c_prev * f * (T::one() - f);
                    drow[2 * h + j] = dc * i * (T::one() - g * g);
                    drow[3 * h + j] = dh * tc * o * (T::one() - o);
                    dc_next[b * h + j] = dc * f;
                }
            }
            if prev.is_some() {
                gemm(false, false, batch, h, g4, T::one(), dgs, &self.w_hh.value, T::zero(), &mut dh_next);
            }
        }
        // Recurrent weight gradient in one product: row `t` of `h_prev` holds
        // the state that fed step `t` (zero for the first step).
        let mut h_prev = vec![T::zero(); rows * h];
        for k in 1..order.len() {
            let (t, p) = (order[k], order[k - 1]);
            h_prev[t * batch * h..(t + 1) * batch * h].copy_from_slice(&cache.hidden[p * batch * h..(p + 1) * batch * h]);
        }
        gemm(true, false, g4, h, rows, T::one(), &dgates, &h_prev, T::one(), &mut self.w_hh.grad);
        gemm(true, false, g4, self.input, rows, T::one(), &dgates, x, T::one(), &mut self.w_ih.grad);
        for r in 0..rows {
            for (gb, &d) in self.bias.grad.iter_mut().zip(&dgates[r * g4..(r + 1) * g4]) {
                *gb += d;
            }
        }
        let mut dx = vec![T::zero(); rows * self.input];
        gemm(false, false, rows, self.input, g4, T::one(), &dgates, &self.w_ih.value, T::zero(), &mut dx);
        dx
    }
}

impl<T: Real> Parameterized<T> for LstmDirection<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        vec![
            ("w_ih".into(), &self.w_ih),
            ("w_hh".into(), &self.w_hh),
            ("bias".into(), &self.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}

/// Stacked bidirectional LSTM; each layer's output concatenates the forward
/// and backward hidden states (`2H` features).
#[derive(Clone, Debug)]
pub struct BiLstm<T> {
    layers: Vec<(LstmDirection<T>, LstmDirection<T>)>,
    hidden: usize,
}

/// Activations kept from [`BiLstm::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct BiLstmCache<T> {
    inputs: Vec<Vec<T>>,
    dirs: Vec<(DirCache<T>, DirCache<T>)>,
    steps: usize,
    batch: usize,
}

impl<T: Real> BiLstm<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, num_layers: usize, rng: &mut R) -> Self {
        assert!(num_layers >= 1);
        let layers = (0..num_layers)
            .map(|l| {
                let d = if l == 0 { input } else { 2 * hidden };
                (
                    LstmDirection::new(d, hidden, false, rng),
                    LstmDirection::new(d, hidden, true, rng),
                )
            })
            .collect();
        Self { layers, hidden }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    /// `x` is `[steps, batch, input]`; returns `[steps, batch, 2H]`.
    pub fn forward(&self, x: &[T], steps: usize, batch: usize) -> (Vec<T>, BiLstmCache<T>) {
        let h = self.hidden;
        let mut cur = x.to_vec();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut dirs = Vec::with_capacity(self.layers.len());
        for (fw, bw) in &self.layers {
            let cf = fw.forward(&cur, steps, batch);
            let cb = bw.forward(&cur, steps, batch);
            let mut out = vec![T::zero(); steps * batch * 2 * h];
            for r in 0..steps * batch {
                out[r * 2 * h..r * 2 * h + h].copy_from_slice(&cf.hidden[r * h..(r + 1) * h]);
                out[r * 2 * h + h..(r + 1) * 2 * h].copy_from_slice(&cb.hidden[r * h..(r + 1) * h]);
            }
            inputs.push(std::mem::replace(&mut cur, out));
            dirs.push((cf, cb));
        }
        (cur, BiLstmCache { inputs, dirs, steps, batch })
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, cache: &BiLstmCache<T>, dy: &[T]) -> Vec<T> {
        let h = self.hidden;
        let (steps, batch) = (cache.steps, cache.batch);
        let rows = steps * batch;
        let mut grad = dy.to_vec();
        for (l, (fw, bw)) in self.layers.iter_mut().enumerate().rev() {
            let mut df = vec![T::zero(); rows * h];
            let mut db = vec![T::zero(); rows * h];
            for r in 0..rows {
                df[r * h..(r + 1) * h].copy_from_slice(&grad[r * 2 * h..r * 2 * h + h]);
                db[r * h..(r + 1) * h].copy_from_slice(&grad[r * 2 * h + h..(r + 1) * 2 * h]);
            }
            let x = &cache.inputs[l];
            let (cf, cb) = &cache.dirs[l];
            let mut dx = fw.backward(x, cf, &df, steps, batch);
            let dxb = bw.backward(x, cb, &db, steps, batch);
            for (a, b) in dx.iter_mut().zip(dxb) {
                *a += b;
            }
            grad = dx;
        }
        grad
    }
}

impl<T: Real> Parameterized<T> for BiLstm<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = Vec::new();
        for (l, (fw, bw)) in self.layers.iter().enumerate() {
            out.extend(prefixed(&format!("l{l}.fwd"), fw.named_params()));
            out.extend(prefixed(&format!("l{l}.bwd"), bw.named_params()));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        for (fw, bw) in self.layers.iter_mut() {
            out.extend(fw.params_mut());
            out.extend(bw.params_mut());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lstm = BiLstm::<f32>::new(5, 4, 2, &mut rng);
        for (name, p) in lstm.named_params() {
            if name.ends_with("bias") {
                assert!(p.value[4..8].iter().all(|&b| b == 1.0), "{name}");
            }
        }
    }

    #[test]
    fn reverse_direction_sees_future_only() {
        // Perturbing the last step must change the backward direction's
        // output at step 0 but leave the forward direction untouched.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lstm = BiLstm::<f64>::new(2, 3, 1, &mut rng);
        let (steps, batch) = (5, 1);
        let mut x: Vec<f64> = (0..steps * 2).map(|i| (i as f64).sin()).collect();
        let (y0, _) = lstm.forward(&x, steps, batch);
        x[(steps - 1) * 2] += 0.5;
        let (y1, _) = lstm.forward(&x, steps, batch);
        for j in 0..3 {
            assert_eq!(y0[j], y1[j]);
        }
        assert!((0..3).any(|j| y0[3 + j] != y1[3 + j]));
    }
}
