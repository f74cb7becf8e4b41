//! 1-D (dilated, length preserving) and 2-D (strided) convolutions via im2col.

use rand::Rng;

use crate::gemm::gemm;
use crate::init::uniform;
use crate::param::{Param, Parameterized};
use crate::Real;

/// Length-preserving dilated 1-D convolution over a `[channels, time]` map.
#[derive(Clone, Debug)]
pub struct Conv1d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    dilation: usize,
}

impl<T: Real> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd for same padding");
        assert!(dilation >= 1);
        let fan_in = in_ch * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            weight: Param::from_vec(&[out_ch, in_ch, kernel], uniform(rng, out_ch * fan_in, bound)),
            bias: Param::from_vec(&[out_ch], uniform(rng, out_ch, bound)),
            in_ch,
            out_ch,
            kernel,
            dilation,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    fn im2col(&self, x: &[T], len: usize) -> Vec<T> {
        let half = (self.kernel / 2) as isize;
        let mut cols = vec![T::zero(); self.in_ch * self.kernel * len];
        for c in 0..self.in_ch {
            let xr = &x[c * len..(c + 1) * len];
            for j in 0..self.kernel {
                let shift = (j as isize - half) * self.dilation as isize;
                let row = &mut cols[(c * self.kernel + j) * len..(c * self.kernel + j + 1) * len];
                let lo = (-shift).max(0) as usize;
                let hi = (len as isize - shift).clamp(0, len as isize) as usize;
                if lo < hi {
                    let src_lo = (lo as isize + shift) as usize;
                    row[lo..hi].copy_from_slice(&xr[src_lo..src_lo + (hi - lo)]);
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[T], len: usize) -> Vec<T> {
        let half = (self.kernel / 2) as isize;
        let mut dx = vec![T::zero(); self.in_ch * len];
        for c in 0..self.in_ch {
            for j in 0..self.kernel {
                let shift = (j as isize - half) * self.dilation as isize;
                let row = &cols[(c * self.kernel + j) * len..(c * self.kernel + j + 1) * len];
                let lo = (-shift).max(0) as usize;
                let hi = (len as isize - shift).clamp(0, len as isize) as usize;
                for t in lo..hi {
                    dx[c * len + (t as isize + shift) as usize] += row[t];
                }
            }
        }
        dx
    }

    /// `x` is `[in_ch, len]`; returns `[out_ch, len]`.
    pub fn forward(&self, x: &[T], len: usize) -> Vec<T> {
        debug_assert_eq!(x.len(), self.in_ch * len);
        let mut y = vec![T::zero(); self.out_ch * len];
        for o in 0..self.out_ch {
            y[o * len..(o + 1) * len].fill(self.bias.value[o]);
        }
        let k = self.in_ch * self.kernel;
        if self.kernel == 1 {
            gemm(false, false, self.out_ch, len, k, T::one(), &self.weight.value, x, T::one(), &mut y);
        } else {
            let cols = self.im2col(x, len);
            gemm(false, false, self.out_ch, len, k, T::one(), &self.weight.value, &cols, T::one(), &mut y);
        }
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T], len: usize) -> Vec<T> {
        self.accumulate_grads(x, dy, len);
        self.backward_input(dy, len)
    }

    pub fn accumulate_grads(&mut self, x: &[T], dy: &[T], len: usize) {
        let k = self.in_ch * self.kernel;
        if self.kernel == 1 {
            gemm(false, true, self.out_ch, k, len, T::one(), dy, x, T::one(), &mut self.weight.grad);
        } else {
            let cols = self.im2col(x, len);
            gemm(false, true, self.out_ch, k, len, T::one(), dy, &cols, T::one(), &mut self.weight.grad);
        }
        for o in 0..self.out_ch {
            let s: T = dy[o * len..(o + 1) * len].iter().copied().sum();
            self.bias.grad[o] += s;
        }
    }

    pub fn backward_input(&self, dy: &[T], len: usize) -> Vec<T> {
        let k = self.in_ch * self.kernel;
        let mut dcols = vec![T::zero(); k * len];
        gemm(true, false, k, len, self.out_ch, T::one(), &self.weight.value, dy, T::zero(), &mut dcols);
        if self.kernel == 1 {
            dcols
        } else {
            self.col2im(&dcols, len)
        }
    }
}

impl<T: Real> Parameterized<T> for Conv1d<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Spatial size of a 2-D feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims2 {
    pub h: usize,
    pub w: usize,
}

/// Strided, zero-padded 2-D convolution over a `[channels, h, w]` map.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_ch: usize,
    out_ch: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
        rng: &mut R,
    ) -> Self {
        let fan_in = in_ch * kernel.0 * kernel.1;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            weight: Param::from_vec(
                &[out_ch, in_ch, kernel.0, kernel.1],
                uniform(rng, out_ch * fan_in, bound),
            ),
            bias: Param::from_vec(&[out_ch], uniform(rng, out_ch, bound)),
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn output_dims(&self, d: Dims2) -> Dims2 {
        Dims2 {
            h: (d.h + 2 * self.pad.0 - self.kernel.0) / self.stride.0 + 1,
            w: (d.w + 2 * self.pad.1 - self.kernel.1) / self.stride.1 + 1,
        }
    }

    fn im2col(&self, x: &[T], d: Dims2) -> (Vec<T>, Dims2) {
        let o = self.output_dims(d);
        let (kh, kw) = self.kernel;
        let n = o.h * o.w;
        let mut cols = vec![T::zero(); self.in_ch * kh * kw * n];
        for c in 0..self.in_ch {
            for i in 0..kh {
                for j in 0..kw {
                    let row = ((c * kh + i) * kw + j) * n;
                    for oy in 0..o.h {
                        let iy = (oy * self.stride.0 + i) as isize - self.pad.0 as isize;
                        if iy < 0 || iy >= d.h as isize {
                            continue;
                        }
                        let src = c * d.h * d.w + iy as usize * d.w;
                        let dst = row + oy * o.w;
                        for ox in 0..o.w {
                            let ix = (ox * self.stride.1 + j) as isize - self.pad.1 as isize;
                            if ix >= 0 && ix < d.w as isize {
                                cols[dst + ox] = x[src + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        (cols, o)
    }

    fn col2im(&self, cols: &[T], d: Dims2, o: Dims2) -> Vec<T> {
        let (kh, kw) = self.kernel;
        let n = o.h * o.w;
        let mut dx = vec![T::zero(); self.in_ch * d.h * d.w];
        for c in 0..self.in_ch {
            for i in 0..kh {
                for j in 0..kw {
                    let row = ((c * kh + i) * kw + j) * n;
                    for oy in 0..o.h {
                        let iy = (oy * self.stride.0 + i) as isize - self.pad.0 as isize;
                        if iy < 0 || iy >= d.h as isize {
                            continue;
                        }
                        let dst = c * d.h * d.w + iy as usize * d.w;
                        for ox in 0..o.w {
                            let ix = (ox * self.stride.1 + j) as isize - self.pad.1 as isize;
                            if ix >= 0 && ix < d.w as isize {
                                dx[dst + ix as usize] += cols[row + oy * o.w + ox];
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    /// Returns the output map `[out_ch, h', w']`, its dims and the im2col
    /// buffer needed by [`Conv2d::backward`].
    pub fn forward(&self, x: &[T], d: Dims2) -> (Vec<T>, Dims2, Vec<T>) {
        debug_assert_eq!(x.len(), self.in_ch * d.h * d.w);
        let (cols, o) = self.im2col(x, d);
        let n = o.h * o.w;
        let mut y = vec![T::zero(); self.out_ch * n];
        for oc in 0..self.out_ch {
            y[oc * n..(oc + 1) * n].fill(self.bias.value[oc]);
        }
        let k = self.in_ch * self.kernel.0 * self.kernel.1;
        gemm(false, false, self.out_ch, n, k, T::one(), &self.weight.value, &cols, T::one(), &mut y);
        (y, o, cols)
    }

    /// Accumulates parameter gradients (when `accumulate`) and returns `dL/dx`.
    pub fn backward(&mut self, cols: &[T], dy: &[T], d: Dims2, accumulate: bool) -> Vec<T> {
        let o = self.output_dims(d);
        let n = o.h * o.w;
        let k = self.in_ch * self.kernel.0 * self.kernel.1;
        if accumulate {
            gemm(false, true, self.out_ch, k, n, T::one(), dy, cols, T::one(), &mut self.weight.grad);
            for oc in 0..self.out_ch {
                let s: T = dy[oc * n..(oc + 1) * n].iter().copied().sum();
                self.bias.grad[oc] += s;
            }
        }
        self.backward_input(dy, d)
    }

    pub fn backward_input(&self, dy: &[T], d: Dims2) -> Vec<T> {
        let o = self.output_dims(d);
        let n = o.h * o.w;
        let k = self.in_ch * self.kernel.0 * self.kernel.1;
        let mut dcols = vec![T::zero(); k * n];
        gemm(true, false, k, n, self.out_ch, T::one(), &self.weight.value, dy, T::zero(), &mut dcols);
        self.col2im(&dcols, d, o)
    }
}

impl<T: Real> Parameterized<T> for Conv2d<T> {
    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_conv1d(c: &Conv1d<f64>, x: &[f64], len: usize) -> Vec<f64> {
        let half = (c.kernel / 2) as isize;
        let mut y = vec![0.0; c.out_ch * len];
        for o in 0..c.out_ch {
            for t in 0..len {
                let mut s = c.bias.value[o];
                for i in 0..c.in_ch {
                    for j in 0..c.kernel {
                        let src = t as isize + (j as isize - half) * c.dilation as isize;
                        if src >= 0 && (src as usize) < len {
                            s += c.weight.value[(o * c.in_ch + i) * c.kernel + j] * x[i * len + src as usize];
                        }
                    }
                }
                y[o * len + t] = s;
            }
        }
        y
    }

    #[test]
    fn conv1d_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv1d::<f64>::new(3, 4, 3, 4, &mut rng);
        let len = 17;
        let x: Vec<f64> = (0..3 * len).map(|i| (i as f64 * 0.3).sin()).collect();
        let y = conv.forward(&x, len);
        let want = naive_conv1d(&conv, &x, len);
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_output_dims_follow_stride() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f32>::new(1, 15, (5, 5), (2, 2), (2, 2), &mut rng);
        let o = conv.output_dims(Dims2 { h: 323, w: 257 });
        assert_eq!(o, Dims2 { h: 162, w: 129 });
    }

    #[test]
    fn conv2d_input_gradient_is_adjoint_of_forward() {
        // <conv(x) - b, y> == <x, conv^T y>
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let conv = Conv2d::<f64>::new(2, 3, (3, 3), (2, 1), (1, 1), &mut rng);
        let d = Dims2 { h: 7, w: 6 };
        let x: Vec<f64> = (0..2 * 42).map(|i| (i as f64 * 0.7).cos()).collect();
        let (y, o, _) = conv.forward(&x, d);
        let n = o.h * o.w;
        let g: Vec<f64> = (0..3 * n).map(|i| (i as f64 * 0.19).sin()).collect();
        let lhs: f64 = (0..3 * n).map(|i| (y[i] - conv.bias.value[i / n]) * g[i]).sum();
        let dx = conv.backward_input(&g, d);
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
