use crate::Real;

/// Row-major `c = alpha * op(a) * op(b) + beta * c` where `op(a)` is `m x k`
/// and `op(b)` is `k x n`.
///
/// With `trans_a` the buffer `a` holds a `k x m` matrix, with `trans_b` the
/// buffer `b` holds an `n x k` matrix.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k, "gemm: lhs too short");
    assert!(b.len() >= k * n, "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c[..m * n].iter_mut() {
            *v = if beta == T::zero() { T::zero() } else { *v * beta };
        }
        return;
    }
    if m <= SMALL_M && !trans_a {
        small_m(trans_b, m, n, k, alpha, a, b, beta, c);
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: bounds checked above; `c` is a distinct mutable borrow.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Below this many output rows, packing the right operand costs more than the
/// product itself (recurrent steps run with `m` equal to the batch size).
const SMALL_M: usize = 16;

#[allow(clippy::too_many_arguments)]
fn small_m<T: Real>(trans_b: bool, m: usize, n: usize, k: usize, alpha: T, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        let cr = &mut c[i * n..(i + 1) * n];
        if beta == T::zero() {
            cr.iter_mut().for_each(|v| *v = T::zero());
        } else if beta != T::one() {
            cr.iter_mut().for_each(|v| *v *= beta);
        }
        if trans_b {
            for (j, cv) in cr.iter_mut().enumerate() {
                let br = &b[j * k..(j + 1) * k];
                let mut acc = T::zero();
                for (x, y) in ar.iter().zip(br) {
                    acc += *x * *y;
                }
                *cv += alpha * acc;
            }
        } else {
            for (p, &av) in ar.iter().enumerate() {
                let s = alpha * av;
                if s == T::zero() {
                    continue;
                }
                for (cv, bv) in cr.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                    *cv += s * *bv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(ta: bool, tb: bool, m: usize, n: usize, k: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    let av = if ta { a[p * m + i] } else { a[i * k + p] };
                    let bv = if tb { b[j * k + p] } else { b[p * n + j] };
                    s += av * bv;
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn all_transpose_combinations_match_naive() {
        // Covers both the small-row path and the packed path.
        for (m, n, k) in [(1, 7, 4), (3, 5, 4), (9, 6, 5)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
            for ta in [false, true] {
                for tb in [false, true] {
                    let mut c = vec![1.0; m * n];
                    gemm(ta, tb, m, n, k, 2.0, &a, &b, 0.5, &mut c);
                    let want = naive(ta, tb, m, n, k, &a, &b);
                    for (x, y) in c.iter().zip(&want) {
                        assert!((x - (2.0 * y + 0.5)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn beta_one_accumulates() {
        let a = [1.0f32, 2.0];
        let b = [3.0f32, 4.0];
        let mut c = [10.0f32];
        gemm(false, false, 1, 1, 2, 1.0, &a, &b, 1.0, &mut c);
        assert_eq!(c[0], 21.0);
    }
}
