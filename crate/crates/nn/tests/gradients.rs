use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam_nn::gradcheck::{check_params, numeric_grad, rel_error, sample_indices};
use vam_nn::{BiLstm, Conv1d, Conv2d, Dims2, Linear, Parameterized};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn probe(n: usize, seed: f64) -> Vec<f64> {
    (0..n).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn linear_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lin = Linear::<f64>::new(6, 4, &mut rng);
    let rows = 3;
    let x = probe(rows * 6, 0.7);
    let w = probe(rows * 4, 1.3);
    let (err, name) = check_params(
        &mut lin,
        |m| {
            m.zero_grad();
            let y = m.forward(&x, rows);
            m.backward(&x, &w, rows);
            dot(&y, &w)
        },
        |m| dot(&m.forward(&x, rows), &w),
        64,
        EPS,
    );
    assert!(err < TOL, "{name}: {err}");

    let dx = lin.backward_input(&w, rows);
    let idx = sample_indices(x.len(), 64);
    let num = numeric_grad(|xp| dot(&lin.forward(xp, rows), &w), &x, &idx, EPS);
    let ana: Vec<f64> = idx.iter().map(|&i| dx[i]).collect();
    assert!(rel_error(&ana, &num) < TOL);
}

#[test]
fn conv1d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (k, d) in [(1, 1), (3, 1), (3, 4), (5, 2)] {
        let mut conv = Conv1d::<f64>::new(3, 2, k, d, &mut rng);
        let len = 11;
        let x = probe(3 * len, 0.41);
        let w = probe(2 * len, 0.93);
        let (err, name) = check_params(
            &mut conv,
            |m| {
                m.zero_grad();
                let y = m.forward(&x, len);
                m.backward(&x, &w, len);
                dot(&y, &w)
            },
            |m| dot(&m.forward(&x, len), &w),
            64,
            EPS,
        );
        assert!(err < TOL, "k={k} d={d} {name}: {err}");
        let dx = conv.backward_input(&w, len);
        let idx = sample_indices(x.len(), 64);
        let num = numeric_grad(|xp| dot(&conv.forward(xp, len), &w), &x, &idx, EPS);
        let ana: Vec<f64> = idx.iter().map(|&i| dx[i]).collect();
        assert!(rel_error(&ana, &num) < TOL, "k={k} d={d} input");
    }
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut conv = Conv2d::<f64>::new(2, 3, (5, 5), (2, 2), (2, 2), &mut rng);
    let d = Dims2 { h: 9, w: 8 };
    let x = probe(2 * 9 * 8, 0.29);
    let o = conv.output_dims(d);
    let w = probe(3 * o.h * o.w, 0.77);
    let (err, name) = check_params(
        &mut conv,
        |m| {
            m.zero_grad();
            let (y, _, cols) = m.forward(&x, d);
            m.backward(&cols, &w, d, true);
            dot(&y, &w)
        },
        |m| dot(&m.forward(&x, d).0, &w),
        64,
        EPS,
    );
    assert!(err < TOL, "{name}: {err}");
    let dx = conv.backward_input(&w, d);
    let idx = sample_indices(x.len(), 64);
    let num = numeric_grad(|xp| dot(&conv.forward(xp, d).0, &w), &x, &idx, EPS);
    let ana: Vec<f64> = idx.iter().map(|&i| dx[i]).collect();
    assert!(rel_error(&ana, &num) < TOL);
}

#[test]
fn bilstm_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lstm = BiLstm::<f64>::new(3, 4, 2, &mut rng);
    let (steps, batch) = (6, 2);
    let x = probe(steps * batch * 3, 0.53);
    let w = probe(steps * batch * 8, 0.37);
    let (err, name) = check_params(
        &mut lstm,
        |m| {
            m.zero_grad();
            let (y, cache) = m.forward(&x, steps, batch);
            m.backward(&cache, &w);
            dot(&y, &w)
        },
        |m| dot(&m.forward(&x, steps, batch).0, &w),
        48,
        EPS,
    );
    assert!(err < TOL, "{name}: {err}");

    let (_, cache) = lstm.forward(&x, steps, batch);
    let dx = lstm.clone().backward(&cache, &w);
    let idx = sample_indices(x.len(), 64);
    let num = numeric_grad(|xp| dot(&lstm.forward(xp, steps, batch).0, &w), &x, &idx, EPS);
    let ana: Vec<f64> = idx.iter().map(|&i| dx[i]).collect();
    assert!(rel_error(&ana, &num) < TOL);
}
