//! Train the blind RT60 estimator on synthetic rooms and report held-out error.
//!
//! cargo run --release -p vam-core --example rt60_estimator -- [train_n] [epochs]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::metrics::{labelled_clips, EstimatorTrainConfig, Rt60Estimator};

fn main() -> vam::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(2000);
    let epochs = args.get(1).copied().unwrap_or(40);
    let t0 = std::time::Instant::now();
    let train = labelled_clips(n, 1, (0.1, 1.2))?;
    let test = labelled_clips(300, 2, (0.1, 1.2))?;
    println!("rendered {} clips in {:.1?}", n + 300, t0.elapsed());

    let mut est = Rt60Estimator::new(&mut ChaCha8Rng::seed_from_u64(3));
    let cfg = EstimatorTrainConfig { epochs, ..Default::default() };
    let hist = est.train(&train, &cfg)?;
    for (e, l) in hist.iter().enumerate() {
        println!("epoch {e:3} mse {l:.5}");
    }
    let preds: Vec<f64> = test.iter().map(|c| est.estimate_seconds(&c.audio)).collect::<vam::Result<_>>()?;
    let mae = preds.iter().zip(&test).map(|(p, c)| (p - c.rt60).abs()).sum::<f64>() / test.len() as f64;
    println!("held-out MAE {mae:.4} s after {:.1?}", t0.elapsed());
    Ok(())
}
