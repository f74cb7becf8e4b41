//! Train a conditioned and a blind reverberator to render dry speech into
//! rooms, then compare them on held-out rooms.
//!
//! The blind model only hears the dry input, so it cannot know the room; the
//! conditioned model reads the scene descriptor and should track RT60.
//!
//! cargo run --release -p vam-core --example reverberator -- [train_rooms] [epochs]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::metrics::{mean, pearson};
use vam::reverb::{ReverbConfig, ReverbModel};
use vam::synth::{render_sample, sample_room, RenderedSample};
use vam_nn::{clip_grad_norm, Adam, Parameterized};

fn scenes(n: usize, seed: u64) -> vam::Result<Vec<RenderedSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| render_sample(&sample_room(&mut rng, (0.2, 1.2)), &mut rng)).collect()
}

fn main() -> vam::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(160);
    let epochs = args.get(1).copied().unwrap_or(6);
    let train = scenes(n, 1)?;
    let test = scenes(40, 2)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut visual = ReverbModel::visual(ReverbConfig::default(), &mut rng);
    let mut blind = ReverbModel::blind(ReverbConfig::default(), &mut rng);
    println!("{}", visual.describe());
    let (mut ov, mut ob) = (Adam::new(1e-3), Adam::new(1e-3));
    let batch = 8;

    for epoch in 1..=epochs {
        let (mut lv, mut lb) = (0.0, 0.0);
        for chunk in train.chunks(batch) {
            visual.zero_grad();
            blind.zero_grad();
            let scale = 1.0 / chunk.len() as f32;
            for s in chunk {
                let tf = visual.target_features(&s.audio.samples)?;
                lv += visual.accumulate(&s.source.samples, Some(s.descriptor.as_slice()), &tf, scale)? as f64;
                lb += blind.accumulate(&s.source.samples, None, &tf, scale)? as f64;
            }
            clip_grad_norm(&mut visual, 5.0);
            clip_grad_norm(&mut blind, 5.0);
            ov.step(&mut visual);
            ob.step(&mut blind);
        }
        println!("epoch {epoch}: loss visual {:.4} blind {:.4}", lv / n as f64, lb / n as f64);
    }

    let (mut truth, mut pv, mut pb, mut lv, mut lb) = (vec![], vec![], vec![], vec![], vec![]);
    for s in &test {
        let v = s.descriptor.as_slice();
        truth.push(s.rir.rt60_true);
        pv.push(visual.rir_params(&s.source.samples, Some(v))?.rt60);
        pb.push(blind.rir_params(&s.source.samples, None)?.rt60);
        lv.push(visual.loss(&s.source.samples, Some(v), &s.audio.samples)?);
        lb.push(blind.loss(&s.source.samples, None, &s.audio.samples)?);
    }
    println!("held-out log-STFT loss: visual {:.4}  blind {:.4}", mean(&lv), mean(&lb));
    println!(
        "predicted decay vs true RT60: visual r={:.3}  blind r={:.3}",
        pearson(&pv, &truth),
        pearson(&pb, &truth)
    );
    Ok(())
}
