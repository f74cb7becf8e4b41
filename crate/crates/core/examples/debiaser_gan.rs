//! Pre-train the de-biasing GAN against SRMR on a small synthetic set.
//!
//! Builds the dataset under `data_dir` on first use, trains the RT60
//! estimator and dereverberator, then runs the GAN stage and reports how well
//! the discriminator tracks the metric and what the generator did to SRMR and
//! estimated RT60 on held-out clips.
//!
//! cargo run --release -p vam-core --example debiaser_gan -- [data_dir] [epochs]

use vam::metrics::{mean, pearson, srmr_norm};
use vam::synth::{build_dataset, AudioStore, DatasetConfig, DatasetManifest, Split};
use vam::train::{Stage, TrainConfig, Trainer, RunState};

fn main() -> vam::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let root = std::path::PathBuf::from(args.first().map_or("vam_example_data", String::as_str));
    let epochs = args.get(1).and_then(|e| e.parse().ok()).unwrap_or(6);
    let manifest = match DatasetManifest::load(&root) {
        Ok(m) => m,
        Err(_) => build_dataset(
            &DatasetConfig {
                train: 200,
                val: 20,
                test: 40,
                paired: 100,
                samples_per_room: 5,
                seed: 7,
            },
            &root,
        )?,
    };
    let store = AudioStore::new(manifest);

    let mut cfg = TrainConfig::desk();
    cfg.prereq.estimator_clips = 600;
    cfg.prereq.derev_pairs = 100;
    cfg.stage1.epochs = epochs;
    let mut t = Trainer::new(cfg.clone(), &store, RunState::new(&cfg))?;
    t.prepare()?;
    t.run_stage(Stage::One)?;
    for r in &t.state.history {
        println!(
            "epoch {:2}: D loss {:.4}  G loss {:.4}  mean SRMR_norm {:.3}  |D - M| {:.3}",
            r.epoch,
            r.d_loss.unwrap_or(f64::NAN),
            r.g_loss.unwrap_or(f64::NAN),
            r.mean_metric.unwrap_or(f64::NAN),
            r.probe_gap.unwrap_or(f64::NAN)
        );
    }

    let s = &t.state;
    store.enter_phase("report", false);
    let (mut d, mut m, mut before, mut after, mut rt_in, mut rt_out) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for e in store.manifest().split(Split::Val) {
        let x = s.derev.dereverberate(&store.audio(e)?.samples)?;
        let g = s.generator.forward(&x)?;
        d.push(s.discriminator.score(&g)? as f64);
        m.push(srmr_norm(&g)?);
        before.push(srmr_norm(&x)?);
        after.push(srmr_norm(&g)?);
        rt_in.push(s.estimator.estimate_seconds(&x)?);
        rt_out.push(s.estimator.estimate_seconds(&g)?);
    }
    println!("held-out: Pearson(D, SRMR_norm) {:.3}", pearson(&d, &m));
    println!("held-out: SRMR_norm {:.3} -> {:.3}", mean(&before), mean(&after));
    println!("held-out: estimated RT60 {:.3} s -> {:.3} s", mean(&rt_in), mean(&rt_out));
    Ok(())
}
