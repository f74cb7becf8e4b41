//! End to end: synthesize a benchmark, train all three stages, evaluate.
//!
//! Small budgets by default so it finishes in minutes on one core; the CLI
//! with a config file is the way to run the full-size benchmark.
//!
//! cargo run --release -p vam-core --example pipeline -- [work_dir]

use vam::eval::{evaluate, EvalMode, EvalOutcome, EvalSpec, System, Variant};
use vam::synth::{build_dataset, AudioStore, DatasetConfig};
use vam::train::{save_checkpoint, Phase, RunState, TrainConfig, Trainer};

fn main() -> vam::Result<()> {
    let work = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "vam_pipeline".into()));
    let data = DatasetConfig {
        train: 120,
        val: 10,
        test: 30,
        paired: 60,
        samples_per_room: 5,
        seed: 11,
    };
    let manifest = build_dataset(&data, work.join("data"))?;
    println!("dataset: {} clips", manifest.entries.len());
    let store = AudioStore::new(manifest);

    let mut cfg = TrainConfig::desk();
    cfg.prereq.estimator_clips = 400;
    cfg.prereq.derev_pairs = 60;
    cfg.stage1.epochs = 4;
    cfg.stage2.epochs = 4;
    cfg.stage2.samples_per_epoch = 120;
    cfg.stage3.gan.epochs = 8;
    cfg.stage3.gan.samples_per_epoch = 16;
    cfg.stage3.copy_period = 4;

    let mut t = Trainer::new(cfg.clone(), &store, RunState::new(&cfg))?
        .with_log(work.join("train_log.csv"))
        .with_observer(|stage, epoch, phase, s| {
            if phase == Phase::TargetCopy {
                println!("{stage} epoch {epoch}: target reverberators copied");
            } else if matches!(phase, Phase::Generator | Phase::Reverberators) {
                if let Some(r) = s.history.last() {
                    println!("{stage} epoch {epoch}: {r:?}");
                }
            }
        });
    t.run_all()?;
    save_checkpoint(&t.state, &cfg, work.join("checkpoint.safetensors"))?;
    let state = t.into_state();

    println!(
        "anechoic reads during self-supervised stages: {}",
        store.privileged_reads_in("stage2").len() + store.privileged_reads_in("stage3").len()
    );
    store.enter_phase("eval", false);
    println!("{}", EvalOutcome::report_header().join(","));
    for variant in Variant::ALL {
        let system = System::from_state(&state)?;
        let out = evaluate(&system, &store, &EvalSpec::new(EvalMode::Unseen).with_variant(variant))?;
        out.write_csvs(&work.join("eval"), &format!("unseen_{}", variant.name()))?;
        println!("{}", out.report_row().join(","));
    }
    Ok(())
}
