//! `vam`: dataset synthesis, staged training, evaluation and inference.
//!
//! Every parameter lives in a TOML config (`vam config` prints the resolved
//! one); `--set key.path=value` overrides any field. Failures exit nonzero
//! with one JSON line on stderr: `{"error":"<kind>","message":"..."}`.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use config::Config;
use vam::dsp::{read_wav, write_wav, Waveform};
use vam::eval::{evaluate, EvalMode, SourceKind, System};
use vam::metrics::{log_stft_error, srmr, stft_error};
use vam::synth::{build_dataset, AudioStore, DatasetManifest, SceneDescriptor};
use vam::train::{load_checkpoint, save_checkpoint, RunState, Stage, Trainer};
use vam::{Error, Result};

#[derive(Parser)]
#[command(name = "vam", version, about = "Self-supervised visual acoustic matching")]
struct Cli {
    /// TOML config file; fields it omits take the profile defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one config field, e.g. `--set train.stage1.epochs=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render the synthetic benchmark into the data directory.
    SynthData,
    /// Train one stage, or prerequisites plus all stages.
    Train {
        #[arg(long, value_parser = ["1", "2", "3", "all"])]
        stage: String,
        /// Start from this checkpoint instead of the run's current one.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Take the generator of this finished stage-1 checkpoint and skip stage 1.
        #[arg(long)]
        shortcut_generator: Option<PathBuf>,
    },
    /// Score the trained system and write report CSVs to `<run_dir>/eval`.
    Eval {
        #[arg(long, value_parser = ["seen", "unseen", "cross"])]
        mode: String,
        /// visual | blind | input
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        dump_wavs: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Match one clip to a target room.
    Infer {
        #[arg(long)]
        source: PathBuf,
        /// Take the descriptor of this room id from the dataset manifest.
        #[arg(long, conflicts_with = "descriptor", required_unless_present = "descriptor")]
        room: Option<u32>,
        /// File of descriptor values separated by commas or whitespace.
        #[arg(long)]
        descriptor: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// The source is dry and skips the de-biaser.
        #[arg(long)]
        anechoic: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// RTE, STFT errors and SRMR between two WAVs, as CSV.
    Metrics {
        #[arg(long = "wav", num_args = 1, required = true)]
        wavs: Vec<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print the resolved config as TOML.
    Config,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", &e.to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message.trim() }));
    ExitCode::FAILURE
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli.overrides;
    if let Some(d) = &cli.data_dir {
        overrides.push(format!("data_dir={}", toml_str(d)));
    }
    if let Some(d) = &cli.run_dir {
        overrides.push(format!("run_dir={}", toml_str(d)));
    }
    if let Cmd::Eval {
        variant, limit, dump_wavs, ..
    } = &cli.cmd
    {
        overrides.extend(variant.iter().map(|v| format!("eval.variant={v}")));
        overrides.extend(limit.iter().map(|n| format!("eval.limit={n}")));
        if *dump_wavs {
            overrides.push("eval.dump_wavs=true".into());
        }
    }
    let cfg = Config::load(cli.config.as_deref(), &overrides)?;
    match cli.cmd {
        Cmd::SynthData => synth_data(&cfg),
        Cmd::Train {
            stage,
            from,
            shortcut_generator,
        } => train(&cfg, &stage, from.as_deref(), shortcut_generator.as_deref()),
        Cmd::Eval { mode, checkpoint, .. } => eval(&cfg, mode.parse()?, checkpoint.as_deref()),
        Cmd::Infer {
            source,
            room,
            descriptor,
            out,
            anechoic,
            checkpoint,
        } => infer(&cfg, &source, room, descriptor.as_deref(), &out, anechoic, checkpoint.as_deref()),
        Cmd::Metrics { wavs, checkpoint } => metrics(&cfg, &wavs, checkpoint.as_deref()),
        Cmd::Config => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    }
}

fn toml_str(p: &Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

fn synth_data(cfg: &Config) -> Result<()> {
    let m = build_dataset(&cfg.dataset, &cfg.data_dir)?;
    eprintln!("wrote {} clips to {}", m.entries.len(), cfg.data_dir.display());
    Ok(())
}

/// Rolling run state; a copy is also kept after every finished stage.
fn current(cfg: &Config) -> PathBuf {
    cfg.run_dir.join("checkpoint.safetensors")
}

fn train(cfg: &Config, stage: &str, from: Option<&Path>, shortcut: Option<&Path>) -> Result<()> {
    let store = AudioStore::new(DatasetManifest::load(&cfg.data_dir)?);
    std::fs::create_dir_all(&cfg.run_dir).map_err(|e| Error::Io {
        path: cfg.run_dir.clone(),
        source: e,
    })?;
    let ck = current(cfg);
    let state = match from {
        Some(p) => load_checkpoint(p)?.0,
        None if ck.exists() => load_checkpoint(&ck)?.0,
        None => RunState::new(&cfg.train),
    };
    let tc = &cfg.train;
    let mut t = Trainer::new(tc.clone(), &store, state)?.with_log(cfg.run_dir.join("train_log.csv"));
    let stages: Vec<Stage> = match stage {
        "all" => Stage::ALL.to_vec(),
        n => vec![Stage::from_number(n.parse().map_err(|_| Error::Config(format!("bad stage `{n}`")))?)?],
    };
    if stage == "all" || stages[0] == Stage::One {
        t.prepare()?;
        save_checkpoint(&t.state, tc, cfg.run_dir.join("prereq.safetensors"))?;
    }
    if let Some(p) = shortcut {
        t.shortcut_generator(p)?;
    }
    for s in stages {
        if t.state.has_completed(s) {
            eprintln!("{s} already complete, skipping");
            continue;
        }
        let total = match s {
            Stage::One => tc.stage1.epochs,
            Stage::Two => tc.stage2.epochs,
            Stage::Three => tc.stage3.gan.epochs,
        };
        let start = t.state.active.filter(|a| a.0 == s).map_or(0, |a| a.1);
        for e in start + 1..=total {
            let out = t.run_epochs(s, e);
            save_checkpoint(&t.state, tc, &ck)?;
            out?;
            if let Some(r) = t.state.history.last() {
                eprintln!("{s} epoch {e}/{total}: {}", serde_json::to_string(r).unwrap_or_default());
            }
        }
        t.run_stage(s)?;
        save_checkpoint(&t.state, tc, &ck)?;
        save_checkpoint(&t.state, tc, cfg.run_dir.join(format!("{}.safetensors", s.label())))?;
    }
    Ok(())
}

fn load_trained(cfg: &Config, checkpoint: Option<&Path>) -> Result<RunState> {
    let path = checkpoint.map_or_else(|| current(cfg), Path::to_path_buf);
    if !path.exists() {
        return Err(Error::StagedDependency(format!("no checkpoint at {}; run `vam train` first", path.display())));
    }
    Ok(load_checkpoint(&path)?.0)
}

fn eval(cfg: &Config, mode: EvalMode, checkpoint: Option<&Path>) -> Result<()> {
    let state = load_trained(cfg, checkpoint)?;
    let system = System::from_state(&state)?;
    let store = AudioStore::new(DatasetManifest::load(&cfg.data_dir)?);
    store.enter_phase("eval", false);
    let spec = cfg.eval_spec(mode)?;
    let out = evaluate(&system, &store, &spec)?;
    let dir = cfg.run_dir.join("eval");
    let files = out.write_csvs(&dir, &format!("{}_{}", mode.name(), spec.variant.name()))?;
    println!("{}", vam::eval::EvalOutcome::report_header().join(","));
    println!("{}", out.report_row().join(","));
    eprintln!("wrote {}", files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>().join(", "));
    Ok(())
}

fn parse_descriptor(path: &Path) -> Result<SceneDescriptor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f32>().map_err(|_| Error::Config(format!("{}: `{s}` is not a number", path.display()))))
        .collect::<Result<Vec<_>>>()?;
    SceneDescriptor::new(values)
}

fn infer(
    cfg: &Config,
    source: &Path,
    room: Option<u32>,
    descriptor: Option<&Path>,
    out: &Path,
    anechoic: bool,
    checkpoint: Option<&Path>,
) -> Result<()> {
    let audio = read_wav(source)?;
    let desc = match (room, descriptor) {
        (_, Some(p)) => parse_descriptor(p)?,
        (Some(id), None) => DatasetManifest::load(&cfg.data_dir)?
            .entries
            .iter()
            .find(|e| e.room_id == id)
            .map(|e| e.descriptor.clone())
            .ok_or_else(|| Error::Manifest(format!("room {id} is not in the manifest")))?,
        (None, None) => return Err(Error::Config("need --room or --descriptor".into())),
    };
    let state = load_trained(cfg, checkpoint)?;
    let kind = if anechoic {
        SourceKind::Anechoic
    } else {
        SourceKind::Reverberant
    };
    let y = System::from_state(&state)?.infer(&audio.samples, kind, desc.as_slice())?;
    write_wav(out, &Waveform::new(y)?)
}

fn metrics(cfg: &Config, wavs: &[PathBuf], checkpoint: Option<&Path>) -> Result<()> {
    let [a, b] = wavs else {
        return Err(Error::Config(format!("metrics takes exactly two --wav, got {}", wavs.len())));
    };
    let (a, b) = (read_wav(a)?.samples, read_wav(b)?.samples);
    let state = load_trained_estimator(cfg, checkpoint)?;
    let est = &state.estimator;
    let (ra, rb) = (est.estimate_seconds(&a)?, est.estimate_seconds(&b)?);
    let cells = [
        (ra - rb).abs(),
        stft_error(&a, &b)?,
        log_stft_error(&a, &b)?,
        ra,
        rb,
        srmr(&a)?,
        srmr(&b)?,
    ];
    println!("rte,stft_err,log_stft_err,rt60_a,rt60_b,srmr_a,srmr_b");
    println!("{}", cells.map(|v| v.to_string()).join(","));
    Ok(())
}

/// Any checkpoint with a trained estimator will do, including `prereq`.
fn load_trained_estimator(cfg: &Config, checkpoint: Option<&Path>) -> Result<RunState> {
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => [current(cfg), cfg.run_dir.join("prereq.safetensors")]
            .into_iter()
            .find(|p| p.exists())
            .ok_or_else(|| Error::StagedDependency(format!("no checkpoint in {}", cfg.run_dir.display())))?,
    };
    let state = load_checkpoint(&path)?.0;
    if !state.estimator.is_trained() {
        return Err(Error::StagedDependency("checkpoint has no trained RT60 estimator".into()));
    }
    Ok(state)
}
