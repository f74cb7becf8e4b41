use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
profile = "desk"

[dataset]
train = 8
val = 2
test = 6
paired = 4
samples_per_room = 2
seed = 3

[train]
probe_size = 2
replay_push_rate = 1.0
divergence_patience = 1000

[train.prereq]
estimator_clips = 12
derev_pairs = 4
estimator = { epochs = 1, batch_size = 6 }
derev = { epochs = 1, trunk = { channels = 6, blocks = 2, dilations = [1, 2] } }

[train.generator]
hidden = 6
layers = 1
fc_hidden = 8

[train.discriminator]
conv_layers = 2
channels = 3
kernel = 3
fc = [4]

[train.reverb]
fusion_hidden = 4
head_hidden = 4
trunk = { channels = 6, blocks = 2, dilations = [1, 2] }

[train.stage1]
epochs = 2
samples_per_epoch = 4
batch_size = 2

[train.stage2]
epochs = 2
samples_per_epoch = 4
batch_size = 2

[train.stage3]
copy_period = 2
gan = { epochs = 2, samples_per_epoch = 4, batch_size = 2 }
"#;

fn vam(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vam"))
        .current_dir(dir)
        .arg("--config")
        .arg("tiny.toml")
        .args(args)
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Last stderr line parsed as the machine-readable error.
fn error_kind(o: &Output) -> String {
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {line}"));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.toml"), TINY).unwrap();

    assert_eq!(error_kind(&vam(dir, &["eval", "--mode", "unseen"])), "staged_dependency");
    ok(&vam(dir, &["synth-data"]));
    assert!(dir.join("data/manifest.csv").exists());
    ok(&vam(dir, &["train", "--stage", "1"]));
    assert!(dir.join("run/stage1.safetensors").exists());
    assert_eq!(error_kind(&vam(dir, &["eval", "--mode", "unseen"])), "staged_dependency");
    ok(&vam(dir, &["train", "--stage", "all"]));
    for f in ["prereq", "stage2", "stage3", "checkpoint"] {
        assert!(dir.join(format!("run/{f}.safetensors")).exists(), "{f}");
    }
    let log = std::fs::read_to_string(dir.join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2 + 2 + 2);

    let out = ok(&vam(dir, &["eval", "--mode", "unseen", "--dump-wavs"]));
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("mode,variant,count,rte"));
    assert!(lines.next().unwrap().starts_with("unseen,visual,6,"));
    for s in ["report", "samples", "strata", "rt60_hist"] {
        assert!(dir.join(format!("run/eval/unseen_visual_{s}.csv")).exists(), "{s}");
    }
    assert!(dir.join("run/eval/wavs/unseen/pred/00000.wav").exists());
    let again = ok(&vam(dir, &["eval", "--mode", "unseen", "--dump-wavs"]));
    assert_eq!(out, again);
    ok(&vam(dir, &["eval", "--mode", "seen", "--variant", "blind", "--limit", "2"]));
    ok(&vam(dir, &["eval", "--mode", "cross", "--set", "eval.metrics=[\"rte\"]"]));

    let wav = "data/audio/test-00000.wav";
    assert!(dir.join(wav).exists());
    ok(&vam(dir, &["infer", "--source", wav, "--room", "0", "--out", "o1.wav"]));
    std::fs::write(dir.join("desc.txt"), "0.5, 0.5, 0.5, 0.5\n0.5 0.5 0.5 0.5").unwrap();
    ok(&vam(dir, &["infer", "--source", wav, "--descriptor", "desc.txt", "--anechoic", "--out", "o2.wav"]));
    assert!(dir.join("o1.wav").exists() && dir.join("o2.wav").exists());

    assert_eq!(error_kind(&vam(dir, &["infer", "--source", "missing.wav", "--room", "0", "--out", "o3.wav"])), "io");
    assert!(!dir.join("o3.wav").exists());

    let m = ok(&vam(dir, &["metrics", "--wav", "o1.wav", "--wav", "o1.wav"]));
    let row: Vec<f64> = m.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(&row[..3], &[0.0, 0.0, 0.0]);

    // Later stages are already done; nothing reruns.
    ok(&vam(dir, &["train", "--stage", "3"]));
    assert_eq!(std::fs::read_to_string(dir.join("run/train_log.csv")).unwrap(), log);
}

#[test]
fn bad_input_gives_a_json_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.toml"), TINY).unwrap();
    assert_eq!(error_kind(&vam(dir, &["synth-data", "--bogus"])), "usage");
    assert_eq!(error_kind(&vam(dir, &["train", "--stage", "4"])), "usage");
    assert_eq!(error_kind(&vam(dir, &["config", "--set", "train.stage1.lr_g=0"])), "config");
    assert_eq!(error_kind(&vam(dir, &["config", "--set", "typo_key=1"])), "config");
    assert_eq!(error_kind(&vam(dir, &["train", "--stage", "1"])), "manifest");
    std::fs::write(dir.join("broken.toml"), "profile = [").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vam"))
        .current_dir(dir)
        .args(["--config", "broken.toml", "config"])
        .output()
        .unwrap();
    assert_eq!(error_kind(&o), "config");
}

#[test]
fn config_prints_resolved_toml() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.toml"), TINY).unwrap();
    let text = ok(&vam(dir, &["config", "--set", "train.stage3.metric.alpha=1.0", "--run-dir", "elsewhere"]));
    let v: toml::Table = text.parse().unwrap();
    assert_eq!(v["train"]["stage3"]["metric"]["alpha"].as_float(), Some(1.0));
    assert_eq!(v["train"]["generator"]["hidden"].as_integer(), Some(6));
    assert_eq!(v["run_dir"].as_str(), Some("elsewhere"));
}
