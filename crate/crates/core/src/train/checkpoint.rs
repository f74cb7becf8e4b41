use std::collections::HashMap;
use std::path::Path;

use safetensors::tensor::TensorView;
use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};
use vam_nn::{Adam, Parameterized};

use super::config::TrainConfig;
use super::state::{EpochRecord, RunState, Stage, Targets};
use crate::debias::ReplayEntry;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct AdamMeta {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    slots: usize,
}

#[derive(Serialize, Deserialize)]
struct ReplayMeta {
    score: f64,
    epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    completed: Option<u8>,
    active: Option<(u8, usize)>,
    diverged_epochs: usize,
    trained: HashMap<String, bool>,
    optim: HashMap<String, AdamMeta>,
    replay_capacity: usize,
    replay: Vec<ReplayMeta>,
    history: Vec<EpochRecord>,
    config: TrainConfig,
}

/// Named tensor data awaiting serialisation.
#[derive(Default)]
struct Tensors {
    items: Vec<(String, Dtype, Vec<usize>, Vec<u8>)>,
}

impl Tensors {
    fn f32(&mut self, name: String, shape: Vec<usize>, v: &[f32]) {
        let bytes = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        self.items.push((name, Dtype::F32, shape, bytes));
    }

    fn f64(&mut self, name: String, v: &[f64]) {
        let bytes = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        self.items.push((name, Dtype::F64, vec![v.len()], bytes));
    }

    fn model<M: Parameterized<f32>>(&mut self, prefix: &str, m: &M) {
        for (name, p) in m.named_params() {
            self.f32(format!("{prefix}.{name}"), p.shape().to_vec(), &p.value);
        }
    }

    fn adam(&mut self, prefix: &str, a: &Adam) -> AdamMeta {
        for (i, (m, v)) in a.m.iter().zip(&a.v).enumerate() {
            self.f64(format!("optim.{prefix}.m.{i}"), m);
            self.f64(format!("optim.{prefix}.v.{i}"), v);
        }
        AdamMeta {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            step: a.step,
            slots: a.m.len(),
        }
    }
}

fn ckpt_err(e: impl std::fmt::Display) -> Error {
    Error::Checkpoint(e.to_string())
}

/// Write the full run state together with the configuration that built it.
pub fn save_checkpoint(state: &RunState, cfg: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut t = Tensors::default();
    t.model("estimator", &state.estimator);
    t.model("derev", &state.derev);
    t.model("generator", &state.generator);
    t.model("discriminator", &state.discriminator);
    t.model("visual", &state.visual);
    t.model("blind", &state.blind);
    if let Some(tg) = &state.targets {
        t.model("visual_target", &tg.visual);
        t.model("blind_target", &tg.blind);
    }
    let mut optim = HashMap::new();
    optim.insert("generator".into(), t.adam("generator", &state.optim.generator));
    optim.insert("discriminator".into(), t.adam("discriminator", &state.optim.discriminator));
    optim.insert("visual".into(), t.adam("visual", &state.optim.visual));
    optim.insert("blind".into(), t.adam("blind", &state.optim.blind));
    let mut replay = Vec::new();
    for (i, e) in state.replay.iter().enumerate() {
        t.f32(format!("replay.{i:05}"), vec![e.audio.len()], &e.audio);
        replay.push(ReplayMeta {
            score: e.score,
            epoch: e.epoch,
        });
    }
    let trained = HashMap::from([
        ("estimator".to_string(), state.estimator.is_trained()),
        ("derev".to_string(), state.derev.is_trained()),
        ("visual".to_string(), state.visual.is_trained()),
        ("blind".to_string(), state.blind.is_trained()),
    ]);
    let header = Header {
        version: CHECKPOINT_VERSION,
        completed: state.completed.map(Stage::number),
        active: state.active.map(|(s, e)| (s.number(), e)),
        diverged_epochs: state.diverged_epochs,
        trained,
        optim,
        replay_capacity: state.replay.capacity(),
        replay,
        history: state.history.clone(),
        config: cfg.clone(),
    };
    let meta = HashMap::from([("vam".to_string(), serde_json::to_string(&header).map_err(ckpt_err)?)]);
    let views = t
        .items
        .iter()
        .map(|(n, d, s, b)| Ok((n.clone(), TensorView::new(*d, s.clone(), b).map_err(ckpt_err)?)))
        .collect::<Result<Vec<_>>>()?;
    let bytes = safetensors::serialize(views, Some(meta)).map_err(ckpt_err)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn f32s(view: &TensorView<'_>) -> Result<Vec<f32>> {
    if view.dtype() != Dtype::F32 {
        return Err(Error::Checkpoint(format!("expected F32 tensor, found {:?}", view.dtype())));
    }
    Ok(view.data().chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

fn f64s(view: &TensorView<'_>) -> Result<Vec<f64>> {
    if view.dtype() != Dtype::F64 {
        return Err(Error::Checkpoint(format!("expected F64 tensor, found {:?}", view.dtype())));
    }
    Ok(view.data().chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn load_model<M: Parameterized<f32>>(st: &SafeTensors<'_>, prefix: &str, m: &mut M) -> Result<()> {
    let mut values = HashMap::new();
    for (name, _) in m.named_params() {
        let view = st
            .tensor(&format!("{prefix}.{name}"))
            .map_err(|e| Error::Checkpoint(format!("{prefix}.{name}: {e}")))?;
        values.insert(name, f32s(&view)?);
    }
    m.load_named(&values).map_err(Error::Checkpoint)
}

fn load_adam(st: &SafeTensors<'_>, prefix: &str, meta: &AdamMeta) -> Result<Adam> {
    let mut a = Adam::new(meta.lr);
    a.beta1 = meta.beta1;
    a.beta2 = meta.beta2;
    a.eps = meta.eps;
    a.step = meta.step;
    for i in 0..meta.slots {
        let get = |k: &str| -> Result<Vec<f64>> {
            let name = format!("optim.{prefix}.{k}.{i}");
            f64s(&st.tensor(&name).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?)
        };
        a.m.push(get("m")?);
        a.v.push(get("v")?);
    }
    Ok(a)
}

/// Restore a run state and its configuration. Unknown versions are rejected.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(RunState, TrainConfig)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (_, metadata) = SafeTensors::read_metadata(&bytes).map_err(ckpt_err)?;
    let raw = metadata
        .metadata()
        .as_ref()
        .and_then(|m| m.get("vam"))
        .ok_or_else(|| Error::Checkpoint(format!("{} carries no run header", path.display())))?;
    let version: serde_json::Value = serde_json::from_str(raw).map_err(ckpt_err)?;
    let found = version.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header: Header = serde_json::from_str(raw).map_err(ckpt_err)?;
    let st = SafeTensors::deserialize(&bytes).map_err(ckpt_err)?;
    let cfg = header.config;
    let mut state = RunState::new(&cfg);
    load_model(&st, "estimator", &mut state.estimator)?;
    load_model(&st, "derev", &mut state.derev)?;
    load_model(&st, "generator", &mut state.generator)?;
    load_model(&st, "discriminator", &mut state.discriminator)?;
    load_model(&st, "visual", &mut state.visual)?;
    load_model(&st, "blind", &mut state.blind)?;
    if st.names().iter().any(|n| n.starts_with("visual_target.")) {
        let mut t = Targets {
            visual: state.visual.clone(),
            blind: state.blind.clone(),
        };
        load_model(&st, "visual_target", &mut t.visual)?;
        load_model(&st, "blind_target", &mut t.blind)?;
        state.targets = Some(t);
    }
    let flag = |k: &str| header.trained.get(k).copied().unwrap_or(false);
    state.estimator.set_trained(flag("estimator"));
    state.derev.set_trained(flag("derev"));
    state.visual.set_trained(flag("visual"));
    state.blind.set_trained(flag("blind"));
    if let Some(t) = &mut state.targets {
        t.visual.set_trained(flag("visual"));
        t.blind.set_trained(flag("blind"));
    }
    let adam = |k: &str| -> Result<Adam> {
        let meta = header
            .optim
            .get(k)
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer `{k}`")))?;
        load_adam(&st, k, meta)
    };
    state.optim.generator = adam("generator")?;
    state.optim.discriminator = adam("discriminator")?;
    state.optim.visual = adam("visual")?;
    state.optim.blind = adam("blind")?;
    state.replay = crate::debias::ReplayBuffer::new(header.replay_capacity.max(1));
    for (i, r) in header.replay.iter().enumerate() {
        let name = format!("replay.{i:05}");
        let audio = f32s(&st.tensor(&name).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?)?;
        state.replay.push(ReplayEntry {
            audio,
            score: r.score,
            epoch: r.epoch,
        });
    }
    state.completed = header.completed.map(Stage::from_number).transpose()?;
    state.active = header
        .active
        .map(|(s, e)| Stage::from_number(s).map(|s| (s, e)))
        .transpose()?;
    state.diverged_epochs = header.diverged_epochs;
    state.history = header.history;
    Ok((state, cfg))
}
