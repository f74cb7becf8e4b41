use std::path::{Path, PathBuf};

use rand::Rng;
use vam_nn::{clip_grad_norm, Parameterized};

use super::config::{GanStageConfig, TrainConfig};
use super::data::{Pool, TrainData};
use super::state::{EpochRecord, Optimizers, RunState, Stage, Targets};
use crate::debias::{disc_loss_backward, gen_loss_grad, MetricNetworks, ReplayBuffer, ReplayEntry, Scored};
use crate::error::{Error, Result};
use crate::metrics::{labelled_clips, srmr_norm};
use crate::rng::{derive_seed, rng_for, tag};
use crate::synth::{AudioStore, Split, RT60_RANGE};

pub const LOG_HEADER: [&str; 11] = [
    "stage",
    "epoch",
    "d_loss",
    "g_loss",
    "visual_loss",
    "blind_loss",
    "mean_metric",
    "probe_gap",
    "buffer",
    "metric_calls",
    "copied",
];

#[derive(Default)]
struct DiscStats {
    loss: f64,
    metric: f64,
    calls: usize,
    visual: f64,
    blind: f64,
}

/// Sub-epoch boundaries reported to an observer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Discriminator,
    TargetCopy,
    Generator,
    Reverberators,
}

type Observer<'a> = Box<dyn FnMut(Stage, usize, Phase, &RunState) + 'a>;

/// Drives the three training stages over one [`RunState`].
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: TrainData<'a>,
    pub state: RunState,
    log: Option<PathBuf>,
    observer: Option<Observer<'a>>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, store: &'a AudioStore, state: RunState) -> Result<Self> {
        cfg.validate()?;
        let data = TrainData::new(store, cfg.probe_size, cfg.cache_limit)?;
        Ok(Self {
            cfg,
            data,
            state,
            log: None,
            observer: None,
        })
    }

    /// Call `f` with the state after every sub-epoch phase.
    pub fn with_observer(mut self, f: impl FnMut(Stage, usize, Phase, &RunState) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    fn notify(&mut self, stage: Stage, n: usize, phase: Phase) {
        if let Some(f) = self.observer.as_mut() {
            f(stage, n, phase, &self.state);
        }
    }

    /// Append one CSV row per epoch to `path`.
    pub fn with_log(mut self, path: impl Into<PathBuf>) -> Self {
        self.log = Some(path.into());
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    /// Train the RT60 estimator and the dereverberator unless already trained.
    /// The dereverberator is the only consumer of anechoic sources.
    pub fn prepare(&mut self) -> Result<()> {
        let store = self.data.store();
        store.enter_phase("prereq", false);
        if !self.state.estimator.is_trained() {
            let seed = derive_seed(self.cfg.seed, &[tag("estimator-clips")]);
            let clips = labelled_clips(self.cfg.prereq.estimator_clips, seed, RT60_RANGE)?;
            self.state.estimator.train(&clips, &self.cfg.prereq.estimator)?;
        }
        if !self.state.derev.is_trained() {
            let pairs = store
                .manifest()
                .split(Split::Paired)
                .into_iter()
                .take(self.cfg.prereq.derev_pairs)
                .map(|e| Ok((store.audio(e)?.samples, store.source(e)?.samples)))
                .collect::<Result<Vec<_>>>()?;
            self.state.derev.pretrain(&pairs)?;
        }
        Ok(())
    }

    /// Adopt the generator of an earlier run in place of stage 1.
    pub fn shortcut_generator(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let (other, _) = super::checkpoint::load_checkpoint(path)?;
        if !other.has_completed(Stage::One) {
            return Err(Error::StagedDependency("shortcut checkpoint has no stage-1 generator".into()));
        }
        self.state.generator.copy_params_from(&other.generator);
        self.state.discriminator.copy_params_from(&other.discriminator);
        self.state.completed = Some(Stage::One);
        self.state.active = None;
        Ok(())
    }

    fn stage_epochs(&self, stage: Stage) -> usize {
        match stage {
            Stage::One => self.cfg.stage1.epochs,
            Stage::Two => self.cfg.stage2.epochs,
            Stage::Three => self.cfg.stage3.gan.epochs,
        }
    }

    fn gan(&self, stage: Stage) -> &GanStageConfig {
        match stage {
            Stage::Three => &self.cfg.stage3.gan,
            _ => &self.cfg.stage1,
        }
    }

    fn check_ready(&self, stage: Stage) -> Result<()> {
        if !self.state.estimator.is_trained() || !self.state.derev.is_trained() {
            return Err(Error::StagedDependency(format!(
                "{stage} needs a trained RT60 estimator and dereverberator"
            )));
        }
        let needs = match stage {
            Stage::One => None,
            Stage::Two => Some(Stage::One),
            Stage::Three => Some(Stage::Two),
        };
        match needs {
            Some(prev) if !self.state.has_completed(prev) => Err(Error::StagedDependency(format!(
                "{stage} requires {prev} to be complete (last completed: {})",
                self.state.completed.map_or("none".to_string(), |s| s.to_string())
            ))),
            _ => Ok(()),
        }
    }

    fn begin(&mut self, stage: Stage) -> Result<()> {
        self.check_ready(stage)?;
        match self.state.active {
            Some((s, _)) if s == stage => return Ok(()),
            Some((s, _)) => return Err(Error::Contract(format!("{s} is in progress; finish it before {stage}"))),
            None => {}
        }
        self.state.optim = Optimizers::for_stage(&self.cfg, stage);
        self.state.diverged_epochs = 0;
        match stage {
            Stage::One => {}
            Stage::Two => self.data.clear_debiased(),
            Stage::Three => {
                self.state.targets = Some(Targets {
                    visual: self.state.visual.clone(),
                    blind: self.state.blind.clone(),
                });
                // Stored scores must come from the metric in use.
                self.state.replay = ReplayBuffer::new(self.cfg.replay_capacity);
            }
        }
        self.state.active = Some((stage, 0));
        Ok(())
    }

    fn finish(&mut self, stage: Stage) {
        match stage {
            Stage::Two => {
                self.state.visual.set_trained(true);
                self.state.blind.set_trained(true);
                self.data.clear_debiased();
            }
            Stage::Three => self.state.targets = None,
            Stage::One => {}
        }
        self.state.completed = Some(stage);
        self.state.active = None;
    }

    /// Run `stage` to completion, resuming it if it is in progress.
    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        self.run_epochs(stage, self.stage_epochs(stage))?;
        self.finish(stage);
        Ok(())
    }

    /// Prerequisites followed by all three stages.
    pub fn run_all(&mut self) -> Result<()> {
        self.prepare()?;
        for stage in Stage::ALL {
            if !self.state.has_completed(stage) {
                self.run_stage(stage)?;
            }
        }
        Ok(())
    }

    /// Run epochs of `stage` until `until` of them are done, leaving the
    /// stage open so it can be checkpointed and resumed.
    pub fn run_epochs(&mut self, stage: Stage, until: usize) -> Result<()> {
        let out = self.epochs_until(stage, until);
        self.data.store().enter_phase("idle", false);
        out
    }

    fn epochs_until(&mut self, stage: Stage, until: usize) -> Result<()> {
        self.begin(stage)?;
        let until = until.min(self.stage_epochs(stage));
        loop {
            let done = self.state.active.map_or(0, |(_, e)| e);
            if done >= until {
                return Ok(());
            }
            let rec = self.epoch(stage, done + 1)?;
            self.state.active = Some((stage, done + 1));
            if let Some(path) = &self.log {
                append_log(path, &rec)?;
            }
            let gap = rec.probe_gap;
            self.state.history.push(rec);
            if let Some(gap) = gap {
                if gap > self.cfg.divergence_threshold {
                    self.state.diverged_epochs += 1;
                } else {
                    self.state.diverged_epochs = 0;
                }
                if self.state.diverged_epochs >= self.cfg.divergence_patience {
                    return Err(Error::Divergence(format!(
                        "{stage}: mean |D - M| on the probe above {} for {} consecutive epochs (last {gap:.4})",
                        self.cfg.divergence_threshold, self.state.diverged_epochs
                    )));
                }
            }
        }
    }

    fn epoch(&mut self, stage: Stage, n: usize) -> Result<EpochRecord> {
        self.data.store().enter_phase(stage.label(), true);
        let mut rec = EpochRecord::new(stage, n);
        match stage {
            Stage::One | Stage::Three => {
                let d = self.disc_epoch(stage, n)?;
                rec.d_loss = Some(d.loss);
                rec.mean_metric = Some(d.metric);
                rec.metric_calls = d.calls;
                self.notify(stage, n, Phase::Discriminator);
                if stage == Stage::Three {
                    rec.visual_loss = Some(d.visual);
                    rec.blind_loss = Some(d.blind);
                    if n % self.cfg.stage3.copy_period == 0 {
                        self.copy_targets();
                        rec.copied = true;
                        self.notify(stage, n, Phase::TargetCopy);
                    }
                }
                rec.g_loss = Some(self.gen_epoch(stage, n)?);
                self.notify(stage, n, Phase::Generator);
                rec.probe_gap = self.probe_gap(stage)?;
                rec.buffer = self.state.replay.len();
            }
            Stage::Two => {
                let (v, b) = self.reverb_epoch(n)?;
                self.notify(stage, n, Phase::Reverberators);
                rec.visual_loss = Some(v);
                rec.blind_loss = Some(b);
            }
        }
        Ok(rec)
    }

    /// Copy the target reverberators into the metric networks.
    fn copy_targets(&mut self) {
        let t = self.state.targets.as_ref().expect("targets exist during stage 3");
        self.state.visual.copy_params_from(&t.visual);
        self.state.blind.copy_params_from(&t.blind);
    }

    /// Metric scores of `clips`, one evaluation each.
    fn score(&mut self, stage: Stage, pool: Pool, idx: &[usize], clips: &[&[f32]]) -> Result<Vec<f64>> {
        match stage {
            Stage::Three => {
                let rts = idx
                    .iter()
                    .map(|&i| self.data.target_rt60(pool, i, &self.state.estimator))
                    .collect::<Result<Vec<_>>>()?;
                let net = MetricNetworks::new(
                    &self.state.visual,
                    &self.state.blind,
                    &self.state.estimator,
                    self.cfg.stage3.metric,
                )?;
                clips
                    .iter()
                    .zip(idx)
                    .zip(&rts)
                    .map(|((c, &i), &rt)| net.combined(c, self.data.descriptor(pool, i), rt))
                    .collect()
            }
            _ => clips.iter().map(|c| srmr_norm(c)).collect(),
        }
    }

    fn disc_epoch(&mut self, stage: Stage, n: usize) -> Result<DiscStats> {
        let gan = self.gan(stage).clone();
        let seed = self.cfg.seed;
        let idx = self
            .data
            .epoch_indices(seed, &format!("{stage}-disc"), n, gan.samples_per_epoch);
        let mut st = DiscStats::default();
        for (b, batch) in idx.chunks(gan.batch_size).enumerate() {
            let xs = batch
                .iter()
                .map(|&i| self.data.dereverberated(Pool::Train, i, &self.state.derev))
                .collect::<Result<Vec<_>>>()?;
            let xr: Vec<&[f32]> = xs.iter().map(|v| v.as_slice()).collect();
            let gs = self.state.generator.forward_batch(&xr)?;
            let gr: Vec<&[f32]> = gs.iter().map(|v| v.as_slice()).collect();

            // Scores come from the metric networks as they stand before this
            // batch's target updates.
            let sx = self.score(stage, Pool::Train, batch, &xr)?;
            let sg = self.score(stage, Pool::Train, batch, &gr)?;
            st.calls += sx.len() + sg.len();
            st.metric += sg.iter().sum::<f64>();

            let scale = 1.0 / batch.len() as f32;
            let mut rng = rng_for(seed, &[tag(stage.label()), n as u64, tag("replay"), b as u64]);
            let RunState {
                discriminator,
                replay,
                optim,
                ..
            } = &mut self.state;
            discriminator.zero_grad();
            {
                let hist = replay.sample(&mut rng, batch.len());
                for i in 0..batch.len() {
                    let terms = disc_loss_backward(
                        discriminator,
                        Scored { audio: xr[i], score: sx[i] },
                        Scored { audio: gr[i], score: sg[i] },
                        hist.get(i).map(|e| Scored { audio: &e.audio, score: e.score }),
                        scale,
                    )?;
                    st.loss += terms.total();
                }
            }
            clip_grad_norm(discriminator, self.cfg.grad_clip);
            optim.discriminator.step(discriminator);
            if rng.random_bool(self.cfg.replay_push_rate) {
                for (audio, &score) in gs.iter().zip(&sg) {
                    replay.push(ReplayEntry {
                        audio: audio.clone(),
                        score,
                        epoch: n,
                    });
                }
            }

            if stage == Stage::Three {
                let targets = self.state.targets.as_mut().expect("targets exist during stage 3");
                targets.visual.zero_grad();
                targets.blind.zero_grad();
                for (k, &i) in batch.iter().enumerate() {
                    let a_t = self.data.target(Pool::Train, i)?;
                    let tf = targets.visual.target_features(&a_t)?;
                    let v = self.data.descriptor(Pool::Train, i);
                    st.visual += targets.visual.accumulate(gr[k], Some(v), &tf, scale)? as f64;
                    st.blind += targets.blind.accumulate(gr[k], None, &tf, scale)? as f64;
                }
                clip_grad_norm(&mut targets.visual, self.cfg.grad_clip);
                clip_grad_norm(&mut targets.blind, self.cfg.grad_clip);
                self.state.optim.visual.step(&mut targets.visual);
                self.state.optim.blind.step(&mut targets.blind);
            }
        }
        let count = idx.len().max(1) as f64;
        st.loss /= count;
        st.metric /= count;
        st.visual /= count;
        st.blind /= count;
        Ok(st)
    }

    fn gen_epoch(&mut self, stage: Stage, n: usize) -> Result<f64> {
        let gan = self.gan(stage).clone();
        let idx = self
            .data
            .epoch_indices(self.cfg.seed, &format!("{stage}-gen"), n, gan.samples_per_epoch);
        let mut total = 0.0;
        for batch in idx.chunks(gan.batch_size) {
            let xs = batch
                .iter()
                .map(|&i| self.data.dereverberated(Pool::Train, i, &self.state.derev))
                .collect::<Result<Vec<_>>>()?;
            let xr: Vec<&[f32]> = xs.iter().map(|v| v.as_slice()).collect();
            let RunState {
                generator,
                discriminator,
                optim,
                ..
            } = &mut self.state;
            let cache = generator.forward_masks(&xr)?;
            let scale = 1.0 / batch.len() as f32;
            let mut dys = Vec::with_capacity(batch.len());
            for y in generator.outputs(&cache) {
                // D's parameters and gradients are untouched here.
                let (loss, mut dy) = gen_loss_grad(discriminator, &y)?;
                dy.iter_mut().for_each(|v| *v *= scale);
                total += loss;
                dys.push(dy);
            }
            generator.zero_grad();
            generator.backward(&cache, &dys);
            clip_grad_norm(generator, self.cfg.grad_clip);
            optim.generator.step(generator);
        }
        Ok(total / idx.len().max(1) as f64)
    }

    /// Mean `|D(G(x)) - M(G(x))|` over the validation probe.
    fn probe_gap(&mut self, stage: Stage) -> Result<Option<f64>> {
        let n = self.data.probe_len();
        if n == 0 {
            return Ok(None);
        }
        let mut gap = 0.0;
        for i in 0..n {
            let x = self.data.dereverberated(Pool::Probe, i, &self.state.derev)?;
            let g = self.state.generator.forward(&x)?;
            let m = self.score(stage, Pool::Probe, &[i], &[&g])?[0];
            gap += (self.state.discriminator.score(&g)? as f64 - m).abs();
        }
        Ok(Some(gap / n as f64))
    }

    fn reverb_epoch(&mut self, n: usize) -> Result<(f64, f64)> {
        let c = self.cfg.stage2.clone();
        let idx = self.data.epoch_indices(self.cfg.seed, "stage2", n, c.samples_per_epoch);
        let (mut lv, mut lb) = (0.0, 0.0);
        for batch in idx.chunks(c.batch_size) {
            let inputs = self.data.debiased(batch, &self.state.derev, &self.state.generator)?;
            let RunState {
                visual, blind, optim, ..
            } = &mut self.state;
            visual.zero_grad();
            blind.zero_grad();
            let scale = 1.0 / batch.len() as f32;
            for (x, &i) in inputs.iter().zip(batch) {
                let a_t = self.data.target(Pool::Train, i)?;
                let tf = visual.target_features(&a_t)?;
                let v = self.data.descriptor(Pool::Train, i);
                lv += visual.accumulate(x, Some(v), &tf, scale)? as f64;
                lb += blind.accumulate(x, None, &tf, scale)? as f64;
            }
            clip_grad_norm(visual, self.cfg.grad_clip);
            clip_grad_norm(blind, self.cfg.grad_clip);
            optim.visual.step(visual);
            optim.blind.step(blind);
        }
        let count = idx.len().max(1) as f64;
        Ok((lv / count, lb / count))
    }
}

/// Append `rec` to a CSV log, writing the header for a new file.
pub fn append_log(path: &Path, rec: &EpochRecord) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |e: csv::Error| Error::Checkpoint(format!("{}: {e}", path.display()));
    if fresh {
        w.write_record(LOG_HEADER).map_err(csv_err)?;
    }
    w.serialize(rec).map_err(csv_err)?;
    w.flush().map_err(|e| Error::io(path, e))
}
