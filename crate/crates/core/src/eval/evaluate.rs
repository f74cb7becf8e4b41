use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::infer::{SourceKind, System, Variant};
use crate::dsp::{convolve_rir, quantize_pcm16, write_wav, Waveform};
use crate::error::{Error, Result};
use crate::metrics::{log_stft_error, stft_error, MetricReport, MetricSample};
use crate::rng::{rng_for, tag};
use crate::synth::{AudioStore, DatasetManifest, ManifestEntry, Split};

use rand::Rng;

/// RT60 histogram bin width in seconds; the last of [`HIST_BINS`] bins is open.
pub const HIST_BIN: f64 = 0.1;
pub const HIST_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Test audio with train-split rooms.
    Seen,
    /// Test audio with other test-split rooms.
    Unseen,
    /// Anechoic test sources with test-split rooms.
    Cross,
}

impl EvalMode {
    pub const ALL: [EvalMode; 3] = [EvalMode::Seen, EvalMode::Unseen, EvalMode::Cross];

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Seen => "seen",
            EvalMode::Unseen => "unseen",
            EvalMode::Cross => "cross",
        }
    }

    fn target_split(self) -> Split {
        match self {
            EvalMode::Seen => Split::Train,
            EvalMode::Unseen | EvalMode::Cross => Split::Test,
        }
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EvalMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown eval mode `{s}` (seen|unseen|cross)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    Rte,
    Stft,
    LogStft,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Rte, MetricKind::Stft, MetricKind::LogStft];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Rte => "rte",
            MetricKind::Stft => "stft",
            MetricKind::LogStft => "log_stft",
        }
    }

    fn needs_ground_truth(self) -> bool {
        self != MetricKind::Rte
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}` (rte|stft|log_stft)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSpec {
    pub mode: EvalMode,
    pub variant: Variant,
    /// RTE is always computed; the spectral errors need ground truth.
    pub metrics: Vec<MetricKind>,
    /// Evaluate only the first `limit` sources.
    pub limit: Option<usize>,
    /// Seeds the source/target pairing.
    pub seed: u64,
    /// Write `pred/<n>.wav` and `target/<n>.wav` here when set.
    pub dump_dir: Option<PathBuf>,
}

impl EvalSpec {
    pub fn new(mode: EvalMode) -> Self {
        Self {
            mode,
            variant: Variant::Visual,
            metrics: vec![MetricKind::Rte, MetricKind::Stft, MetricKind::LogStft],
            limit: None,
            seed: 0,
            dump_dir: None,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }
}

/// One source clip and the scene it is matched to.
#[derive(Clone, Copy, Debug)]
pub struct EvalPair<'m> {
    pub source: &'m ManifestEntry,
    pub target: &'m ManifestEntry,
    pub kind: SourceKind,
}

/// Deterministic pairing for `mode`. Unseen and cross targets come from a
/// different test room than the source.
pub fn eval_pairs(manifest: &DatasetManifest, mode: EvalMode, seed: u64) -> Result<Vec<EvalPair<'_>>> {
    let sources = manifest.split(Split::Test);
    let targets = manifest.split(mode.target_split());
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::Manifest(format!(
            "{} evaluation needs test sources and {} targets",
            mode.name(),
            mode.target_split()
        )));
    }
    let kind = match mode {
        EvalMode::Cross => SourceKind::Anechoic,
        _ => SourceKind::Reverberant,
    };
    let mut out = Vec::with_capacity(sources.len());
    for (i, s) in sources.iter().enumerate() {
        let eligible: Vec<&&ManifestEntry> = targets.iter().filter(|t| t.room_id != s.room_id).collect();
        if eligible.is_empty() {
            return Err(Error::Manifest(format!("no target room other than {} for {}", s.room_id, s.id)));
        }
        let mut rng = rng_for(seed, &[tag("eval-pair"), tag(mode.name()), i as u64]);
        let t = eligible[rng.random_range(0..eligible.len())];
        if kind == SourceKind::Anechoic && s.source_wav.is_none() {
            return Err(Error::Manifest(format!("{} has no anechoic source for cross evaluation", s.id)));
        }
        out.push(EvalPair {
            source: s,
            target: t,
            kind,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub index: usize,
    pub source_id: String,
    pub target_id: String,
    pub source_room: u32,
    pub target_room: u32,
    pub rt60_true: f64,
    pub rt_pred: f64,
    pub rt_target: f64,
    pub rte: f64,
    pub stft_err: Option<f64>,
    pub log_stft_err: Option<f64>,
}

pub const SAMPLES_HEADER: [&str; 11] = [
    "index",
    "source_id",
    "target_id",
    "source_room",
    "target_room",
    "rt60_true",
    "rt_pred",
    "rt_target",
    "rte",
    "stft_err",
    "log_stft_err",
];

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub mode: EvalMode,
    pub variant: Variant,
    pub records: Vec<EvalRecord>,
    pub report: MetricReport,
}

/// `source * RIR(target)`, when both files exist.
fn ground_truth(store: &AudioStore, pair: &EvalPair) -> Result<Option<Vec<f32>>> {
    if pair.source.source_wav.is_none() || pair.target.rir_wav.is_none() {
        return Ok(None);
    }
    let src = store.source(pair.source)?;
    let rir = store.rir(pair.target)?;
    Ok(Some(convolve_rir(&src, &rir).audio.samples))
}

/// Runs `system` over the pairs of `spec.mode`. Predictions and targets are
/// rounded to 16-bit PCM before scoring so dumped WAVs reproduce every number.
pub fn evaluate(system: &System, store: &AudioStore, spec: &EvalSpec) -> Result<EvalOutcome> {
    let mut pairs = eval_pairs(store.manifest(), spec.mode, spec.seed)?;
    if let Some(n) = spec.limit {
        pairs.truncate(n);
    }
    let spectral: BTreeSet<MetricKind> = spec.metrics.iter().copied().filter(|m| m.needs_ground_truth()).collect();
    if !spectral.is_empty() {
        if let Some(p) = pairs
            .iter()
            .find(|p| p.source.source_wav.is_none() || p.target.rir_wav.is_none())
        {
            let names: Vec<&str> = spectral.iter().map(|m| m.name()).collect();
            return Err(Error::UnsupportedMetric(format!(
                "{} needs ground-truth audio, which {} -> {} lacks",
                names.join(", "),
                p.source.id,
                p.target.id
            )));
        }
    }
    let est = system.estimator();
    let mut records = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let input = match pair.kind {
            SourceKind::Anechoic => store.source(pair.source)?,
            SourceKind::Reverberant => store.audio(pair.source)?,
        };
        let mut pred = system.run(spec.variant, &input.samples, pair.kind, pair.target.descriptor.as_slice())?;
        quantize_pcm16(&mut pred);
        let mut target = match ground_truth(store, pair)? {
            Some(gt) => gt,
            None => store.audio(pair.target)?.samples,
        };
        quantize_pcm16(&mut target);
        if let Some(dir) = &spec.dump_dir {
            write_wav(dir.join("pred").join(format!("{index:05}.wav")), &Waveform::new(pred.clone())?)?;
            write_wav(dir.join("target").join(format!("{index:05}.wav")), &Waveform::new(target.clone())?)?;
        }
        let rt_pred = est.estimate_seconds(&pred)?;
        let rt_target = est.estimate_seconds(&target)?;
        let stft = spectral.contains(&MetricKind::Stft).then(|| stft_error(&pred, &target)).transpose()?;
        let log_stft = spectral
            .contains(&MetricKind::LogStft)
            .then(|| log_stft_error(&pred, &target))
            .transpose()?;
        records.push(EvalRecord {
            index,
            source_id: pair.source.id.clone(),
            target_id: pair.target.id.clone(),
            source_room: pair.source.room_id,
            target_room: pair.target.room_id,
            rt60_true: pair.target.rt60_true,
            rt_pred,
            rt_target,
            rte: (rt_pred - rt_target).abs(),
            stft_err: stft,
            log_stft_err: log_stft,
        });
    }
    let samples: Vec<MetricSample> = records
        .iter()
        .map(|r| MetricSample {
            rt60_true: r.rt60_true,
            rte: r.rte,
            stft_err: r.stft_err.unwrap_or(f64::NAN),
            log_stft_err: r.log_stft_err.unwrap_or(f64::NAN),
        })
        .collect();
    Ok(EvalOutcome {
        mode: spec.mode,
        variant: spec.variant,
        report: MetricReport::from_samples(&samples),
        records,
    })
}

/// Bin counts of predicted and target RT60 estimates.
pub fn rt60_histogram(records: &[EvalRecord]) -> Vec<(f64, f64, usize, usize)> {
    let bin = |v: f64| ((v / HIST_BIN).floor().max(0.0) as usize).min(HIST_BINS - 1);
    let mut pred = [0usize; HIST_BINS];
    let mut target = [0usize; HIST_BINS];
    for r in records {
        pred[bin(r.rt_pred)] += 1;
        target[bin(r.rt_target)] += 1;
    }
    (0..HIST_BINS)
        .map(|i| {
            let hi = if i + 1 == HIST_BINS { f64::INFINITY } else { (i + 1) as f64 * HIST_BIN };
            (i as f64 * HIST_BIN, hi, pred[i], target[i])
        })
        .collect()
}

pub const REPORT_PREFIX: [&str; 2] = ["mode", "variant"];
pub const STRATA_HEADER: [&str; 3] = ["stratum", "count", "normalized_rte"];
pub const HISTOGRAM_HEADER: [&str; 4] = ["bin_lo", "bin_hi", "predicted", "target"];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Checkpoint(format!("{}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl EvalOutcome {
    pub fn report_header() -> Vec<String> {
        let mut h: Vec<String> = REPORT_PREFIX.map(String::from).to_vec();
        h.extend(MetricReport::csv_header());
        h
    }

    pub fn report_row(&self) -> Vec<String> {
        let mut r = vec![self.mode.name().to_string(), self.variant.name().to_string()];
        r.extend(self.report.csv_row());
        r
    }

    /// `<stem>_report.csv`, `<stem>_samples.csv`, `<stem>_strata.csv` and
    /// `<stem>_rt60_hist.csv` under `dir`; returns the paths written.
    pub fn write_csvs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let f = |v: f64| format!("{v:.6}");
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        let report = dir.join(format!("{stem}_report.csv"));
        write_rows(&report, &Self::report_header(), &[self.report_row()])?;

        let samples = dir.join(format!("{stem}_samples.csv"));
        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| {
                vec![
                    r.index.to_string(),
                    r.source_id.clone(),
                    r.target_id.clone(),
                    r.source_room.to_string(),
                    r.target_room.to_string(),
                    f(r.rt60_true),
                    f(r.rt_pred),
                    f(r.rt_target),
                    f(r.rte),
                    opt(r.stft_err),
                    opt(r.log_stft_err),
                ]
            })
            .collect();
        write_rows(&samples, &SAMPLES_HEADER.map(String::from), &rows)?;

        let strata = dir.join(format!("{stem}_strata.csv"));
        let rows: Vec<Vec<String>> = self
            .report
            .strata
            .iter()
            .map(|s| vec![s.label.clone(), s.count.to_string(), f(s.normalized_rte)])
            .collect();
        write_rows(&strata, &STRATA_HEADER.map(String::from), &rows)?;

        let hist = dir.join(format!("{stem}_rt60_hist.csv"));
        let rows: Vec<Vec<String>> = rt60_histogram(&self.records)
            .into_iter()
            .map(|(lo, hi, p, t)| vec![format!("{lo:.1}"), if hi.is_finite() { format!("{hi:.1}") } else { "inf".into() }, p.to_string(), t.to_string()])
            .collect();
        write_rows(&hist, &HISTOGRAM_HEADER.map(String::from), &rows)?;
        Ok(vec![report, samples, strata, hist])
    }
}
