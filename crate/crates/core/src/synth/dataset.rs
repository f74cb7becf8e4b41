//! Persisted synthetic datasets: room-disjoint splits, a CSV manifest and an
//! audited audio store.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::descriptor::{encode_descriptor, SceneDescriptor, DESCRIPTOR_DIM};
use super::rir::synth_rir;
use super::room::{sample_distance, sample_room, Room, RoomSpec, RT60_RANGE};
use super::source::synth_source;
use crate::dsp::{convolve_rir, normalize_peak, read_wav, write_wav, Rir, Waveform, PEAK_TARGET};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
    /// Paired (reverberant, anechoic) pool for the off-the-shelf dereverberator.
    Paired,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::Test, Split::Paired];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Paired => "paired",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Manifest(format!("unknown split `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub paired: usize,
    pub samples_per_room: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train: 4000,
            val: 200,
            test: 500,
            paired: 400,
            samples_per_room: 10,
            seed: 7,
        }
    }
}

impl DatasetConfig {
    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
            Split::Paired => self.paired,
        }
    }

    pub fn rooms(&self, split: Split) -> usize {
        self.count(split).div_ceil(self.samples_per_room.max(1))
    }
}

/// One manifest record. Paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub room_id: u32,
    pub wav: String,
    pub descriptor: SceneDescriptor,
    pub rt60_true: f64,
    pub drr_true: f64,
    /// Anechoic source; evaluation and dereverberator pre-training only.
    pub source_wav: Option<String>,
    /// Impulse response used to render `wav`; evaluation only.
    pub rir_wav: Option<String>,
}

pub const MANIFEST_HEADER: [&str; 16] = [
    "id", "split", "room_id", "wav", "d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "rt60_true", "drr_true",
    "source_wav", "rir_wav",
];

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn room_ids(&self, split: Split) -> HashSet<u32> {
        self.entries.iter().filter(|e| e.split == split).map(|e| e.room_id).collect()
    }

    /// Errors when any room id appears in more than one split.
    pub fn check_room_disjoint(&self) -> Result<()> {
        let mut owner: HashMap<u32, Split> = HashMap::new();
        for e in &self.entries {
            if let Some(&s) = owner.get(&e.room_id) {
                if s != e.split {
                    return Err(Error::Build(format!(
                        "room {} appears in both {s} and {} splits",
                        e.room_id, e.split
                    )));
                }
            } else {
                owner.insert(e.room_id, e.split);
            }
        }
        Ok(())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn save(&self) -> Result<()> {
        let path = self.root.join(MANIFEST_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let werr = |e: csv::Error| Error::Manifest(e.to_string());
        w.write_record(MANIFEST_HEADER).map_err(werr)?;
        for e in &self.entries {
            let mut rec = vec![e.id.clone(), e.split.to_string(), e.room_id.to_string(), e.wav.clone()];
            rec.extend(e.descriptor.0.iter().map(|v| v.to_string()));
            rec.push(e.rt60_true.to_string());
            rec.push(e.drr_true.to_string());
            rec.push(e.source_wav.clone().unwrap_or_default());
            rec.push(e.rir_wav.clone().unwrap_or_default());
            w.write_record(&rec).map_err(werr)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let path = root.join(MANIFEST_FILE);
        let mut r = csv::Reader::from_path(&path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let header = r.headers().map_err(|e| Error::Manifest(e.to_string()))?.clone();
        if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
            return Err(Error::Manifest(format!("unexpected manifest header in {}", path.display())));
        }
        let mut entries = Vec::new();
        let mut ids = HashSet::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Manifest(e.to_string()))?;
            let bad = |field: &str| Error::Manifest(format!("record {}: invalid {field}", line + 1));
            let num = |i: usize, field: &str| rec[i].parse::<f64>().map_err(|_| bad(field));
            let descriptor = (0..DESCRIPTOR_DIM)
                .map(|k| rec[4 + k].parse::<f32>().map_err(|_| bad("descriptor")))
                .collect::<Result<Vec<_>>>()?;
            let opt = |s: &str| if s.is_empty() { None } else { Some(s.to_string()) };
            let entry = ManifestEntry {
                id: rec[0].to_string(),
                split: rec[1].parse()?,
                room_id: rec[2].parse().map_err(|_| bad("room_id"))?,
                wav: rec[3].to_string(),
                descriptor: SceneDescriptor(descriptor),
                rt60_true: num(12, "rt60_true")?,
                drr_true: num(13, "drr_true")?,
                source_wav: opt(&rec[14]),
                rir_wav: opt(&rec[15]),
            };
            if !ids.insert(entry.id.clone()) {
                return Err(Error::Manifest(format!("duplicate id `{}`", entry.id)));
            }
            entries.push(entry);
        }
        Ok(Self { root, entries })
    }
}

/// Everything produced when rendering one sample.
#[derive(Clone, Debug)]
pub struct RenderedSample {
    pub spec: RoomSpec,
    pub source: Waveform,
    pub rir: Rir,
    pub audio: Waveform,
    pub descriptor: SceneDescriptor,
}

/// `audio = source * rir` (peak-normalised), plus a descriptor of the scene.
pub fn render_sample<R: Rng + ?Sized>(room: &Room, rng: &mut R) -> Result<RenderedSample> {
    let spec = room.with_distance(sample_distance(rng, room));
    let rir = synth_rir(&spec, rng)?;
    let source = synth_source(rng);
    let audio = convolve_rir(&source, &rir).audio;
    let descriptor = encode_descriptor(&spec, rng);
    Ok(RenderedSample {
        spec,
        source,
        rir,
        audio,
        descriptor,
    })
}

/// Rooms of every split, drawn from independent streams. Ids are global.
pub fn sample_split_rooms(cfg: &DatasetConfig) -> Vec<(Split, u32, Room)> {
    let mut out = Vec::new();
    let mut next = 0u32;
    for split in Split::ALL {
        let mut rng = rng_for(cfg.seed, &[tag("rooms"), tag(split.name())]);
        for _ in 0..cfg.rooms(split) {
            out.push((split, next, sample_room(&mut rng, RT60_RANGE)));
            next += 1;
        }
    }
    out
}

fn rir_to_wave(r: &Rir) -> Waveform {
    let mut samples = r.samples.clone();
    normalize_peak(&mut samples, PEAK_TARGET);
    Waveform {
        samples,
        sample_rate: crate::dsp::SAMPLE_RATE,
    }
}

/// Render and persist all splits under `root`, writing `manifest.csv`.
pub fn build_dataset(cfg: &DatasetConfig, root: impl AsRef<Path>) -> Result<DatasetManifest> {
    if cfg.samples_per_room == 0 {
        return Err(Error::Config("samples_per_room must be positive".into()));
    }
    let root = root.as_ref().to_path_buf();
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let rooms = sample_split_rooms(cfg);
    let mut seen: HashMap<[u64; 4], Split> = HashMap::new();
    for (split, _, room) in &rooms {
        let key = [
            room.dims[0].to_bits(),
            room.dims[1].to_bits(),
            room.dims[2].to_bits(),
            room.mean_absorption.to_bits(),
        ];
        if let Some(other) = seen.insert(key, *split) {
            if other != *split {
                return Err(Error::Build(format!("identical room drawn for {other} and {split}")));
            }
        }
    }
    let mut entries = Vec::new();
    for split in Split::ALL {
        let split_rooms: Vec<&(Split, u32, Room)> = rooms.iter().filter(|r| r.0 == split).collect();
        for i in 0..cfg.count(split) {
            let (_, room_id, room) = split_rooms[i / cfg.samples_per_room];
            let mut rng = rng_for(cfg.seed, &[tag("sample"), tag(split.name()), i as u64]);
            let s = render_sample(room, &mut rng)?;
            let id = format!("{}-{i:05}", split.name());
            let wav = format!("audio/{id}.wav");
            let source_wav = format!("sources/{id}.wav");
            let rir_wav = format!("rirs/{id}.wav");
            write_wav(root.join(&wav), &s.audio)?;
            write_wav(root.join(&source_wav), &s.source)?;
            write_wav(root.join(&rir_wav), &rir_to_wave(&s.rir))?;
            entries.push(ManifestEntry {
                id,
                split,
                room_id: *room_id,
                wav,
                descriptor: s.descriptor,
                rt60_true: s.rir.rt60_true,
                drr_true: s.rir.drr_true,
                source_wav: Some(source_wav),
                rir_wav: Some(rir_wav),
            });
        }
    }
    let manifest = DatasetManifest { root, entries };
    manifest.check_room_disjoint()?;
    manifest.save()?;
    Ok(manifest)
}

/// What kind of file an [`AudioStore`] read touched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessKind {
    Audio,
    Source,
    Rir,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccessRecord {
    pub kind: AccessKind,
    pub path: PathBuf,
    /// Label of the phase that was active (e.g. `stage2`).
    pub phase: String,
}

/// Reads dataset audio and records every file access. Anechoic-source and
/// RIR reads can be forbidden for a phase, turning them into contract errors.
#[derive(Debug)]
pub struct AudioStore {
    manifest: DatasetManifest,
    log: Mutex<Vec<AccessRecord>>,
    phase: Mutex<(String, bool)>,
}

impl AudioStore {
    pub fn new(manifest: DatasetManifest) -> Self {
        Self {
            manifest,
            log: Mutex::new(Vec::new()),
            phase: Mutex::new(("setup".into(), false)),
        }
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    /// Enter a phase; with `self_supervised` set, source and RIR reads fail.
    pub fn enter_phase(&self, name: &str, self_supervised: bool) {
        *self.phase.lock().unwrap() = (name.to_string(), self_supervised);
    }

    fn record(&self, kind: AccessKind, rel: &str) -> Result<PathBuf> {
        let (phase, restricted) = self.phase.lock().unwrap().clone();
        let path = self.manifest.path(rel);
        self.log.lock().unwrap().push(AccessRecord {
            kind,
            path: path.clone(),
            phase: phase.clone(),
        });
        if restricted && kind != AccessKind::Audio {
            return Err(Error::Contract(format!(
                "{} opened during self-supervised phase `{phase}`",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn audio(&self, e: &ManifestEntry) -> Result<Waveform> {
        read_wav(self.record(AccessKind::Audio, &e.wav)?)
    }

    pub fn source(&self, e: &ManifestEntry) -> Result<Waveform> {
        let rel = e
            .source_wav
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("{} has no anechoic source", e.id)))?;
        read_wav(self.record(AccessKind::Source, rel)?)
    }

    /// The stored RIR (peak-normalised; only its shape is meaningful).
    pub fn rir(&self, e: &ManifestEntry) -> Result<Rir> {
        let rel = e
            .rir_wav
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("{} has no impulse response", e.id)))?;
        let w = read_wav(self.record(AccessKind::Rir, rel)?)?;
        let direct_delay = w
            .samples
            .iter()
            .enumerate()
            .fold((0, 0.0f32), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc })
            .0;
        Ok(Rir {
            samples: w.samples,
            rt60_true: e.rt60_true,
            drr_true: e.drr_true,
            direct_delay,
        })
    }

    pub fn access_log(&self) -> Vec<AccessRecord> {
        self.log.lock().unwrap().clone()
    }

    /// Source or RIR reads recorded while `phase` was active.
    pub fn privileged_reads_in(&self, phase: &str) -> Vec<AccessRecord> {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.phase == phase && r.kind != AccessKind::Audio)
            .cloned()
            .collect()
    }
}
