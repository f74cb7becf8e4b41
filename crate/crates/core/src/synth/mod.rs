//! Synthetic rooms, impulse responses, speech-like sources, scene
//! descriptors and persisted datasets.

mod dataset;
mod descriptor;
mod rir;
mod room;
mod source;

pub use dataset::{
    build_dataset, render_sample, sample_split_rooms, AccessKind, AccessRecord, AudioStore, DatasetConfig,
    DatasetManifest, ManifestEntry, RenderedSample, Split, MANIFEST_FILE, MANIFEST_HEADER,
};
pub use descriptor::{encode_descriptor, SceneDescriptor, DESCRIPTOR_DIM, DESCRIPTOR_NOISE};
pub use rir::{exponential_rir, synth_rir, target_drr_db, TAIL_OFFSET};
pub use room::{
    sabine_rt60, sample_distance, sample_room, Room, RoomSpec, ABSORPTION_RANGE, DIM_RANGE, MAX_DISTANCE,
    MIN_DISTANCE, RT60_RANGE, SPEED_OF_SOUND,
};
pub use source::{syllable_schedule, synth_source, synth_source_len, Segment};
