//! Quality and acoustics measures.

mod estimator;
mod report;
mod spectral;
mod srmr;
mod stats;

pub use estimator::{labelled_clips, EstimatorTrainConfig, LabelledClip, Rt60Estimate, Rt60Estimator};
pub use report::{rt60_stratum, rte, stratum_label, MetricReport, MetricSample, StratumRte, RT60_STRATA_EDGES};
pub use spectral::{log_stft_error, stft_error, SpectralMse};
pub use srmr::{modulation_energies, normalize_srmr, srmr, srmr_norm, ACOUSTIC_BANDS, S_MAX, SRMR_SCALE};
pub use stats::{mean, paired_t_greater, pearson, ranks, spearman};
