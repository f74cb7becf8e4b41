use serde::{Deserialize, Serialize};

use super::Rt60Estimator;
use crate::error::Result;

/// RT60 strata used for per-level breakdowns: `[0, 0.2)`, `[0.2, 0.4)`, ...,
/// `[1.2, inf)`.
pub const RT60_STRATA_EDGES: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2];

/// `|RT(a) - RT(b)|` in seconds.
pub fn rte(a: &[f32], b: &[f32], est: &Rt60Estimator) -> Result<f64> {
    Ok((est.estimate_seconds(a)? - est.estimate_seconds(b)?).abs())
}

/// Index into the strata defined by [`RT60_STRATA_EDGES`].
pub fn rt60_stratum(rt60: f64) -> usize {
    RT60_STRATA_EDGES.iter().take_while(|&&e| rt60 >= e).count()
}

pub fn stratum_label(i: usize) -> String {
    let lo = if i == 0 { 0.0 } else { RT60_STRATA_EDGES[i - 1] };
    match RT60_STRATA_EDGES.get(i) {
        Some(hi) => format!("{lo:.1}-{hi:.1}"),
        None => format!("{lo:.1}+"),
    }
}

/// One evaluated pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Ground-truth RT60 of the target, used for stratification.
    pub rt60_true: f64,
    pub rte: f64,
    pub stft_err: f64,
    pub log_stft_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumRte {
    pub label: String,
    pub count: usize,
    /// Mean RTE divided by the mean ground-truth RT60 of the stratum.
    pub normalized_rte: f64,
}

/// Dataset-level means with a per-RT60 breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub rte: f64,
    pub stft_err: f64,
    pub log_stft_err: f64,
    pub strata: Vec<StratumRte>,
}

impl MetricReport {
    pub fn from_samples(samples: &[MetricSample]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = |f: fn(&MetricSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
        let mut strata = Vec::new();
        for i in 0..=RT60_STRATA_EDGES.len() {
            let members: Vec<_> = samples.iter().filter(|s| rt60_stratum(s.rt60_true) == i).collect();
            if members.is_empty() {
                continue;
            }
            let rte: f64 = members.iter().map(|s| s.rte).sum();
            let rt: f64 = members.iter().map(|s| s.rt60_true).sum();
            strata.push(StratumRte {
                label: stratum_label(i),
                count: members.len(),
                normalized_rte: if rt > 0.0 { rte / rt } else { 0.0 },
            });
        }
        Self {
            count: samples.len(),
            rte: mean(|s| s.rte),
            stft_err: mean(|s| s.stft_err),
            log_stft_err: mean(|s| s.log_stft_err),
            strata,
        }
    }
}

impl MetricReport {
    /// `count,rte,stft_err,log_stft_err,nrte_0.0-0.2,...,nrte_1.2+`.
    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = ["count", "rte", "stft_err", "log_stft_err"].map(String::from).to_vec();
        h.extend((0..=RT60_STRATA_EDGES.len()).map(|i| format!("nrte_{}", stratum_label(i))));
        h
    }

    /// Values in [`MetricReport::csv_header`] order; empty strata and
    /// unavailable spectral errors (NaN) are written as empty fields.
    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.6}") };
        let mut row = vec![self.count.to_string(), f(self.rte), f(self.stft_err), f(self.log_stft_err)];
        for i in 0..=RT60_STRATA_EDGES.len() {
            let label = stratum_label(i);
            row.push(
                self.strata
                    .iter()
                    .find(|s| s.label == label)
                    .map(|s| f(s.normalized_rte))
                    .unwrap_or_default(),
            );
        }
        row
    }
}
