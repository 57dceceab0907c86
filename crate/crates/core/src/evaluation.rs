//! Confusion counts, detection metrics and inference latency.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::ingest::WindowSource;
use crate::model::{score_dataset, AstroModel, SCORING_BATCH};
use crate::threshold::apply_threshold;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Counts predictions against ground truth. Both slices must be equally long
/// and non-empty.
pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(AstroError::validation(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(AstroError::validation("cannot score an empty prediction set"));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 through precision and recall, with every `0/0` taken as zero.
pub fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency_p50_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency_p95_ms: Option<f64>,
    pub counts: ConfusionCounts,
}

pub const CSV_HEADER: &str = "accuracy,precision,recall,f1,threshold,tp,tn,fp,fn,latency_p50_ms,latency_p95_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl MetricReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AstroError::validation(format!("metric serialization: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| AstroError::validation(format!("metric report: {e}")))
    }

    /// One line matching [`CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{:?},{:?},{:?},{:?},{},{},{},{},{},{},{}",
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            opt(self.threshold),
            self.counts.tp,
            self.counts.tn,
            self.counts.fp,
            self.counts.fn_,
            opt(self.latency_p50_ms),
            opt(self.latency_p95_ms),
        )
    }

    pub fn save_toml(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| AstroError::io(path, e))
    }
}

/// Accuracy, precision, recall and F1 from counts.
pub fn metrics(c: &ConfusionCounts) -> MetricReport {
    MetricReport {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: f1_from_counts(c.tp, c.fp, c.fn_),
        threshold: None,
        latency_p50_ms: None,
        latency_p95_ms: None,
        counts: *c,
    }
}

/// Scores `windows`, thresholds at `tau` and reports metrics.
pub fn evaluate(model: &AstroModel, windows: &dyn WindowSource, tau: f64) -> Result<(Vec<u8>, MetricReport)> {
    if windows.is_empty() {
        return Err(AstroError::validation("no windows to evaluate"));
    }
    let scores = score_dataset(model, windows, SCORING_BATCH)?;
    let pred = apply_threshold(&scores.scores, tau)?;
    let mut report = metrics(&confusion(&pred, &scores.labels)?);
    report.threshold = Some(tau);
    Ok((pred, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub n_trials: usize,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Wall-clock time of single-window forward passes, cycling through
/// `windows`. Windows are gathered before the clock starts.
pub fn measure_latency(
    model: &AstroModel,
    windows: &dyn WindowSource,
    n_trials: usize,
    warmup: usize,
) -> Result<LatencyReport> {
    if windows.is_empty() {
        return Err(AstroError::validation("latency measurement needs at least one window"));
    }
    if n_trials == 0 {
        return Err(AstroError::validation("latency measurement needs at least one trial"));
    }
    let pool: Vec<_> = (0..windows.len().min(n_trials + warmup))
        .map(|i| windows.gather(&[i]))
        .collect();
    for i in 0..warmup {
        std::hint::black_box(model.forward(&pool[i % pool.len()])?);
    }
    let mut times = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let batch = &pool[(warmup + i) % pool.len()];
        let start = Instant::now();
        std::hint::black_box(model.forward(batch)?);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean_ms = times.iter().sum::<f64>() / n_trials as f64;
    times.sort_by(f64::total_cmp);
    Ok(LatencyReport {
        p50_ms: percentile(&times, 50.0),
        p95_ms: percentile(&times, 95.0),
        mean_ms,
        n_trials,
    })
}
