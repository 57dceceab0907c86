//! End-to-end glue: split, standardize, window, train, tune, evaluate.

use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::evaluation::{confusion, metrics, MetricReport};
use crate::ingest::{
    balanced_split, covered_rows, fit_standardizer_on, make_windows, window_labels, SeriesTable, Split,
    Standardizer, WindowSource, WindowSpec, WindowSubset, WindowedSeries,
};
use crate::model::{score_dataset, AstroConfig, AstroModel, TrainOutcome, SCORING_BATCH};
use crate::scores::ScoreSet;
use crate::threshold::{apply_threshold, tune, TuneResult, TunerConfig};
use crate::topology::{build_topology, PlantSpec, TopologyGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    /// Train, validation and test fractions of the balanced window set.
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
    pub model: AstroConfig,
    pub tuner: TunerConfig,
    /// Static threshold reported alongside the tuned one.
    pub baseline_tau: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: WindowSpec::default(),
            split_ratios: [0.7, 0.15, 0.15],
            split_seed: 0,
            model: AstroConfig::default(),
            tuner: TunerConfig::default(),
            baseline_tau: 0.5,
        }
    }
}

/// Windows and split for one log; the standardizer is fit on training rows only.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub graph: TopologyGraph,
    pub standardizer: Standardizer,
    pub windows: WindowedSeries,
    pub split: Split,
}

impl PreparedData {
    pub fn train(&self) -> WindowSubset<'_, WindowedSeries> {
        self.windows.subset(self.split.train.clone())
    }

    pub fn val(&self) -> WindowSubset<'_, WindowedSeries> {
        self.windows.subset(self.split.val.clone())
    }

    pub fn test(&self) -> WindowSubset<'_, WindowedSeries> {
        self.windows.subset(self.split.test.clone())
    }

    /// `(nodes, features, steps)` of every window.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.windows.dims()
    }
}

/// Orders columns by the plant's node list when there is one feature per node.
fn align_columns(table: &SeriesTable, plant: &PlantSpec, window: &WindowSpec) -> Result<SeriesTable> {
    if window.features_per_node == 1 {
        return table.select_columns(&plant.node_ids());
    }
    if table.n_cols() != plant.n_nodes() * window.features_per_node {
        return Err(AstroError::validation(format!(
            "{} columns cannot hold {} nodes of {} features",
            table.n_cols(),
            plant.n_nodes(),
            window.features_per_node
        )));
    }
    Ok(table.clone())
}

pub fn prepare(table: &SeriesTable, plant: &PlantSpec, window: &WindowSpec, ratios: [f64; 3], seed: u64) -> Result<PreparedData> {
    let graph = build_topology(plant)?;
    let table = align_columns(table, plant, window)?;
    let (labels, origins) = window_labels(&table.labels, window)?;
    let split = balanced_split(&labels, ratios, seed)?;
    let train_origins: Vec<usize> = split.train.iter().map(|&i| origins[i]).collect();
    let standardizer = fit_standardizer_on(&table, covered_rows(&train_origins, window.length))?;
    let windows = make_windows(&table, &standardizer, window)?;
    Ok(PreparedData {
        graph,
        standardizer,
        windows,
        split,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub training: TrainOutcome,
    pub model: AstroModel,
    pub tuning: TuneResult,
    pub val_scores: ScoreSet,
    pub test_scores: ScoreSet,
    pub baseline: MetricReport,
    pub tuned: MetricReport,
}

/// Metrics of `scores` at `tau`.
pub fn report_at(scores: &ScoreSet, tau: f64) -> Result<MetricReport> {
    let pred = apply_threshold(&scores.scores, tau)?;
    let mut m = metrics(&confusion(&pred, &scores.labels)?);
    m.threshold = Some(tau);
    Ok(m)
}

/// Model config with its input geometry taken from the prepared data.
pub fn model_config_for(data: &PreparedData, base: &AstroConfig) -> AstroConfig {
    let (n, f, t) = data.dims();
    AstroConfig {
        n_nodes: n,
        n_features: f,
        steps: t,
        ..base.clone()
    }
}

/// Trains on the training split, tunes on validation scores, and reports
/// test metrics at both the baseline and tuned thresholds.
pub fn run(data: &PreparedData, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let model_cfg = model_config_for(data, &cfg.model);
    let training = crate::model::train(&model_cfg, &data.graph, &data.train(), &data.val())?;
    let model = training.best_model();
    let val_scores = score_dataset(&model, &data.val(), SCORING_BATCH)?;
    let test_scores = score_dataset(&model, &data.test(), SCORING_BATCH)?;
    let tuning = tune(&val_scores, &cfg.tuner)?;
    let baseline = report_at(&test_scores, cfg.baseline_tau)?;
    let tuned = report_at(&test_scores, tuning.tau_star)?;
    Ok(PipelineReport {
        training,
        model,
        tuning,
        val_scores,
        test_scores,
        baseline,
        tuned,
    })
}
