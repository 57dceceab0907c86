//! Graph-temporal anomaly detection for multivariate industrial sensor logs.
//!
//! Sensors are nodes of a plant graph built from subsystem membership.
//! Windows of standardized readings pass through two graph convolutions
//! and a bidirectional LSTM; the fused embedding goes through attention
//! and a small fully connected stack to an attack probability. A Q-learning
//! agent then tunes the decision threshold on validation scores.

pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod scores;
pub mod synth;
pub mod threshold;
pub mod topology;

pub use error::{AstroError, Result};
pub use evaluation::{confusion, evaluate, measure_latency, metrics, ConfusionCounts, LatencyReport, MetricReport};
pub use ingest::{
    balanced_split, load_csv, make_windows, CsvOptions, LabelRule, MissingPolicy, SeriesTable, Split,
    Standardizer, WindowBatch, WindowSource, WindowSpec, WindowedSeries,
};
pub use model::{AstroConfig, AstroModel, Checkpoint};
pub use pipeline::{prepare, PipelineConfig, PipelineReport, PreparedData};
pub use scores::ScoreSet;
pub use synth::{generate, AttackKind, SynthConfig, SynthOutput};
pub use threshold::{apply_threshold, f1_reward, grid_oracle, tune, TuneResult, TunerConfig};
pub use topology::{build_topology, normalized_operator, PlantSpec, TopologyGraph};
