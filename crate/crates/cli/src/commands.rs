use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use astro_core::model::{score_dataset, train as train_model, SCORING_BATCH};
use astro_core::pipeline::{model_config_for, report_at};
use astro_core::threshold::TuneStep;
use astro_core::{
    generate, grid_oracle, load_csv, make_windows, measure_latency, tune as tune_scores, AstroConfig, AstroModel,
    Checkpoint, MetricReport, PlantSpec, PreparedData, ScoreSet, SeriesTable, Standardizer,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{require, RunConfig};
use crate::manifest::Manifest;
use crate::UsageError;

pub const TUNE_FILE: &str = "tune.toml";
pub const METRICS_TOML: &str = "metrics.toml";
pub const METRICS_CSV: &str = "metrics.csv";
pub const PREDICTIONS_CSV: &str = "predictions.csv";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    require(&cfg.paths.data, "data file")?;
    require(&cfg.paths.plant, "plant file")?;
    let table = load_csv(&cfg.paths.data, &cfg.csv)?;
    let plant = PlantSpec::load(&cfg.paths.plant)?;
    let p = &cfg.pipeline;
    Ok(astro_core::prepare(&table, &plant, &p.window, p.split_ratios, p.split_seed)?)
}

fn load_model(cfg: &RunConfig, data: &PreparedData) -> Result<AstroModel> {
    require(&cfg.paths.checkpoint, "checkpoint")?;
    let expected = model_config_for(data, &cfg.pipeline.model);
    let ckpt = Checkpoint::load(&cfg.paths.checkpoint)?;
    Ok(ckpt.into_model(&data.graph, Some(&expected))?)
}

pub fn gen(cfg: &RunConfig) -> Result<()> {
    let out = generate(&cfg.synth)?;
    let paths = &cfg.paths;
    ensure_parent(&paths.data)?;
    ensure_parent(&paths.plant)?;
    ensure_dir(&paths.out_dir)?;
    out.table.write_csv(&paths.data, &cfg.csv)?;
    out.plant.save(&paths.plant)?;

    let seg_path = paths.out_dir.join("segments.csv");
    let mut w = csv::Writer::from_path(&seg_path)?;
    w.write_record(["kind", "start", "len", "nodes"])?;
    for s in &out.segments {
        let kind = format!("{:?}", s.kind).to_lowercase();
        let nodes: Vec<String> = s.nodes.iter().map(|n| out.table.column_names[*n].clone()).collect();
        w.write_record([kind, s.start.to_string(), s.len.to_string(), nodes.join(" ")])?;
    }
    w.flush()?;

    let (normal, attack) = out.table.label_counts();
    log::info!(
        "generated {} rows x {} sensors ({normal} normal, {attack} attack) in {} segments",
        out.table.n_rows(),
        out.table.n_cols(),
        out.segments.len()
    );
    let mut m = Manifest::new("gen", cfg);
    m.outputs = vec![paths.data.clone(), paths.plant.clone(), seg_path];
    m.write(&paths.out_dir)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainSummary {
    best_epoch: usize,
    best_val_f1: f64,
    pos_weight: f64,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    n_params: usize,
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let data = prepare(cfg)?;
    let model_cfg = model_config_for(&data, &cfg.pipeline.model);
    let outcome = train_model(&model_cfg, &data.graph, &data.train(), &data.val())?;
    let model = outcome.best_model();
    let paths = &cfg.paths;
    ensure_parent(&paths.checkpoint)?;
    ensure_dir(&paths.out_dir)?;
    Checkpoint::from_model(&model).save(&paths.checkpoint)?;

    let log_path = paths.out_dir.join("training_log.csv");
    let mut w = csv::Writer::from_path(&log_path)?;
    w.write_record(["epoch", "train_loss", "val_f1"])?;
    for e in &outcome.log {
        w.write_record([e.epoch.to_string(), format!("{:?}", e.train_loss), format!("{:?}", e.val_f1)])?;
    }
    w.flush()?;

    let best_val_f1 = outcome
        .log
        .iter()
        .find(|e| e.epoch == outcome.best_epoch)
        .map_or(0.0, |e| e.val_f1);
    let summary = TrainSummary {
        best_epoch: outcome.best_epoch,
        best_val_f1,
        pos_weight: outcome.pos_weight,
        n_train: data.split.train.len(),
        n_val: data.split.val.len(),
        n_test: data.split.test.len(),
        n_params: model.params.flat_len(),
    };
    let summary_path = paths.out_dir.join("train.toml");
    write_text(&summary_path, &toml::to_string(&summary)?)?;
    log::info!("best epoch {} with validation F1 {best_val_f1:.4}", outcome.best_epoch);

    let mut m = Manifest::new("train", cfg);
    m.inputs = vec![paths.data.clone(), paths.plant.clone()];
    m.outputs = vec![paths.checkpoint.clone(), log_path, summary_path];
    m.write(&paths.out_dir)?;
    Ok(())
}

/// Contents of `tune.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub tau_star: f64,
    pub best_f1: f64,
    pub oracle_tau: f64,
    pub oracle_f1: f64,
    pub oracle_gap: f64,
    pub n_scores: usize,
}

impl TuneSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn load_scores(path: &Path) -> Result<ScoreSet> {
    require(path, "scores file")?;
    Ok(ScoreSet::load_csv(path)?)
}

fn write_trace(path: &Path, trace: &[TuneStep]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "step", "tau", "action", "reward", "best_f1"])?;
    for s in trace {
        w.write_record([
            s.episode.to_string(),
            s.step.to_string(),
            format!("{:?}", s.tau),
            format!("{:?}", s.action),
            format!("{:?}", s.reward),
            format!("{:?}", s.best_f1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn tune(cfg: &RunConfig, scores: Option<&Path>) -> Result<()> {
    let out_dir = &cfg.paths.out_dir;
    let mut m = Manifest::new("tune", cfg);
    let scores = match scores {
        Some(p) => {
            m.inputs.push(p.to_path_buf());
            load_scores(p)?
        }
        None => {
            let data = prepare(cfg)?;
            let model = load_model(cfg, &data)?;
            m.inputs = vec![cfg.paths.data.clone(), cfg.paths.plant.clone(), cfg.paths.checkpoint.clone()];
            let s = score_dataset(&model, &data.val(), SCORING_BATCH)?;
            ensure_dir(out_dir)?;
            let p = out_dir.join("val_scores.csv");
            s.write_csv(&p)?;
            m.outputs.push(p);
            s
        }
    };
    ensure_dir(out_dir)?;
    let result = tune_scores(&scores, &cfg.pipeline.tuner)?;
    let (oracle_tau, oracle_f1) = grid_oracle(&scores, cfg.pipeline.tuner.step)?;
    let summary = TuneSummary {
        tau_star: result.tau_star,
        best_f1: result.best_f1,
        oracle_tau,
        oracle_f1,
        oracle_gap: oracle_f1 - result.best_f1,
        n_scores: scores.len(),
    };
    log::info!(
        "tau* = {:.4} (F1 {:.4}); grid oracle tau = {oracle_tau:.4} (F1 {oracle_f1:.4})",
        summary.tau_star,
        summary.best_f1
    );
    let tune_path = out_dir.join(TUNE_FILE);
    write_text(&tune_path, &toml::to_string(&summary)?)?;
    let trace_path = out_dir.join("trace.csv");
    write_trace(&trace_path, &result.trace)?;
    m.outputs.extend([tune_path, trace_path]);
    m.write(out_dir)?;
    Ok(())
}

fn write_predictions(path: &Path, scores: &ScoreSet, pred: &[u8]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["origin_index", "score", "prediction", "label"])?;
    for i in 0..scores.len() {
        let origin = scores.origins.get(i).copied().unwrap_or(i);
        w.write_record([
            origin.to_string(),
            format!("{:?}", scores.scores[i]),
            pred[i].to_string(),
            scores.labels[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `--tau`, then the tuned threshold in the output directory, then the baseline.
fn resolve_tau(cfg: &RunConfig, tau: Option<f64>) -> Result<f64> {
    if let Some(t) = tau {
        if !(0.0..=1.0).contains(&t) {
            return Err(UsageError(format!("--tau {t} is outside [0, 1]")).into());
        }
        return Ok(t);
    }
    let tuned = cfg.paths.out_dir.join(TUNE_FILE);
    if tuned.exists() {
        let t = TuneSummary::load(&tuned)?.tau_star;
        log::info!("using tuned threshold {t} from {}", tuned.display());
        return Ok(t);
    }
    Ok(cfg.pipeline.baseline_tau)
}

pub fn write_metrics(dir: &Path, report: &MetricReport) -> Result<[PathBuf; 2]> {
    let toml_path = dir.join(METRICS_TOML);
    report.save_toml(&toml_path)?;
    let csv_path = dir.join(METRICS_CSV);
    write_text(
        &csv_path,
        &format!("{}\n{}\n", astro_core::evaluation::CSV_HEADER, report.csv_row()),
    )?;
    Ok([toml_path, csv_path])
}

pub fn eval(cfg: &RunConfig, scores: Option<&Path>, tau: Option<f64>) -> Result<()> {
    let out_dir = &cfg.paths.out_dir;
    let tau = resolve_tau(cfg, tau)?;
    let mut m = Manifest::new("eval", cfg);
    let scores = match scores {
        Some(p) => {
            m.inputs.push(p.to_path_buf());
            load_scores(p)?
        }
        None => {
            let data = prepare(cfg)?;
            let model = load_model(cfg, &data)?;
            m.inputs = vec![cfg.paths.data.clone(), cfg.paths.plant.clone(), cfg.paths.checkpoint.clone()];
            score_dataset(&model, &data.test(), SCORING_BATCH)?
        }
    };
    if scores.is_empty() {
        return Err(UsageError("no scores to evaluate".into()).into());
    }
    let report = report_at(&scores, tau)?;
    let pred = astro_core::apply_threshold(&scores.scores, tau)?;
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  (tau {tau})",
        report.accuracy, report.precision, report.recall, report.f1
    );
    ensure_dir(out_dir)?;
    let [t, c] = write_metrics(out_dir, &report)?;
    let pred_path = out_dir.join(PREDICTIONS_CSV);
    write_predictions(&pred_path, &scores, &pred)?;
    m.outputs.extend([t, c, pred_path]);
    m.write(out_dir)?;
    Ok(())
}

/// Standard-normal windows shaped for `plant` when no data file is available.
fn random_windows(plant: &PlantSpec, cfg: &RunConfig, n_windows: usize) -> Result<astro_core::WindowedSeries> {
    let spec = cfg.pipeline.window;
    let cols: Vec<String> = if spec.features_per_node == 1 {
        plant.node_ids()
    } else {
        (0..plant.n_nodes() * spec.features_per_node).map(|c| format!("c{c}")).collect()
    };
    let rows = spec.length + (n_windows.max(1) - 1) * spec.stride.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pipeline.model.seed);
    let values: Vec<f64> = (0..rows * cols.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let table = SeriesTable::new((0..rows).map(|r| r.to_string()).collect(), values, vec![0; rows], cols.clone())?;
    let identity = Standardizer {
        means: vec![0.0; cols.len()],
        stds: vec![1.0; cols.len()],
    };
    Ok(make_windows(&table, &identity, &spec)?)
}

pub fn latency(cfg: &RunConfig, trials: usize, warmup: usize) -> Result<()> {
    if trials == 0 {
        return Err(UsageError("--trials must be positive".into()).into());
    }
    let out_dir = &cfg.paths.out_dir;
    let mut m = Manifest::new("latency", cfg);
    let report = if cfg.paths.data.exists() && cfg.paths.checkpoint.exists() {
        let data = prepare(cfg)?;
        let model = load_model(cfg, &data)?;
        m.inputs = vec![cfg.paths.data.clone(), cfg.paths.plant.clone(), cfg.paths.checkpoint.clone()];
        measure_latency(&model, &data.test(), trials, warmup)?
    } else {
        require(&cfg.paths.plant, "plant file")?;
        let plant = PlantSpec::load(&cfg.paths.plant)?;
        let graph = astro_core::build_topology(&plant)?;
        let spec = cfg.pipeline.window;
        let model_cfg = AstroConfig {
            n_nodes: plant.n_nodes(),
            n_features: spec.features_per_node,
            steps: spec.length,
            ..cfg.pipeline.model.clone()
        };
        log::info!("no trained model found; timing freshly initialized weights");
        let model = AstroModel::new(&model_cfg, &graph)?;
        let windows = random_windows(&plant, cfg, 64)?;
        m.inputs.push(cfg.paths.plant.clone());
        measure_latency(&model, &windows, trials, warmup)?
    };
    println!(
        "p50 {:.3} ms  p95 {:.3} ms  mean {:.3} ms over {} trials",
        report.p50_ms, report.p95_ms, report.mean_ms, report.n_trials
    );
    ensure_dir(out_dir)?;
    let path = out_dir.join("latency.toml");
    write_text(&path, &toml::to_string(&report)?)?;
    m.outputs.push(path);
    m.write(out_dir)?;
    Ok(())
}
