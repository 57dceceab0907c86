use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use astro_core::{MetricReport, ScoreSet};
use serde::Serialize;

use crate::commands::{METRICS_TOML, PREDICTIONS_CSV};
use crate::config::{require, RunConfig};
use crate::manifest::Manifest;
use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub metric: &'static str,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub n: usize,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    // Welford keeps identical inputs at exactly zero spread.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (m2 / (xs.len() - 1) as f64).sqrt())
}

fn load_metrics(dir: &Path) -> Result<MetricReport> {
    let path = dir.join(METRICS_TOML);
    require(&path, "metrics file")?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MetricReport::from_toml(&text)?)
}

/// Per-label counts of scores in `bins` equal-width bins over [0, 1].
pub fn histogram(scores: &ScoreSet, bins: usize) -> Vec<[usize; 2]> {
    let mut h = vec![[0usize; 2]; bins];
    for (s, &y) in scores.scores.iter().zip(&scores.labels) {
        let b = ((s * bins as f64) as usize).min(bins - 1);
        h[b][y as usize] += 1;
    }
    h
}

type Column = (&'static str, fn(&MetricReport) -> Option<f64>);

pub fn report(cfg: &RunConfig, runs: &[PathBuf], bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(UsageError("--bins must be positive".into()).into());
    }
    let reports: Vec<MetricReport> = runs.iter().map(|d| load_metrics(d)).collect::<Result<_>>()?;
    let columns: [Column; 5] = [
        ("accuracy", |m| Some(m.accuracy)),
        ("precision", |m| Some(m.precision)),
        ("recall", |m| Some(m.recall)),
        ("f1", |m| Some(m.f1)),
        ("threshold", |m| m.threshold),
    ];
    let mut rows = Vec::new();
    for (metric, get) in columns {
        let xs: Vec<f64> = reports.iter().filter_map(get).collect();
        if xs.is_empty() {
            continue;
        }
        let (mean, std) = mean_std(&xs);
        rows.push(Aggregate {
            metric,
            mean,
            std,
            n: xs.len(),
        });
    }

    let out_dir = &cfg.paths.out_dir;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut m = Manifest::new("report", cfg);
    m.inputs = runs.iter().map(|d| d.join(METRICS_TOML)).collect();

    let agg_path = out_dir.join("report.csv");
    let mut w = csv::Writer::from_path(&agg_path)?;
    w.write_record(["metric", "mean", "std", "n"])?;
    for r in &rows {
        println!("{:<10} {:.4} ± {:.4}  (n={})", r.metric, r.mean, r.std, r.n);
        w.write_record([r.metric.to_string(), format!("{:?}", r.mean), format!("{:?}", r.std), r.n.to_string()])?;
    }
    w.flush()?;
    m.outputs.push(agg_path);

    let mut hist_rows = Vec::new();
    for dir in runs {
        let p = dir.join(PREDICTIONS_CSV);
        if !p.exists() {
            continue;
        }
        let scores = ScoreSet::load_csv(&p)?;
        m.inputs.push(p);
        hist_rows.push((dir.display().to_string(), histogram(&scores, bins)));
    }
    if !hist_rows.is_empty() {
        let hist_path = out_dir.join("histogram.csv");
        let mut w = csv::Writer::from_path(&hist_path)?;
        w.write_record(["run", "bin_lo", "bin_hi", "normal", "attack"])?;
        for (run, h) in &hist_rows {
            for (b, [neg, pos]) in h.iter().enumerate() {
                w.write_record([
                    run.clone(),
                    format!("{:?}", b as f64 / bins as f64),
                    format!("{:?}", (b + 1) as f64 / bins as f64),
                    neg.to_string(),
                    pos.to_string(),
                ])?;
            }
        }
        w.flush()?;
        m.outputs.push(hist_path);
    }
    m.write(out_dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_of_known_values() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((m - 5.0).abs() < 1e-12);
        assert!((s - 2.138089935299395).abs() < 1e-12);
        assert_eq!(mean_std(&[0.83018867924528; 3]).1, 0.0);
        assert_eq!(mean_std(&[1.5]), (1.5, 0.0));
    }

    #[test]
    fn histogram_edges() {
        let s = ScoreSet::new(vec![0.0, 0.05, 0.5, 1.0], vec![0, 1, 0, 1]).unwrap();
        let h = histogram(&s, 10);
        assert_eq!(h[0], [1, 1]);
        assert_eq!(h[5], [1, 0]);
        assert_eq!(h[9], [0, 1]);
    }
}
