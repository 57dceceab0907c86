//! Anomaly scores paired with ground truth.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};

/// Per-window anomaly probabilities with their labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    /// Source row offsets; empty when the scores come from elsewhere.
    pub origins: Vec<usize>,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let s = ScoreSet {
            scores,
            labels,
            origins: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != self.labels.len() {
            return Err(AstroError::validation(format!(
                "{} scores but {} labels",
                self.scores.len(),
                self.labels.len()
            )));
        }
        if !self.origins.is_empty() && self.origins.len() != self.scores.len() {
            return Err(AstroError::validation("origin count does not match score count"));
        }
        if let Some(i) = self.scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(AstroError::validation(format!(
                "score {} at index {i} is outside [0, 1]",
                self.scores[i]
            )));
        }
        if let Some(i) = self.labels.iter().position(|&y| y > 1) {
            return Err(AstroError::validation(format!("label at index {i} is not 0/1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.n_positive();
        p > 0 && p < self.len()
    }

    /// Reads a `score,label` CSV with a header row.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| AstroError::validation(format!("{}: missing '{name}' column", path.display())))
        };
        let (si, li) = (col("score")?, col("label")?);
        let oi = headers.iter().position(|h| h == "origin_index");
        let mut out = ScoreSet::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse_err = |column: &str, cell: &str| AstroError::Parse {
                row: i + 2,
                column: column.into(),
                message: format!("'{cell}' is not valid"),
            };
            let s: f64 = rec[si].parse().map_err(|_| parse_err("score", &rec[si]))?;
            let y: u8 = rec[li].parse().map_err(|_| parse_err("label", &rec[li]))?;
            out.scores.push(s);
            out.labels.push(y);
            if let Some(oi) = oi {
                let o: usize = rec[oi].parse().map_err(|_| parse_err("origin_index", &rec[oi]))?;
                out.origins.push(o);
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Writes `score,label` (plus `origin_index` when known).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let with_origin = !self.origins.is_empty();
        if with_origin {
            w.write_record(["origin_index", "score", "label"])?;
        } else {
            w.write_record(["score", "label"])?;
        }
        for i in 0..self.len() {
            let s = format!("{:?}", self.scores[i]);
            let y = self.labels[i].to_string();
            if with_origin {
                w.write_record([self.origins[i].to_string(), s, y])?;
            } else {
                w.write_record([s, y])?;
            }
        }
        w.flush().map_err(|e| AstroError::io(path, e))?;
        Ok(())
    }
}
