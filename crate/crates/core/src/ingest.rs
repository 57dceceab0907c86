//! Labeled sensor logs: CSV loading, z-scoring, sliding windows and the
//! balanced train/validation/test split.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};

/// Lower bound applied to every fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Raw multivariate log: `L` rows by `N` sensor columns plus per-row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub timestamps: Vec<String>,
    /// Row-major `L x N`.
    pub values: Vec<f64>,
    pub labels: Vec<u8>,
    pub column_names: Vec<String>,
    /// Cells filled by forward-fill during loading.
    pub filled_cells: usize,
}

impl SeriesTable {
    pub fn new(
        timestamps: Vec<String>,
        values: Vec<f64>,
        labels: Vec<u8>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = column_names.len();
        let l = labels.len();
        if timestamps.len() != l || values.len() != l * n {
            return Err(AstroError::validation(format!(
                "table needs {l} timestamps and {} values, got {} and {}",
                l * n,
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return Err(AstroError::validation(format!("label at row {pos} is not 0/1")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(AstroError::validation(format!(
                "non-finite value at row {}, column '{}'",
                pos / n,
                column_names[pos % n]
            )));
        }
        Ok(SeriesTable {
            timestamps,
            values,
            labels,
            column_names,
            filled_cells: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn value(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols() + c]
    }

    /// Counts of `(normal, attack)` rows.
    pub fn label_counts(&self) -> (usize, usize) {
        let attacks = self.labels.iter().filter(|&&y| y == 1).count();
        (self.labels.len() - attacks, attacks)
    }

    /// A copy restricted to (and ordered by) the named columns.
    pub fn select_columns(&self, names: &[String]) -> Result<SeriesTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|name| {
                self.column_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| AstroError::validation(format!("column '{name}' not found in data")))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(SeriesTable {
            timestamps: self.timestamps.clone(),
            values,
            labels: self.labels.clone(),
            column_names: names.to_vec(),
            filled_cells: self.filled_cells,
        })
    }

    /// Writes the table in the CSV layout accepted by [`load_csv`].
    pub fn write_csv(&self, path: impl AsRef<Path>, opts: &CsvOptions) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let ts = opts.timestamp_column.clone().unwrap_or_else(|| "timestamp".into());
        let mut header = vec![ts];
        header.extend(self.column_names.iter().cloned());
        header.push(opts.label_column.clone());
        w.write_record(&header)?;
        let label_names = opts.label_names();
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            record.clear();
            record.push(self.timestamps[r].clone());
            record.extend(self.row(r).iter().map(|v| format!("{v}")));
            record.push(label_names[self.labels[r] as usize].clone());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| AstroError::io(path, e))?;
        Ok(())
    }
}

/// What to do with empty sensor cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    ForwardFill,
}

/// Column roles and label vocabulary for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    /// Defaults to the first column.
    pub timestamp_column: Option<String>,
    pub label_column: String,
    pub label_mapping: BTreeMap<String, u8>,
    pub missing: MissingPolicy,
}

impl Default for CsvOptions {
    fn default() -> Self {
        let label_mapping = [("Normal", 0u8), ("Attack", 1u8), ("0", 0), ("1", 1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        CsvOptions {
            timestamp_column: None,
            label_column: "label".into(),
            label_mapping,
            missing: MissingPolicy::Reject,
        }
    }
}

impl CsvOptions {
    /// Preferred textual name for each label value when writing.
    fn label_names(&self) -> [String; 2] {
        let pick = |v: u8, fallback: &str| {
            self.label_mapping
                .iter()
                .filter(|(_, &x)| x == v)
                .map(|(k, _)| k.clone())
                .find(|k| k.parse::<f64>().is_err())
                .unwrap_or_else(|| fallback.to_string())
        };
        [pick(0, "0"), pick(1, "1")]
    }
}

/// Loads a labeled log. Row numbers in errors are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<SeriesTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| AstroError::io(path, e))?;
    read_csv(file, opts)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, opts: &CsvOptions) -> Result<SeriesTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| AstroError::validation(format!("label column '{}' not found", opts.label_column)))?;
    let ts_idx = match &opts.timestamp_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AstroError::validation(format!("timestamp column '{name}' not found")))?,
        None => 0,
    };
    if ts_idx == label_idx {
        return Err(AstroError::validation("timestamp and label columns coincide"));
    }
    let sensor_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != ts_idx && i != label_idx).collect();
    let column_names: Vec<String> = sensor_idx.iter().map(|&i| headers[i].clone()).collect();
    let mapping: HashMap<String, u8> = opts
        .label_mapping
        .iter()
        .map(|(k, &v)| (k.trim().to_string(), v))
        .collect();

    let mut timestamps = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut bad_labels: Vec<(usize, String)> = Vec::new();
    let mut filled = 0;
    let n = sensor_idx.len();

    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        timestamps.push(rec[ts_idx].to_string());
        let lab = rec[label_idx].trim();
        match mapping.get(lab) {
            Some(&v) if v <= 1 => labels.push(v),
            _ => {
                bad_labels.push((line, lab.to_string()));
                labels.push(0);
            }
        }
        for (k, &c) in sensor_idx.iter().enumerate() {
            let cell = rec[c].trim();
            if cell.is_empty() {
                match opts.missing {
                    MissingPolicy::ForwardFill if !values.is_empty() && values.len() >= n => {
                        let prev = values[values.len() - n];
                        values.push(prev);
                        filled += 1;
                        continue;
                    }
                    _ => {
                        return Err(AstroError::Parse {
                            row: line,
                            column: column_names[k].clone(),
                            message: "missing value".into(),
                        })
                    }
                }
            }
            let v: f64 = cell.parse().map_err(|_| AstroError::Parse {
                row: line,
                column: column_names[k].clone(),
                message: format!("'{cell}' is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(AstroError::Parse {
                    row: line,
                    column: column_names[k].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
    }

    if !bad_labels.is_empty() {
        let shown: Vec<String> = bad_labels
            .iter()
            .take(10)
            .map(|(line, l)| format!("line {line} ('{l}')"))
            .collect();
        return Err(AstroError::validation(format!(
            "{} rows have unknown labels: {}{}",
            bad_labels.len(),
            shown.join(", "),
            if bad_labels.len() > 10 { ", ..." } else { "" }
        )));
    }

    let mut table = SeriesTable::new(timestamps, values, labels, column_names)?;
    table.filled_cells = filled;
    if filled > 0 {
        log::info!("forward-filled {filled} missing cells");
    }
    Ok(table)
}

/// Per-column z-scoring statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Fits population mean/std on the given row range.
pub fn fit_standardizer(table: &SeriesTable, fit_rows: Range<usize>) -> Result<Standardizer> {
    if fit_rows.end > table.n_rows() {
        return Err(AstroError::validation(format!(
            "fit range {fit_rows:?} exceeds {} rows",
            table.n_rows()
        )));
    }
    fit_standardizer_on(table, fit_rows)
}

/// Fits population mean/std on an arbitrary set of rows.
pub fn fit_standardizer_on(
    table: &SeriesTable,
    rows: impl IntoIterator<Item = usize> + Clone,
) -> Result<Standardizer> {
    let n = table.n_cols();
    let mut count = 0usize;
    let mut sums = vec![0.0; n];
    for r in rows.clone() {
        for (s, v) in sums.iter_mut().zip(table.row(r)) {
            *s += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(AstroError::validation("cannot fit standardizer on an empty row set"));
    }
    let means: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; n];
    for r in rows {
        for ((s, v), m) in sq.iter_mut().zip(table.row(r)).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = sq
        .iter()
        .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(Standardizer { means, stds })
}

impl Standardizer {
    pub fn transform_value(&self, col: usize, v: f64) -> f64 {
        (v - self.means[col]) / self.stds[col]
    }

    /// Z-scored copy of all table values (row-major).
    pub fn transform(&self, table: &SeriesTable) -> Result<Vec<f64>> {
        let n = table.n_cols();
        if n != self.means.len() {
            return Err(AstroError::Shape {
                stage: "standardize",
                expected: vec![self.means.len()],
                got: vec![n],
            });
        }
        Ok(table
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.transform_value(i % n, v))
            .collect())
    }

    /// Z-scored table with the same labels and timestamps.
    pub fn transform_table(&self, table: &SeriesTable) -> Result<SeriesTable> {
        let values = self.transform(table)?;
        Ok(SeriesTable {
            values,
            ..table.clone()
        })
    }
}

/// How one window label is derived from its rows' labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// Label of the window's last row.
    #[default]
    FinalStep,
    /// 1 if any row in the window is labeled 1.
    AnyStep,
}

impl LabelRule {
    pub fn apply(self, rows: &[u8]) -> u8 {
        match self {
            LabelRule::FinalStep => *rows.last().expect("non-empty window"),
            LabelRule::AnyStep => rows.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Sliding-window geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
    pub rule: LabelRule,
    /// Consecutive columns grouped into one node.
    pub features_per_node: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            length: 10,
            stride: 1,
            rule: LabelRule::FinalStep,
            features_per_node: 1,
        }
    }
}

impl WindowSpec {
    pub fn count(&self, rows: usize) -> usize {
        if rows < self.length || self.stride == 0 {
            0
        } else {
            (rows - self.length) / self.stride + 1
        }
    }

    fn validate(&self, rows: usize) -> Result<()> {
        if self.length == 0 || self.stride == 0 || self.features_per_node == 0 {
            return Err(AstroError::validation(
                "window length, stride and features per node must be positive",
            ));
        }
        if rows < self.length {
            return Err(AstroError::validation(format!(
                "series has {rows} rows, fewer than the window length {}",
                self.length
            )));
        }
        Ok(())
    }
}

/// Window labels and start rows, computed without touching sensor values.
pub fn window_labels(labels: &[u8], spec: &WindowSpec) -> Result<(Vec<u8>, Vec<usize>)> {
    spec.validate(labels.len())?;
    let count = spec.count(labels.len());
    let origins: Vec<usize> = (0..count).map(|i| i * spec.stride).collect();
    let y = origins
        .iter()
        .map(|&s| spec.rule.apply(&labels[s..s + spec.length]))
        .collect();
    Ok((y, origins))
}

/// A materialized batch: `x` is `B x N x F x T` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub n_nodes: usize,
    pub n_features: usize,
    pub steps: usize,
    pub x: Vec<f64>,
    pub y: Vec<u8>,
    pub origins: Vec<usize>,
}

impl WindowBatch {
    pub fn new(
        n_nodes: usize,
        n_features: usize,
        steps: usize,
        x: Vec<f64>,
        y: Vec<u8>,
        origins: Vec<usize>,
    ) -> Result<Self> {
        let per = n_nodes * n_features * steps;
        if per == 0 || x.len() != y.len() * per || origins.len() != y.len() {
            return Err(AstroError::Shape {
                stage: "window batch",
                expected: vec![y.len(), n_nodes, n_features, steps],
                got: vec![x.len(), origins.len()],
            });
        }
        Ok(WindowBatch {
            n_nodes,
            n_features,
            steps,
            x,
            y,
            origins,
        })
    }

    pub fn empty(n_nodes: usize, n_features: usize, steps: usize) -> Self {
        WindowBatch {
            n_nodes,
            n_features,
            steps,
            x: Vec::new(),
            y: Vec::new(),
            origins: Vec::new(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.y.len()
    }

    pub fn window_len(&self) -> usize {
        self.n_nodes * self.n_features * self.steps
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let w = self.window_len();
        &self.x[i * w..(i + 1) * w]
    }

    /// Value at `(b, node, feature, t)`.
    pub fn at(&self, b: usize, node: usize, feat: usize, t: usize) -> f64 {
        self.x[((b * self.n_nodes + node) * self.n_features + feat) * self.steps + t]
    }

    /// Same windows with nodes relabeled: node `i` moves to `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> WindowBatch {
        let per_node = self.n_features * self.steps;
        let w = self.window_len();
        let mut x = vec![0.0; self.x.len()];
        for b in 0..self.batch_size() {
            for (i, &p) in perm.iter().enumerate() {
                let src = b * w + i * per_node;
                let dst = b * w + p * per_node;
                x[dst..dst + per_node].copy_from_slice(&self.x[src..src + per_node]);
            }
        }
        WindowBatch { x, ..self.clone() }
    }
}

/// Random access to a collection of windows.
pub trait WindowSource {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `(nodes, features, steps)`.
    fn dims(&self) -> (usize, usize, usize);
    fn label(&self, i: usize) -> u8;
    fn origin(&self, i: usize) -> usize;
    /// Copies the selected windows into one batch.
    fn gather(&self, idx: &[usize]) -> WindowBatch;

    fn labels(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }
}

impl WindowSource for WindowBatch {
    fn len(&self) -> usize {
        self.batch_size()
    }
    fn dims(&self) -> (usize, usize, usize) {
        (self.n_nodes, self.n_features, self.steps)
    }
    fn label(&self, i: usize) -> u8 {
        self.y[i]
    }
    fn origin(&self, i: usize) -> usize {
        self.origins[i]
    }
    fn gather(&self, idx: &[usize]) -> WindowBatch {
        let mut x = Vec::with_capacity(idx.len() * self.window_len());
        for &i in idx {
            x.extend_from_slice(self.window(i));
        }
        WindowBatch {
            n_nodes: self.n_nodes,
            n_features: self.n_features,
            steps: self.steps,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            origins: idx.iter().map(|&i| self.origins[i]).collect(),
        }
    }
}

/// Lazily materialized sliding windows over a standardized table.
#[derive(Debug, Clone)]
pub struct WindowedSeries {
    values: Vec<f64>,
    n_cols: usize,
    spec: WindowSpec,
    labels: Vec<u8>,
    origins: Vec<usize>,
}

/// Slices `table` into windows of `spec.length` rows, z-scored by `std`.
pub fn make_windows(table: &SeriesTable, std: &Standardizer, spec: &WindowSpec) -> Result<WindowedSeries> {
    if !table.n_cols().is_multiple_of(spec.features_per_node) {
        return Err(AstroError::validation(format!(
            "{} columns do not split into nodes of {} features",
            table.n_cols(),
            spec.features_per_node
        )));
    }
    let (labels, origins) = window_labels(&table.labels, spec)?;
    Ok(WindowedSeries {
        values: std.transform(table)?,
        n_cols: table.n_cols(),
        spec: *spec,
        labels,
        origins,
    })
}

impl WindowedSeries {
    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    /// Iterates over consecutive batches of up to `size` windows.
    pub fn batches(&self, size: usize) -> impl Iterator<Item = WindowBatch> + '_ {
        let size = size.max(1);
        (0..self.len()).step_by(size).map(move |s| {
            let idx: Vec<usize> = (s..(s + size).min(self.len())).collect();
            self.gather(&idx)
        })
    }

    pub fn subset(&self, indices: Vec<usize>) -> WindowSubset<'_, Self> {
        WindowSubset::new(self, indices)
    }
}

impl WindowSource for WindowedSeries {
    fn len(&self) -> usize {
        self.labels.len()
    }
    fn dims(&self) -> (usize, usize, usize) {
        let f = self.spec.features_per_node;
        (self.n_cols / f, f, self.spec.length)
    }
    fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }
    fn origin(&self, i: usize) -> usize {
        self.origins[i]
    }
    fn gather(&self, idx: &[usize]) -> WindowBatch {
        let (n, f, t) = self.dims();
        let per = n * f * t;
        let mut x = vec![0.0; idx.len() * per];
        for (b, &w) in idx.iter().enumerate() {
            let start = self.origins[w];
            for step in 0..t {
                let row = &self.values[(start + step) * self.n_cols..(start + step + 1) * self.n_cols];
                for (c, &v) in row.iter().enumerate() {
                    // column c = node * f + feature
                    x[b * per + c * t + step] = v;
                }
            }
        }
        WindowBatch {
            n_nodes: n,
            n_features: f,
            steps: t,
            x,
            y: idx.iter().map(|&i| self.labels[i]).collect(),
            origins: idx.iter().map(|&i| self.origins[i]).collect(),
        }
    }
}

/// A view onto selected windows of another source.
#[derive(Debug, Clone)]
pub struct WindowSubset<'a, S: WindowSource + ?Sized> {
    source: &'a S,
    indices: Vec<usize>,
}

impl<'a, S: WindowSource + ?Sized> WindowSubset<'a, S> {
    pub fn new(source: &'a S, indices: Vec<usize>) -> Self {
        WindowSubset { source, indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl<S: WindowSource + ?Sized> WindowSource for WindowSubset<'_, S> {
    fn len(&self) -> usize {
        self.indices.len()
    }
    fn dims(&self) -> (usize, usize, usize) {
        self.source.dims()
    }
    fn label(&self, i: usize) -> u8 {
        self.source.label(self.indices[i])
    }
    fn origin(&self, i: usize) -> usize {
        self.source.origin(self.indices[i])
    }
    fn gather(&self, idx: &[usize]) -> WindowBatch {
        let mapped: Vec<usize> = idx.iter().map(|&i| self.indices[i]).collect();
        self.source.gather(&mapped)
    }
}

/// Disjoint window index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Subsamples equal numbers of attack and normal windows, then partitions
/// them by `ratios` (train, validation, test). Deterministic in `seed`.
pub fn balanced_split(labels: &[u8], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(AstroError::validation(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(AstroError::validation(format!(
            "balanced split needs both classes; found {} attack and {} normal windows",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let k = pos.len().min(neg.len());
    let mut all: Vec<usize> = pos[..k].iter().chain(&neg[..k]).copied().collect();
    all.shuffle(&mut rng);

    let total = all.len();
    let n_train = ((ratios[0] * total as f64).round() as usize).min(total);
    let n_val = ((ratios[1] * total as f64).round() as usize).min(total - n_train);
    let test = all.split_off(n_train + n_val);
    let val = all.split_off(n_train);
    Ok(Split { train: all, val, test })
}

/// Every row touched by the given windows, ascending.
pub fn covered_rows(origins: &[usize], window_len: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = origins.iter().flat_map(|&s| s..s + window_len).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}
