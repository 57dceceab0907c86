//! Mini-batch training with Adam and best-validation snapshotting.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::AstroConfig;
use super::net::AstroModel;
use crate::error::{AstroError, Result};
use crate::evaluation::{confusion, metrics};
use crate::ingest::WindowSource;
use crate::nn::{adam_step, ParamStore};
use crate::scores::ScoreSet;
use crate::threshold::apply_threshold;
use crate::topology::TopologyGraph;

/// Batch size used when scoring outside of training.
pub const SCORING_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// F1 on the validation windows at threshold 0.5.
    pub val_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights after the last epoch.
    pub model: AstroModel,
    /// Weights from the epoch with the highest validation F1.
    pub best_params: ParamStore,
    pub best_epoch: usize,
    pub pos_weight: f64,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    /// The final architecture carrying the best-validation weights.
    pub fn best_model(&self) -> AstroModel {
        let mut m = self.model.clone();
        m.params.copy_values_from(&self.best_params);
        m
    }
}

/// Positive-class weight: configured value or the negative/positive ratio.
pub fn resolve_pos_weight(config: &AstroConfig, train: &dyn WindowSource) -> f64 {
    config.pos_weight.unwrap_or_else(|| {
        let pos = (0..train.len()).filter(|&i| train.label(i) == 1).count();
        let neg = train.len() - pos;
        if pos == 0 || neg == 0 {
            1.0
        } else {
            neg as f64 / pos as f64
        }
    })
}

/// Stateful epoch runner; one shuffle stream per trainer.
pub struct Trainer {
    pub model: AstroModel,
    pos_weight: f64,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: AstroModel, pos_weight: f64) -> Self {
        let seed = model.config().seed ^ 0x5348_5546_464c_4531;
        Trainer {
            model,
            pos_weight,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: 0,
        }
    }

    /// One pass over `train` in shuffled mini-batches; returns the mean loss.
    pub fn run_epoch(&mut self, train: &dyn WindowSource) -> Result<f64> {
        self.epoch += 1;
        let bs = self.model.config().batch_size;
        let adam = self.model.config().adam;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(bs).enumerate() {
            let batch = train.gather(idx);
            let loss = self.model.loss_and_grad(&batch, self.pos_weight)?;
            if !loss.is_finite() || !self.model.params.flat_grads().iter().all(|g| g.is_finite()) {
                return Err(AstroError::Divergence {
                    epoch: self.epoch,
                    batch: bi,
                    loss,
                });
            }
            adam_step(&mut self.model.params, &adam);
            total += loss * idx.len() as f64;
        }
        Ok(if train.is_empty() { 0.0 } else { total / train.len() as f64 })
    }
}

/// Trains for `config.epochs` epochs and keeps the best validation snapshot.
pub fn train(
    config: &AstroConfig,
    graph: &TopologyGraph,
    train: &dyn WindowSource,
    val: &dyn WindowSource,
) -> Result<TrainOutcome> {
    let dims = train.dims();
    if dims != (config.n_nodes, config.n_features, config.steps) {
        return Err(AstroError::Shape {
            stage: "training windows",
            expected: vec![config.n_nodes, config.n_features, config.steps],
            got: vec![dims.0, dims.1, dims.2],
        });
    }
    let model = AstroModel::new(config, graph)?;
    let pos_weight = resolve_pos_weight(config, train);
    let mut trainer = Trainer::new(model, pos_weight);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best_params = trainer.model.params.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let train_loss = trainer.run_epoch(train)?;
        let val_f1 = if val.is_empty() {
            0.0
        } else {
            let s = score_dataset(&trainer.model, val, SCORING_BATCH)?;
            let pred = apply_threshold(&s.scores, 0.5)?;
            metrics(&confusion(&pred, &s.labels)?).f1
        };
        let seconds = start.elapsed().as_secs_f64();
        log::info!("epoch {epoch}: loss {train_loss:.6} val_f1 {val_f1:.4} ({seconds:.1}s)");
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best_epoch = epoch;
            best_params = trainer.model.params.clone();
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_f1,
            seconds,
        });
    }

    Ok(TrainOutcome {
        model: trainer.model,
        best_params,
        best_epoch,
        pos_weight,
        log,
    })
}

/// Scores every window in order, in batches of `batch_size`.
pub fn score_dataset(model: &AstroModel, windows: &dyn WindowSource, batch_size: usize) -> Result<ScoreSet> {
    let mut out = ScoreSet::default();
    let n = windows.len();
    let bs = batch_size.max(1);
    for start in (0..n).step_by(bs) {
        let idx: Vec<usize> = (start..(start + bs).min(n)).collect();
        let batch = windows.gather(&idx);
        out.scores.extend(model.forward(&batch)?);
        out.labels.extend_from_slice(&batch.y);
        out.origins.extend_from_slice(&batch.origins);
    }
    Ok(out)
}
