//! Decision-threshold search.
//!
//! The tuner treats the threshold as the state of a small MDP: each action
//! moves it by `-step`, `0` or `+step` (clipped to `[0, 1]`), and the reward
//! is the F1 score of the relabeled validation set. A Q-network trained
//! from a replay buffer drives an epsilon-greedy walk; the best threshold
//! seen anywhere on the walk is returned. [`grid_oracle`] provides an
//! exhaustive reference answer.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::evaluation::f1_from_counts;
use crate::nn::{add_dense, adam_step, ops, AdamConfig, Dense, ParamStore};
use crate::scores::ScoreSet;

/// Labels `1` wherever `score >= tau`.
pub fn apply_threshold(scores: &[f64], tau: f64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(AstroError::validation(format!("threshold {tau} is outside [0, 1]")));
    }
    Ok(scores.iter().map(|&s| u8::from(s >= tau)).collect())
}

/// F1 of `pred` against `truth`; zero whenever a denominator vanishes.
pub fn f1_reward(pred: &[u8], truth: &[u8]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "prediction/truth length mismatch");
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    f1_from_counts(tp, fp, fn_)
}

/// Scores sorted once so F1 at any threshold costs one binary search.
#[derive(Debug, Clone)]
pub struct SortedScores {
    sorted: Vec<f64>,
    /// `pos_prefix[i]` = positives among the `i` smallest scores.
    pos_prefix: Vec<u64>,
}

impl SortedScores {
    pub fn new(set: &ScoreSet) -> Self {
        let mut pairs: Vec<(f64, u8)> = set.scores.iter().copied().zip(set.labels.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pos_prefix = Vec::with_capacity(pairs.len() + 1);
        pos_prefix.push(0);
        let mut acc = 0;
        for &(_, y) in &pairs {
            acc += y as u64;
            pos_prefix.push(acc);
        }
        SortedScores {
            sorted: pairs.into_iter().map(|p| p.0).collect(),
            pos_prefix,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `(tp, fp, fn)` at threshold `tau` under the `>=` rule.
    pub fn counts_at(&self, tau: f64) -> (u64, u64, u64) {
        let idx = self.sorted.partition_point(|&s| s < tau);
        let total_pos = *self.pos_prefix.last().unwrap();
        let below_pos = self.pos_prefix[idx];
        let predicted = (self.sorted.len() - idx) as u64;
        let tp = total_pos - below_pos;
        (tp, predicted - tp, below_pos)
    }

    pub fn f1_at(&self, tau: f64) -> f64 {
        let (tp, fp, fn_) = self.counts_at(tau);
        f1_from_counts(tp, fp, fn_)
    }
}

/// Exhaustive scan of `tau = 0, step, 2 step, ..., 1`; returns the lowest
/// threshold reaching the maximal F1.
pub fn grid_oracle(scores: &ScoreSet, step: f64) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(AstroError::validation("grid search needs at least one score"));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(AstroError::validation(format!("grid step {step} must be in (0, 1]")));
    }
    let sorted = SortedScores::new(scores);
    let n = (1.0 / step).round() as u64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=n {
        let tau = (i as f64 * step).min(1.0);
        let f1 = sorted.f1_at(tau);
        if f1 > best.1 {
            best = (tau, f1);
        }
    }
    Ok(best)
}

/// Regression target `r + gamma * max_a' Q(s', a')`.
pub fn td_target(reward: f64, next_q: &[f64], gamma: f64) -> f64 {
    let max_next = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reward + gamma * max_next
}

/// Tabular update `(1 - alpha) Q(s,a) + alpha (r + gamma max Q(s', .))`.
pub fn q_update(q_sa: f64, reward: f64, next_q: &[f64], alpha: f64, gamma: f64) -> f64 {
    (1.0 - alpha) * q_sa + alpha * td_target(reward, next_q, gamma)
}

/// Tuner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunerConfig {
    pub tau0: f64,
    /// Threshold increment per action.
    pub step: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub buffer_capacity: usize,
    pub replay_batch: usize,
    pub gamma: f64,
    pub hidden: [usize; 2],
    pub lr: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Multiplicative epsilon decay per episode.
    pub eps_decay: f64,
    pub seed: u64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            tau0: 0.5,
            step: 0.01,
            episodes: 50,
            steps_per_episode: 100,
            buffer_capacity: 10_000,
            replay_batch: 32,
            gamma: 0.9,
            hidden: [64, 64],
            lr: 1e-3,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay: 0.95,
            seed: 0,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau0) {
            return Err(AstroError::validation(format!("tau0 {} is outside [0, 1]", self.tau0)));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(AstroError::validation("threshold step must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AstroError::validation("gamma must be in [0, 1)"));
        }
        if self.replay_batch == 0 || self.buffer_capacity < self.replay_batch {
            return Err(AstroError::validation(
                "replay batch must be positive and fit in the buffer",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(AstroError::validation("Q-network widths must be positive"));
        }
        for (name, e) in [("eps_start", self.eps_start), ("eps_end", self.eps_end), ("eps_decay", self.eps_decay)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(AstroError::validation(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Exploration rate for a zero-based episode index.
    pub fn epsilon(&self, episode: usize) -> f64 {
        (self.eps_start * self.eps_decay.powi(episode as i32)).max(self.eps_end.min(self.eps_start))
    }

    pub fn actions(&self) -> [f64; 3] {
        [-self.step, 0.0, self.step]
    }
}

/// One stored transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub tau: f64,
    pub action: usize,
    pub reward: f64,
    pub next_tau: f64,
}

/// Three-layer ReLU network mapping a threshold to three action values.
#[derive(Debug, Clone)]
pub struct QNet {
    layers: [Dense; 3],
    store: ParamStore,
    adam: AdamConfig,
}

fn featurize(tau: f64) -> f64 {
    2.0 * tau - 1.0
}

impl QNet {
    pub fn new(hidden: [usize; 2], lr: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let layers = [
            add_dense(&mut store, &mut rng, "q.0", 1, hidden[0]),
            add_dense(&mut store, &mut rng, "q.1", hidden[0], hidden[1]),
            add_dense(&mut store, &mut rng, "q.2", hidden[1], 3),
        ];
        QNet {
            layers,
            store,
            adam: AdamConfig {
                lr,
                ..AdamConfig::default()
            },
        }
    }

    fn forward_rows(&self, states: &[f64]) -> [Vec<f64>; 3] {
        let rows = states.len();
        let x: Vec<f64> = states.iter().map(|&t| featurize(t)).collect();
        let mut h1 = self.layers[0].forward(&self.store, &x, rows);
        ops::relu_inplace(&mut h1);
        let mut h2 = self.layers[1].forward(&self.store, &h1, rows);
        ops::relu_inplace(&mut h2);
        let q = self.layers[2].forward(&self.store, &h2, rows);
        [h1, h2, q]
    }

    pub fn q_values(&self, tau: f64) -> [f64; 3] {
        let q = &self.forward_rows(&[tau])[2];
        [q[0], q[1], q[2]]
    }

    /// Greedy action index; ties resolve to the lowest index.
    pub fn greedy(&self, tau: f64) -> usize {
        let q = self.q_values(tau);
        let mut best = 0;
        for a in 1..3 {
            if q[a] > q[best] {
                best = a;
            }
        }
        best
    }

    /// One Adam step on the mean squared TD error of `batch`.
    pub fn train_batch(&mut self, batch: &[Transition], gamma: f64) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let next: Vec<f64> = batch.iter().map(|t| t.next_tau).collect();
        let [_, _, next_q] = self.forward_rows(&next);
        let targets: Vec<f64> = batch
            .iter()
            .enumerate()
            .map(|(i, t)| td_target(t.reward, &next_q[i * 3..i * 3 + 3], gamma))
            .collect();

        let states: Vec<f64> = batch.iter().map(|t| t.tau).collect();
        let rows = states.len();
        let [h1, h2, q] = self.forward_rows(&states);
        let mut dq = vec![0.0; rows * 3];
        let mut loss = 0.0;
        for (i, t) in batch.iter().enumerate() {
            let err = q[i * 3 + t.action] - targets[i];
            loss += err * err;
            dq[i * 3 + t.action] = 2.0 * err / rows as f64;
        }
        self.store.zero_grad();
        let x: Vec<f64> = states.iter().map(|&t| featurize(t)).collect();
        let mut d2 = self.layers[2].backward(&mut self.store, &h2, &dq, rows, true).unwrap();
        ops::relu_mask(&mut d2, &h2);
        let mut d1 = self.layers[1].backward(&mut self.store, &h1, &d2, rows, true).unwrap();
        ops::relu_mask(&mut d1, &h1);
        self.layers[0].backward(&mut self.store, &x, &d1, rows, false);
        adam_step(&mut self.store, &self.adam);
        loss / rows as f64
    }
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<Transition> {
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// One step of the tuning walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneStep {
    pub episode: usize,
    pub step: usize,
    /// Threshold after the action.
    pub tau: f64,
    /// Signed threshold change.
    pub action: f64,
    pub reward: f64,
    pub best_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub tau_star: f64,
    pub best_f1: f64,
    pub trace: Vec<TuneStep>,
}

/// Rounds away accumulated float error from repeated increments.
fn snap(tau: f64) -> f64 {
    (tau * 1e9).round() / 1e9
}

/// Epsilon-greedy Q-learning over the threshold; see the module docs.
pub fn tune(scores: &ScoreSet, cfg: &TunerConfig) -> Result<TuneResult> {
    let mut qnet = QNet::new(cfg.hidden, cfg.lr, cfg.seed);
    tune_with(scores, cfg, &mut qnet, None)
}

/// [`tune`] with a caller-supplied network and optional fixed epsilon.
pub fn tune_with(
    scores: &ScoreSet,
    cfg: &TunerConfig,
    qnet: &mut QNet,
    fixed_epsilon: Option<f64>,
) -> Result<TuneResult> {
    cfg.validate()?;
    scores.validate()?;
    if !scores.has_both_classes() {
        return Err(AstroError::validation(
            "threshold tuning needs both normal and attack scores",
        ));
    }
    let sorted = SortedScores::new(scores);
    let actions = cfg.actions();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7475_6e65));
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);

    let mut tau = cfg.tau0;
    let mut best_tau = tau;
    let mut best_f1 = sorted.f1_at(tau);
    let mut trace = Vec::with_capacity(cfg.episodes * cfg.steps_per_episode);

    for episode in 0..cfg.episodes {
        let eps = fixed_epsilon.unwrap_or_else(|| cfg.epsilon(episode));
        for step in 0..cfg.steps_per_episode {
            let a = if rng.random::<f64>() < eps {
                rng.random_range(0..3)
            } else {
                qnet.greedy(tau)
            };
            let next = snap((tau + actions[a]).clamp(0.0, 1.0));
            let reward = sorted.f1_at(next);
            buffer.push(Transition {
                tau,
                action: a,
                reward,
                next_tau: next,
            });
            if buffer.len() >= cfg.replay_batch {
                let batch = buffer.sample(&mut rng, cfg.replay_batch);
                qnet.train_batch(&batch, cfg.gamma);
            }
            if reward > best_f1 {
                best_f1 = reward;
                best_tau = next;
            }
            trace.push(TuneStep {
                episode,
                step,
                tau: next,
                action: actions[a],
                reward,
                best_f1,
            });
            tau = next;
        }
    }

    Ok(TuneResult {
        tau_star: best_tau,
        best_f1,
        trace,
    })
}
