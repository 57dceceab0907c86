//! Synthetic plant logs with labeled attack segments, plus score-set
//! generators used as tuner fixtures.
//!
//! Each subsystem follows a latent signal: a plant-wide sinusoidal cycle,
//! delayed by a fixed phase per stage, plus an AR(1) component, mixed with
//! a fraction of the previous subsystem's signal along a chain. Nodes read their subsystem's latent
//! through a random gain and offset plus white noise. Attacks are injected
//! into contiguous row segments on a few nodes of one subsystem.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::ingest::SeriesTable;
use crate::scores::ScoreSet;
use crate::topology::PlantSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    /// Short `+6 sigma` excursion.
    Spike,
    /// Ramp to `+4 sigma`, then hold.
    Drift,
    /// Sensor frozen at its value on entry.
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subsystems: usize,
    pub nodes_per_subsystem: usize,
    pub length: usize,
    /// Target fraction of attack rows.
    pub attack_fraction: f64,
    pub attack_types: Vec<AttackKind>,
    pub noise_std: f64,
    /// Mixing weight of the previous subsystem's latent.
    pub coupling: f64,
    /// Plant-wide cycle length in rows.
    pub period: f64,
    /// Phase delay of each subsystem behind the previous one, in radians.
    pub phase_lag: f64,
    /// Innovation scale of the AR(1) latent component.
    pub latent_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subsystems: 4,
            nodes_per_subsystem: 2,
            length: 30_000,
            attack_fraction: 0.10,
            attack_types: vec![AttackKind::Spike, AttackKind::Drift, AttackKind::Stuck],
            noise_std: 0.1,
            coupling: 0.3,
            period: 20.0,
            phase_lag: std::f64::consts::FRAC_PI_4,
            latent_noise: 0.02,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn n_nodes(&self) -> usize {
        self.n_subsystems * self.nodes_per_subsystem
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subsystems == 0 || self.nodes_per_subsystem == 0 {
            return Err(AstroError::validation("synthetic plant needs at least one node"));
        }
        if self.length < 100 {
            return Err(AstroError::validation("synthetic log must have at least 100 rows"));
        }
        if !(0.0..0.5).contains(&self.attack_fraction) {
            return Err(AstroError::validation("attack fraction must be in [0, 0.5)"));
        }
        if self.attack_fraction > 0.0 && self.attack_types.is_empty() {
            return Err(AstroError::validation("no attack types enabled"));
        }
        if !(self.latent_noise >= 0.0) {
            return Err(AstroError::validation("latent_noise must be non-negative"));
        }
        if !(self.noise_std > 0.0) {
            return Err(AstroError::validation("noise_std must be positive"));
        }
        if !(self.period >= 2.0) || !self.phase_lag.is_finite() {
            return Err(AstroError::validation("cycle period must be at least 2 rows"));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(AstroError::validation("coupling must be in [0, 1]"));
        }
        Ok(())
    }
}

/// One injected attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSegment {
    pub kind: AttackKind,
    pub start: usize,
    pub len: usize,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub table: SeriesTable,
    pub plant: PlantSpec,
    pub segments: Vec<AttackSegment>,
}

/// Node ID for node `j` of subsystem `s` (both zero-based).
pub fn node_name(s: usize, j: usize) -> String {
    format!("P{}_{:02}", s + 1, j + 1)
}

/// Subsystem `i` covers nodes `P{i+1}_*`; subsystems are chained in order.
pub fn plant_for(cfg: &SynthConfig) -> PlantSpec {
    let mut subsystems = IndexMap::new();
    for s in 0..cfg.n_subsystems {
        subsystems.insert(
            format!("P{}", s + 1),
            (0..cfg.nodes_per_subsystem).map(|j| node_name(s, j)).collect(),
        );
    }
    PlantSpec::new(subsystems).with_chain_adjacency()
}

fn segment_len(kind: AttackKind, rng: &mut ChaCha8Rng) -> usize {
    match kind {
        AttackKind::Spike => rng.random_range(5..=15),
        AttackKind::Drift | AttackKind::Stuck => rng.random_range(100..=300),
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = cfg.length;
    let n = cfg.n_nodes();
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut base = vec![vec![0.0; l]; cfg.n_subsystems];
    let start_phase = rng.random_range(0.0..std::f64::consts::TAU);
    for (s, b) in base.iter_mut().enumerate() {
        let phase = start_phase - cfg.phase_lag * s as f64;
        let mut ar = 0.0;
        for (t, v) in b.iter_mut().enumerate() {
            ar = 0.95 * ar + cfg.latent_noise * std_normal.sample(&mut rng);
            *v = (std::f64::consts::TAU * t as f64 / cfg.period + phase).sin() + ar;
        }
    }
    let latent: Vec<Vec<f64>> = (0..cfg.n_subsystems)
        .map(|s| {
            if s == 0 {
                base[0].clone()
            } else {
                base[s].iter().zip(&base[s - 1]).map(|(a, b)| a + cfg.coupling * b).collect()
            }
        })
        .collect();

    let gain = Uniform::new(0.8, 1.2).unwrap();
    let offset = Uniform::new(-1.0, 1.0).unwrap();
    let mut values = vec![0.0; l * n];
    for s in 0..cfg.n_subsystems {
        for j in 0..cfg.nodes_per_subsystem {
            let col = s * cfg.nodes_per_subsystem + j;
            let (g, o) = (gain.sample(&mut rng), offset.sample(&mut rng));
            for t in 0..l {
                values[t * n + col] = g * latent[s][t] + o + cfg.noise_std * std_normal.sample(&mut rng);
            }
        }
    }
    let sigma: Vec<f64> = (0..n)
        .map(|c| {
            let mean = (0..l).map(|t| values[t * n + c]).sum::<f64>() / l as f64;
            ((0..l).map(|t| (values[t * n + c] - mean).powi(2)).sum::<f64>() / l as f64).sqrt()
        })
        .collect();

    let target = (cfg.attack_fraction * l as f64).round() as usize;
    let mut labels = vec![0u8; l];
    let mut segments = Vec::new();
    let mut attacked = 0;
    let guard = 20;
    let mut attempts = 0;
    while attacked < target {
        attempts += 1;
        if attempts > 100_000 {
            return Err(AstroError::validation(
                "could not place attack segments; lower attack_fraction",
            ));
        }
        let kind = cfg.attack_types[rng.random_range(0..cfg.attack_types.len())];
        let len = segment_len(kind, &mut rng).min(target - attacked);
        if len + 2 * guard >= l {
            continue;
        }
        let start = rng.random_range(guard..l - len - guard);
        let lo = start - guard;
        let hi = start + len + guard;
        if labels[lo..hi].iter().any(|&y| y == 1) {
            continue;
        }
        let s = rng.random_range(0..cfg.n_subsystems);
        let k = rng.random_range(1..=cfg.nodes_per_subsystem.min(3));
        let mut members: Vec<usize> = (0..cfg.nodes_per_subsystem).map(|j| s * cfg.nodes_per_subsystem + j).collect();
        members.shuffle(&mut rng);
        members.truncate(k);
        members.sort_unstable();
        for &c in &members {
            let frozen = values[start * n + c];
            for i in 0..len {
                let v = &mut values[(start + i) * n + c];
                match kind {
                    AttackKind::Spike => *v += 6.0 * sigma[c],
                    AttackKind::Drift => *v += 4.0 * sigma[c] * ((i + 1) as f64 / 20.0).min(1.0),
                    AttackKind::Stuck => *v = frozen,
                }
            }
        }
        labels[start..start + len].iter_mut().for_each(|y| *y = 1);
        attacked += len;
        segments.push(AttackSegment {
            kind,
            start,
            len,
            nodes: members,
        });
    }
    segments.sort_by_key(|s| s.start);

    let plant = plant_for(cfg);
    let table = SeriesTable::new((0..l).map(|t| t.to_string()).collect(), values, labels, plant.node_ids())?;
    Ok(SynthOutput {
        table,
        plant,
        segments,
    })
}

fn clipped_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64, n: usize) -> Vec<f64> {
    let d = Normal::new(mean, std).unwrap();
    (0..n).map(|_| d.sample(rng).clamp(0.0, 1.0)).collect()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn assemble(normal: Vec<f64>, attack: Vec<f64>, rng: &mut ChaCha8Rng) -> ScoreSet {
    let mut pairs: Vec<(f64, u8)> = normal
        .into_iter()
        .map(|s| (s, 0))
        .chain(attack.into_iter().map(|s| (s, 1)))
        .collect();
    pairs.shuffle(rng);
    let (scores, labels) = pairs.into_iter().unzip();
    ScoreSet::new(scores, labels).expect("generated scores are valid")
}

/// Normals in `[0.02, 0.15]`, attacks in `[0.85, 0.98]`.
pub fn bimodal_scores(n_per_class: usize, seed: u64) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = uniform(&mut rng, 0.02, 0.15, n_per_class);
    let attack = uniform(&mut rng, 0.85, 0.98, n_per_class);
    assemble(normal, attack, &mut rng)
}

/// Normals around 0.4 and attacks around 0.6, both with spread 0.1.
pub fn overlapping_scores(n_per_class: usize, seed: u64) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = clipped_normal(&mut rng, 0.4, 0.1, n_per_class);
    let attack = clipped_normal(&mut rng, 0.6, 0.1, n_per_class);
    assemble(normal, attack, &mut rng)
}

/// `ratio` normals per attack; classes centered at 0.3 and 0.65.
pub fn imbalanced_scores(n_normal: usize, ratio: usize, seed: u64) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = clipped_normal(&mut rng, 0.3, 0.12, n_normal);
    let attack = clipped_normal(&mut rng, 0.65, 0.12, (n_normal / ratio.max(1)).max(1));
    assemble(normal, attack, &mut rng)
}

/// Scores whose confusion at `tau = 0.51` is TN 7909, FP 80, FN 77, TP 7909.
pub fn reference_confusion_scores(seed: u64) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = uniform(&mut rng, 0.0, 0.5, 7909);
    normal.extend(uniform(&mut rng, 0.52, 0.7, 80));
    let mut attack = uniform(&mut rng, 0.52, 1.0, 7909);
    attack.extend(uniform(&mut rng, 0.3, 0.5, 77));
    assemble(normal, attack, &mut rng)
}
