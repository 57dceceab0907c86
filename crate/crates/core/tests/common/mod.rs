#![allow(dead_code)]

pub mod oracles;

use astro_core::ingest::WindowBatch;
use astro_core::{build_topology, PlantSpec, TopologyGraph};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sizes[i]` nodes in subsystem `S{i}`, chained.
pub fn chain_plant(sizes: &[usize]) -> PlantSpec {
    let mut subs = IndexMap::new();
    for (i, &k) in sizes.iter().enumerate() {
        subs.insert(format!("S{i}"), (0..k).map(|j| format!("S{i}_{j}")).collect());
    }
    PlantSpec::new(subs).with_chain_adjacency()
}

pub fn chain_graph(sizes: &[usize]) -> TopologyGraph {
    build_topology(&chain_plant(sizes)).unwrap()
}

pub fn random_batch(n: usize, f: usize, t: usize, b: usize, seed: u64) -> WindowBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..b * n * f * t).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = (0..b).map(|i| (i % 2) as u8).collect();
    WindowBatch::new(n, f, t, x, y, (0..b).collect()).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `max |a - b| / max |b|`.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    diff / scale.max(1e-300)
}
