//! Inputs shared by the benchmarks.

use astro_core::nn::Tensor;
use astro_core::synth::{imbalanced_scores, node_name};
use astro_core::{build_topology, AstroConfig, AstroModel, PlantSpec, ScoreSet, TopologyGraph, WindowBatch};
use indexmap::IndexMap;

/// Deterministic values in `[-1, 1]`.
pub fn wave(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.618 + phase).sin()).collect()
}

/// `n_subsystems` chained subsystems of `per` sensors each.
pub fn chain_plant(n_subsystems: usize, per: usize) -> PlantSpec {
    let subs: IndexMap<String, Vec<String>> = (0..n_subsystems)
        .map(|s| (format!("P{}", s + 1), (0..per).map(|j| node_name(s, j)).collect()))
        .collect();
    PlantSpec::new(subs).with_chain_adjacency()
}

pub fn graph(n_subsystems: usize, per: usize) -> TopologyGraph {
    build_topology(&chain_plant(n_subsystems, per)).expect("valid plant")
}

pub fn batch(n_nodes: usize, steps: usize, size: usize) -> WindowBatch {
    let x = wave(size * n_nodes * steps, 0.3);
    let y = (0..size).map(|i| (i % 2) as u8).collect();
    WindowBatch::new(n_nodes, 1, steps, x, y, (0..size).collect()).expect("consistent batch")
}

pub fn model(graph: &TopologyGraph, steps: usize) -> AstroModel {
    let cfg = AstroConfig::for_shape(graph.n_nodes, 1, steps);
    AstroModel::new(&cfg, graph).expect("valid config")
}

pub fn tensor(shape: Vec<usize>, phase: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, wave(n, phase)).expect("shape matches data")
}

pub fn scores(n_normal: usize) -> ScoreSet {
    imbalanced_scores(n_normal, 20, 0)
}
