//! Sensor/actuator graph construction.
//!
//! A plant is described as an ordered list of subsystems, each holding node
//! IDs. Nodes inside one subsystem are fully connected with `intra_weight`;
//! every pair of nodes across two adjacent subsystems is connected with
//! `inter_weight`. The stored edge list is directed and symmetric and never
//! contains self-edges; self-loops are only added by [`normalized_operator`].

use std::collections::{HashMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};

fn default_intra() -> f64 {
    1.0
}

fn default_inter() -> f64 {
    0.5
}

/// Declarative plant description, loadable from TOML.
///
/// ```toml
/// intra_weight = 1.0
/// inter_weight = 0.5
/// adjacencies = [["P1", "P2"]]
///
/// [subsystems]
/// P1 = ["FIT101", "LIT101"]
/// P2 = ["AIT201"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    #[serde(default = "default_intra")]
    pub intra_weight: f64,
    #[serde(default = "default_inter")]
    pub inter_weight: f64,
    #[serde(default)]
    pub adjacencies: Vec<(String, String)>,
    pub subsystems: IndexMap<String, Vec<String>>,
}

impl PlantSpec {
    pub fn new(subsystems: IndexMap<String, Vec<String>>) -> Self {
        PlantSpec {
            intra_weight: default_intra(),
            inter_weight: default_inter(),
            adjacencies: Vec::new(),
            subsystems,
        }
    }

    /// Chain adjacency: each subsystem is adjacent to the next one in order.
    pub fn with_chain_adjacency(mut self) -> Self {
        let names: Vec<String> = self.subsystems.keys().cloned().collect();
        self.adjacencies = names
            .windows(2)
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect();
        self
    }

    /// Node IDs in graph index order (subsystem order, then listed order).
    pub fn node_ids(&self) -> Vec<String> {
        self.subsystems.values().flatten().cloned().collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.subsystems.values().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intra_weight > 0.0 && self.intra_weight.is_finite()) {
            return Err(AstroError::validation(format!(
                "intra_weight must be positive, got {}",
                self.intra_weight
            )));
        }
        if !(self.inter_weight > 0.0 && self.inter_weight.is_finite()) {
            return Err(AstroError::validation(format!(
                "inter_weight must be positive, got {}",
                self.inter_weight
            )));
        }
        let mut seen = HashSet::new();
        for (name, nodes) in &self.subsystems {
            for id in nodes {
                if !seen.insert(id.as_str()) {
                    return Err(AstroError::validation(format!(
                        "duplicate node ID '{id}' (in subsystem '{name}')"
                    )));
                }
            }
        }
        for (a, b) in &self.adjacencies {
            for s in [a, b] {
                if !self.subsystems.contains_key(s) {
                    return Err(AstroError::validation(format!(
                        "adjacency ({a}, {b}) names unknown subsystem '{s}'"
                    )));
                }
            }
            if a == b {
                return Err(AstroError::validation(format!(
                    "adjacency ({a}, {b}) must join two distinct subsystems"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: PlantSpec = toml::from_str(text)
            .map_err(|e| AstroError::validation(format!("invalid plant description: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plant spec is always representable as TOML")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AstroError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| AstroError::io(path, e))
    }
}

/// Weighted directed graph over `n_nodes` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGraph {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub edge_weights: Vec<f64>,
}

impl TopologyGraph {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// A graph with `n` nodes and no edges.
    pub fn isolated(n: usize) -> Self {
        TopologyGraph {
            n_nodes: n,
            edges: Vec::new(),
            edge_weights: Vec::new(),
        }
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_nodes);
        TopologyGraph {
            n_nodes: self.n_nodes,
            edges: self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
            edge_weights: self.edge_weights.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != self.edge_weights.len() {
            return Err(AstroError::validation(format!(
                "{} edges but {} edge weights",
                self.edges.len(),
                self.edge_weights.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(self.edges.len());
        for (&(u, v), &w) in self.edges.iter().zip(&self.edge_weights) {
            if u >= self.n_nodes || v >= self.n_nodes {
                return Err(AstroError::validation(format!(
                    "edge ({u}, {v}) out of range for {} nodes",
                    self.n_nodes
                )));
            }
            if u == v {
                return Err(AstroError::validation(format!("self-edge on node {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(AstroError::validation(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            if lookup.insert((u, v), w).is_some() {
                return Err(AstroError::validation(format!("duplicate edge ({u}, {v})")));
            }
        }
        for (&(u, v), &w) in &lookup {
            match lookup.get(&(v, u)) {
                Some(&back) if back == w => {}
                _ => {
                    return Err(AstroError::validation(format!(
                        "edge ({u}, {v}) has no symmetric counterpart of equal weight"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Builds the two-tier plant graph.
pub fn build_topology(spec: &PlantSpec) -> Result<TopologyGraph> {
    spec.validate()?;

    let mut offsets = HashMap::new();
    let mut start = 0;
    for (name, nodes) in &spec.subsystems {
        offsets.insert(name.as_str(), (start, nodes.len()));
        start += nodes.len();
    }

    let mut edges = Vec::new();
    let mut weights = Vec::new();
    // intra: ordered pairs within each subsystem, in subsystem order
    for name in spec.subsystems.keys() {
        let (s0, n) = offsets[name.as_str()];
        for u in s0..s0 + n {
            for v in s0..s0 + n {
                if u != v {
                    edges.push((u, v));
                    weights.push(spec.intra_weight);
                }
            }
        }
    }
    // inter: both directions for every adjacency
    let mut joined = HashSet::new();
    for (a, b) in &spec.adjacencies {
        let key = if a < b { (a, b) } else { (b, a) };
        if !joined.insert(key) {
            continue;
        }
        let (a0, na) = offsets[a.as_str()];
        let (b0, nb) = offsets[b.as_str()];
        for u in a0..a0 + na {
            for v in b0..b0 + nb {
                edges.push((u, v));
                weights.push(spec.inter_weight);
                edges.push((v, u));
                weights.push(spec.inter_weight);
            }
        }
    }

    Ok(TopologyGraph {
        n_nodes: start,
        edges,
        edge_weights: weights,
    })
}

/// Dense symmetric-normalized propagation matrix `D^-1/2 (A + I) D^-1/2`,
/// row-major `N x N`, where `D` is the row-sum degree of `A + I`.
pub fn normalized_operator(g: &TopologyGraph) -> Result<Vec<f64>> {
    g.validate()?;
    let n = g.n_nodes;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    for (&(u, v), &w) in g.edges.iter().zip(&g.edge_weights) {
        a[u * n + v] += w;
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = a[i * n..(i + 1) * n].iter().sum();
            1.0 / deg.sqrt()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(groups: &[(&str, &[&str])], adj: &[(&str, &str)]) -> PlantSpec {
        let mut subsystems = IndexMap::new();
        for (name, nodes) in groups {
            subsystems.insert(
                name.to_string(),
                nodes.iter().map(|s| s.to_string()).collect(),
            );
        }
        let mut s = PlantSpec::new(subsystems);
        s.adjacencies = adj
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        s
    }

    #[test]
    fn single_node_has_no_edges() {
        let g = build_topology(&spec(&[("A", &["a"])], &[])).unwrap();
        assert_eq!(g.n_nodes, 1);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn two_pairs_with_adjacency() {
        let g = build_topology(&spec(&[("A", &["a1", "a2"]), ("B", &["b1", "b2"])], &[("A", "B")]))
            .unwrap();
        assert_eq!(g.n_edges(), 12);
        let cross = g.edge_weights.iter().filter(|&&w| w == 0.5).count();
        let intra = g.edge_weights.iter().filter(|&&w| w == 1.0).count();
        assert_eq!(cross, 8);
        assert_eq!(intra, 4);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_duplicate_ids_and_unknown_subsystems() {
        let dup = spec(&[("A", &["x"]), ("B", &["x"])], &[]);
        assert!(matches!(build_topology(&dup), Err(AstroError::Validation(_))));
        let unknown = spec(&[("A", &["x"])], &[("A", "Z")]);
        let err = build_topology(&unknown).unwrap_err();
        assert!(err.to_string().contains("'Z'"));
        let self_adj = spec(&[("A", &["x"])], &[("A", "A")]);
        assert!(build_topology(&self_adj).is_err());
        let mut bad_w = spec(&[("A", &["x"])], &[]);
        bad_w.inter_weight = 0.0;
        assert!(build_topology(&bad_w).is_err());
    }

    #[test]
    fn operator_examples() {
        let op = normalized_operator(&TopologyGraph::isolated(1)).unwrap();
        assert_eq!(op, vec![1.0]);

        let g = TopologyGraph {
            n_nodes: 2,
            edges: vec![(0, 1), (1, 0)],
            edge_weights: vec![1.0, 1.0],
        };
        for v in normalized_operator(&g).unwrap() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        let g = TopologyGraph {
            n_nodes: 2,
            edges: vec![(0, 1), (1, 0)],
            edge_weights: vec![0.5, 0.5],
        };
        let op = normalized_operator(&g).unwrap();
        assert!((op[0] - 1.0 / 1.5).abs() < 1e-15);
        assert!((op[3] - 1.0 / 1.5).abs() < 1e-15);
        assert!((op[1] - 0.5 / 1.5).abs() < 1e-15);
        assert!((op[2] - 0.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn operator_rejects_asymmetric_graph() {
        let g = TopologyGraph {
            n_nodes: 2,
            edges: vec![(0, 1)],
            edge_weights: vec![1.0],
        };
        assert!(normalized_operator(&g).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = spec(&[("P1", &["a", "b"]), ("P2", &["c"])], &[("P1", "P2")]);
        let text = s.to_toml_string();
        let back = PlantSpec::from_toml_str(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.node_ids(), vec!["a", "b", "c"]);
    }
}
