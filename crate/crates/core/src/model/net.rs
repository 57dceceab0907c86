//! Forward and backward passes of the full scoring network.
//!
//! Per time step every node's features go through a two-layer MLP, two
//! graph convolutions and a mean pool over nodes. The pooled sequence feeds
//! a bidirectional LSTM; its last-step state is concatenated with the last
//! pooled graph vector, projected, passed through single-token attention,
//! three ReLU layers and a sigmoid head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::AstroConfig;
use crate::error::{AstroError, Result};
use crate::ingest::WindowBatch;
use crate::nn::{
    add_dense, add_lstm_direction, ops, weighted_bce, weighted_bce_logit_grad, AttentionCache,
    BiLstm, BiLstmCache, Dense, GraphConv, GraphConvCache, ParamStore, SingleTokenAttention,
};
use crate::topology::{normalized_operator, TopologyGraph};

/// Layer handles into a [`ParamStore`] plus the fixed graph operator.
#[derive(Debug, Clone)]
pub struct AstroNet {
    config: AstroConfig,
    op: Vec<f64>,
    proj1: Dense,
    proj2: Dense,
    gcn1: GraphConv,
    gcn2: GraphConv,
    lstm: BiLstm,
    fuse: Dense,
    attn: SingleTokenAttention,
    fc: [Dense; 3],
    head: Dense,
}

struct Cache {
    batch: usize,
    x_steps: Vec<f64>,
    h1: Vec<f64>,
    g1: GraphConvCache,
    g2: GraphConvCache,
    lstm: BiLstmCache,
    fused: Vec<f64>,
    z: Vec<f64>,
    attn: AttentionCache,
    a: Vec<f64>,
    fc_out: [Vec<f64>; 3],
    probs: Vec<f64>,
}

impl AstroNet {
    /// Builds the architecture and registers freshly initialized weights.
    pub fn init(config: &AstroConfig, graph: &TopologyGraph) -> Result<(AstroNet, ParamStore)> {
        config.validate()?;
        if graph.n_nodes != config.n_nodes {
            return Err(AstroError::Shape {
                stage: "graph",
                expected: vec![config.n_nodes],
                got: vec![graph.n_nodes],
            });
        }
        let op = normalized_operator(graph)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let c = config;
        let proj1 = add_dense(&mut store, &mut rng, "proj.0", c.n_features, c.d_in);
        let proj2 = add_dense(&mut store, &mut rng, "proj.1", c.d_in, c.d_in);
        let gcn1 = GraphConv {
            dense: add_dense(&mut store, &mut rng, "gcn.0", c.d_in, c.d_g),
        };
        let gcn2 = GraphConv {
            dense: add_dense(&mut store, &mut rng, "gcn.1", c.d_g, c.d_g),
        };
        let fwd = add_lstm_direction(&mut store, &mut rng, "lstm.fwd", c.d_g, c.d_h);
        let bwd = add_lstm_direction(&mut store, &mut rng, "lstm.bwd", c.d_g, c.d_h);
        let lstm = BiLstm::new(&store, fwd, bwd);
        let fuse = add_dense(&mut store, &mut rng, "fuse", c.fusion_input(), c.fusion_dim);
        let q = add_dense(&mut store, &mut rng, "attn.q", c.fusion_dim, c.fusion_dim);
        let k = add_dense(&mut store, &mut rng, "attn.k", c.fusion_dim, c.fusion_dim);
        let v = add_dense(&mut store, &mut rng, "attn.v", c.fusion_dim, c.fusion_dim);
        let o = add_dense(&mut store, &mut rng, "attn.o", c.fusion_dim, c.fusion_dim);
        let attn = SingleTokenAttention::new(q, k, v, o, c.n_heads)?;
        let [w1, w2, w3] = c.fc_widths;
        let fc = [
            add_dense(&mut store, &mut rng, "fc.0", c.fusion_dim, w1),
            add_dense(&mut store, &mut rng, "fc.1", w1, w2),
            add_dense(&mut store, &mut rng, "fc.2", w2, w3),
        ];
        let head = add_dense(&mut store, &mut rng, "head", w3, 1);
        Ok((
            AstroNet {
                config: config.clone(),
                op,
                proj1,
                proj2,
                gcn1,
                gcn2,
                lstm,
                fuse,
                attn,
                fc,
                head,
            },
            store,
        ))
    }

    pub fn config(&self) -> &AstroConfig {
        &self.config
    }

    pub fn operator(&self) -> &[f64] {
        &self.op
    }

    fn check_batch(&self, x: &WindowBatch) -> Result<()> {
        let c = &self.config;
        if (x.n_nodes, x.n_features, x.steps) != (c.n_nodes, c.n_features, c.steps) {
            return Err(AstroError::Shape {
                stage: "model input",
                expected: vec![c.n_nodes, c.n_features, c.steps],
                got: vec![x.n_nodes, x.n_features, x.steps],
            });
        }
        Ok(())
    }

    /// Anomaly probabilities, one per window.
    pub fn forward(&self, store: &ParamStore, x: &WindowBatch) -> Result<Vec<f64>> {
        self.check_batch(x)?;
        if x.batch_size() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.run(store, x).probs)
    }

    /// Weighted BCE on a batch without gradients.
    pub fn loss(&self, store: &ParamStore, x: &WindowBatch, pos_weight: f64) -> Result<f64> {
        let p = self.forward(store, x)?;
        let y: Vec<f64> = x.y.iter().map(|&v| v as f64).collect();
        Ok(weighted_bce(&p, &y, pos_weight).0)
    }

    /// Weighted BCE on a batch; overwrites the store's gradients.
    pub fn loss_and_grad(&self, store: &mut ParamStore, x: &WindowBatch, pos_weight: f64) -> Result<f64> {
        self.check_batch(x)?;
        store.zero_grad();
        if x.batch_size() == 0 {
            return Ok(0.0);
        }
        let cache = self.run(store, x);
        let y: Vec<f64> = x.y.iter().map(|&v| v as f64).collect();
        let (loss, _) = weighted_bce(&cache.probs, &y, pos_weight);
        let d_logit = weighted_bce_logit_grad(&cache.probs, &y, pos_weight);
        self.backward(store, &cache, &d_logit);
        Ok(loss)
    }

    fn run(&self, store: &ParamStore, x: &WindowBatch) -> Cache {
        let c = &self.config;
        let (b, n, f, t) = (x.batch_size(), c.n_nodes, c.n_features, c.steps);
        let rows = t * b * n;

        // rows ordered (step, window, node)
        let mut x_steps = vec![0.0; rows * f];
        for step in 0..t {
            for w in 0..b {
                for node in 0..n {
                    let r = (step * b + w) * n + node;
                    for feat in 0..f {
                        x_steps[r * f + feat] = x.at(w, node, feat, step);
                    }
                }
            }
        }

        let mut h1 = self.proj1.forward(store, &x_steps, rows);
        ops::relu_inplace(&mut h1);
        let h2 = self.proj2.forward(store, &h1, rows);
        let g1 = self.gcn1.forward(store, &self.op, n, &h2, rows);
        let g2 = self.gcn2.forward(store, &self.op, n, g1.output(), rows);

        let dg = c.d_g;
        let mut pooled = vec![0.0; t * b * dg];
        let inv_n = 1.0 / n as f64;
        for (blk, dst) in g2.output().chunks_exact(n * dg).zip(pooled.chunks_exact_mut(dg)) {
            for node_row in blk.chunks_exact(dg) {
                for (d, &v) in dst.iter_mut().zip(node_row) {
                    *d += v;
                }
            }
            for d in dst.iter_mut() {
                *d *= inv_n;
            }
        }

        let (seq_out, lstm) = self.lstm.forward(store, &pooled, t, b);
        let dh2 = 2 * c.d_h;
        let fin = c.fusion_input();
        let mut fused = vec![0.0; b * fin];
        let last = t - 1;
        for w in 0..b {
            let dst = &mut fused[w * fin..(w + 1) * fin];
            dst[..dg].copy_from_slice(&pooled[(last * b + w) * dg..(last * b + w + 1) * dg]);
            dst[dg..].copy_from_slice(&seq_out[(last * b + w) * dh2..(last * b + w + 1) * dh2]);
        }

        let mut z = self.fuse.forward(store, &fused, b);
        ops::relu_inplace(&mut z);
        let (a, attn) = self.attn.forward(store, &z, b);
        let mut input = a.clone();
        let mut fc_out: [Vec<f64>; 3] = Default::default();
        for (layer, out) in self.fc.iter().zip(fc_out.iter_mut()) {
            let mut o = layer.forward(store, &input, b);
            ops::relu_inplace(&mut o);
            input = o.clone();
            *out = o;
        }
        let logits = self.head.forward(store, &input, b);
        let probs = logits.iter().map(|&l| ops::sigmoid(l)).collect();

        Cache {
            batch: b,
            x_steps,
            h1,
            g1,
            g2,
            lstm,
            fused,
            z,
            attn,
            a,
            fc_out,
            probs,
        }
    }

    fn backward(&self, store: &mut ParamStore, cache: &Cache, d_logit: &[f64]) {
        let c = &self.config;
        let (b, n, t) = (cache.batch, c.n_nodes, c.steps);
        let rows = t * b * n;

        let mut grad = self
            .head
            .backward(store, &cache.fc_out[2], d_logit, b, true)
            .unwrap();
        for i in (0..3).rev() {
            ops::relu_mask(&mut grad, &cache.fc_out[i]);
            let input = if i == 0 { &cache.a } else { &cache.fc_out[i - 1] };
            grad = self.fc[i].backward(store, input, &grad, b, true).unwrap();
        }
        let mut d_z = self.attn.backward(store, &cache.attn, &grad, b);
        ops::relu_mask(&mut d_z, &cache.z);
        let d_fused = self.fuse.backward(store, &cache.fused, &d_z, b, true).unwrap();

        let (dg, dh2, fin) = (c.d_g, 2 * c.d_h, c.fusion_input());
        let last = t - 1;
        let mut d_seq = vec![0.0; t * b * dh2];
        for w in 0..b {
            let src = &d_fused[w * fin..(w + 1) * fin];
            d_seq[(last * b + w) * dh2..(last * b + w + 1) * dh2].copy_from_slice(&src[dg..]);
        }
        let mut d_pooled = self.lstm.backward(store, &cache.lstm, &d_seq);
        for w in 0..b {
            let src = &d_fused[w * fin..w * fin + dg];
            for (d, &v) in d_pooled[(last * b + w) * dg..(last * b + w + 1) * dg].iter_mut().zip(src) {
                *d += v;
            }
        }

        let inv_n = 1.0 / n as f64;
        let mut d_g2 = vec![0.0; rows * dg];
        for (blk, src) in d_g2.chunks_exact_mut(n * dg).zip(d_pooled.chunks_exact(dg)) {
            for node_row in blk.chunks_exact_mut(dg) {
                for (d, &v) in node_row.iter_mut().zip(src) {
                    *d = v * inv_n;
                }
            }
        }
        let d_g1 = self
            .gcn2
            .backward(store, &self.op, n, &cache.g2, &d_g2, rows, true)
            .unwrap();
        let d_h2 = self
            .gcn1
            .backward(store, &self.op, n, &cache.g1, &d_g1, rows, true)
            .unwrap();
        let mut d_h1 = self.proj2.backward(store, &cache.h1, &d_h2, rows, true).unwrap();
        ops::relu_mask(&mut d_h1, &cache.h1);
        self.proj1.backward(store, &cache.x_steps, &d_h1, rows, false);
    }
}

/// Architecture plus weights.
#[derive(Debug, Clone)]
pub struct AstroModel {
    pub net: AstroNet,
    pub params: ParamStore,
}

impl AstroModel {
    pub fn new(config: &AstroConfig, graph: &TopologyGraph) -> Result<Self> {
        let (net, params) = AstroNet::init(config, graph)?;
        Ok(AstroModel { net, params })
    }

    pub fn config(&self) -> &AstroConfig {
        self.net.config()
    }

    pub fn forward(&self, x: &WindowBatch) -> Result<Vec<f64>> {
        self.net.forward(&self.params, x)
    }

    pub fn loss(&self, x: &WindowBatch, pos_weight: f64) -> Result<f64> {
        self.net.loss(&self.params, x, pos_weight)
    }

    pub fn loss_and_grad(&mut self, x: &WindowBatch, pos_weight: f64) -> Result<f64> {
        self.net.loss_and_grad(&mut self.params, x, pos_weight)
    }
}

/// Scores a batch with the given graph and weights.
pub fn forward(x: &WindowBatch, graph: &TopologyGraph, model: &AstroModel) -> Result<Vec<f64>> {
    if graph.n_nodes != model.config().n_nodes {
        return Err(AstroError::Shape {
            stage: "graph",
            expected: vec![model.config().n_nodes],
            got: vec![graph.n_nodes],
        });
    }
    let op = normalized_operator(graph)?;
    let mut net = model.net.clone();
    net.op = op;
    net.forward(&model.params, x)
}
