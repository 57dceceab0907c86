//! Naive reference implementations of the layer kernels.

use astro_core::nn::{
    add_dense, add_lstm_direction, gcn_layer, single_token_closed_form, BiLstm, ParamStore,
    SingleTokenAttention, Tensor,
};
use astro_core::normalized_operator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{chain_graph, max_rel_diff, random_vec};

fn naive_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[l * m + j];
            }
            out[i * m + j] = s;
        }
    }
    out
}

/// `ReLU(Op (H W) + b)`, multiplying in the other association order.
fn gcn_oracle(h: &[f64], op: &[f64], w: &[f64], b: &[f64], n: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let hw = naive_matmul(h, w, n, d_in, d_out);
    let mut out = naive_matmul(op, &hw, n, n, d_out);
    for (i, v) in out.iter_mut().enumerate() {
        *v = (*v + b[i % d_out]).max(0.0);
    }
    out
}

/// Largest relative error of `gcn_layer` over `cases` random graphs.
pub fn gcn_worst(cases: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(1..5)).collect();
        let g = chain_graph(&sizes);
        let n = g.n_nodes;
        let (d_in, d_out) = (rng.random_range(1..9), rng.random_range(1..9));
        let op = normalized_operator(&g).unwrap();
        let h = random_vec(&mut rng, n * d_in);
        let w = random_vec(&mut rng, d_in * d_out);
        let b = random_vec(&mut rng, d_out);
        let got = gcn_layer(
            &Tensor::matrix(n, d_in, h.clone()).unwrap(),
            &Tensor::matrix(n, n, op.clone()).unwrap(),
            &Tensor::matrix(d_in, d_out, w.clone()).unwrap(),
            &Tensor::from_vec(b.clone()),
        )
        .unwrap();
        let want = gcn_oracle(&h, &op, &w, &b, n, d_in, d_out);
        worst = worst.max(max_rel_diff(got.data(), &want));
    }
    worst
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One direction, element by element. `xs[t][d]`; returns `h_t` in time order.
fn lstm_oracle(xs: &[Vec<f64>], wx: &[f64], wh: &[f64], b: &[f64], hidden: usize, reverse: bool) -> Vec<Vec<f64>> {
    let t_len = xs.len();
    let d_in = xs[0].len();
    let g4 = 4 * hidden;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![Vec::new(); t_len];
    let order: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
    for t in order {
        let mut pre = b.to_vec();
        for j in 0..g4 {
            for k in 0..d_in {
                pre[j] += xs[t][k] * wx[k * g4 + j];
            }
            for k in 0..hidden {
                pre[j] += h[k] * wh[k * g4 + j];
            }
        }
        let mut h_new = vec![0.0; hidden];
        for u in 0..hidden {
            let i = sig(pre[u]);
            let f = sig(pre[hidden + u]);
            let g = pre[2 * hidden + u].tanh();
            let o = sig(pre[3 * hidden + u]);
            c[u] = f * c[u] + i * g;
            h_new[u] = o * c[u].tanh();
        }
        h = h_new;
        out[t] = h.clone();
    }
    out
}

/// Largest relative error of the bidirectional LSTM over `cases` instances.
pub fn bilstm_worst(cases: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (t_len, batch, d_in, hidden) = (
            rng.random_range(1..8),
            rng.random_range(1..4),
            rng.random_range(1..6),
            rng.random_range(1..6),
        );
        let mut store = ParamStore::new();
        let f = add_lstm_direction(&mut store, &mut rng, "f", d_in, hidden);
        let bw = add_lstm_direction(&mut store, &mut rng, "b", d_in, hidden);
        let lstm = BiLstm::new(&store, f, bw);
        let x = random_vec(&mut rng, t_len * batch * d_in);
        let (out, _) = lstm.forward(&store, &x, t_len, batch);

        let mut want = vec![0.0; t_len * batch * 2 * hidden];
        for bi in 0..batch {
            let xs: Vec<Vec<f64>> = (0..t_len)
                .map(|t| x[(t * batch + bi) * d_in..(t * batch + bi + 1) * d_in].to_vec())
                .collect();
            for (dir, ids, reverse) in [(0, f, false), (1, bw, true)] {
                let hs = lstm_oracle(&xs, store.value(ids.wx), store.value(ids.wh), store.value(ids.b), hidden, reverse);
                for t in 0..t_len {
                    let base = (t * batch + bi) * 2 * hidden + dir * hidden;
                    want[base..base + hidden].copy_from_slice(&hs[t]);
                }
            }
        }
        worst = worst.max(max_rel_diff(&out, &want));
    }
    worst
}

/// Largest relative error of single-token attention over `cases` instances.
pub fn attention_worst(cases: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let heads = [1, 2, 4][rng.random_range(0..3)];
        let d = heads * rng.random_range(1..5);
        let rows = rng.random_range(1..6);
        let mut store = ParamStore::new();
        let mut dense = |name: &str, store: &mut ParamStore| add_dense(store, &mut rng, name, d, d);
        let q = dense("q", &mut store);
        let k = dense("k", &mut store);
        let v = dense("v", &mut store);
        let o = dense("o", &mut store);
        // nonzero biases so the closed form is exercised fully
        for id in [v.b, o.b, q.b] {
            for x in store.value_mut(id) {
                *x = 0.3;
            }
        }
        let att = SingleTokenAttention::new(q, k, v, o, heads).unwrap();
        let z = random_vec(&mut ChaCha8Rng::seed_from_u64(seed), rows * d);
        let (out, cache) = att.forward(&store, &z, rows);
        assert!(cache.weights().iter().all(|&w| w == 1.0));

        let mut vz = naive_matmul(&z, store.value(v.w), rows, d, d);
        for (i, x) in vz.iter_mut().enumerate() {
            *x += store.value(v.b)[i % d];
        }
        let mut want = naive_matmul(&vz, store.value(o.w), rows, d, d);
        for (i, x) in want.iter_mut().enumerate() {
            *x += store.value(o.b)[i % d];
        }
        worst = worst.max(max_rel_diff(&out, &want));
        worst = worst.max(max_rel_diff(&single_token_closed_form(&att, &store, &z, rows), &want));
    }
    worst
}
