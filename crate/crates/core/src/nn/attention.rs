//! Multi-head self-attention over a single token.
//!
//! With one query and one key the softmax is identically 1, so the output
//! reduces to `W_O . concat_heads(W_V z)`. The query/key path is still
//! evaluated so the attention weights are observable.

use super::layers::Dense;
use super::ops;
use super::params::ParamStore;
use crate::error::{AstroError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingleTokenAttention {
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub output: Dense,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    z: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    concat: Vec<f64>,
    /// `[B][heads]` softmax weights.
    weights: Vec<f64>,
}

impl AttentionCache {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SingleTokenAttention {
    pub fn new(query: Dense, key: Dense, value: Dense, output: Dense, heads: usize) -> Result<Self> {
        let d = query.d_in;
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(AstroError::validation(format!(
                "attention width {d} is not divisible by {heads} heads"
            )));
        }
        for l in [&query, &key, &value, &output] {
            if l.d_in != d || l.d_out != d {
                return Err(AstroError::Shape {
                    stage: "attention projection",
                    expected: vec![d, d],
                    got: vec![l.d_in, l.d_out],
                });
            }
        }
        Ok(SingleTokenAttention {
            query,
            key,
            value,
            output,
            heads,
        })
    }

    pub fn width(&self) -> usize {
        self.query.d_in
    }

    pub fn forward(&self, store: &ParamStore, z: &[f64], rows: usize) -> (Vec<f64>, AttentionCache) {
        let d = self.width();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.query.forward(store, z, rows);
        let k = self.key.forward(store, z, rows);
        let v = self.value.forward(store, z, rows);
        let mut weights = vec![0.0; rows * self.heads];
        let mut concat = vec![0.0; rows * d];
        for r in 0..rows {
            for hd in 0..self.heads {
                let span = r * d + hd * dh..r * d + (hd + 1) * dh;
                let logit: f64 = q[span.clone()]
                    .iter()
                    .zip(&k[span.clone()])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * scale;
                // softmax over the single available key
                let logits = [logit];
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = logits.iter().map(|l| (l - max).exp()).sum();
                let w = (logit - max).exp() / denom;
                weights[r * self.heads + hd] = w;
                for (c, &vv) in concat[span.clone()].iter_mut().zip(&v[span]) {
                    *c = w * vv;
                }
            }
        }
        let out = self.output.forward(store, &concat, rows);
        (
            out,
            AttentionCache {
                z: z.to_vec(),
                q,
                k,
                v,
                concat,
                weights,
            },
        )
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &AttentionCache,
        d_out: &[f64],
        rows: usize,
    ) -> Vec<f64> {
        let d = self.width();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let d_concat = self
            .output
            .backward(store, &cache.concat, d_out, rows, true)
            .unwrap();
        let mut dq = vec![0.0; rows * d];
        let mut dk = vec![0.0; rows * d];
        let mut dv = vec![0.0; rows * d];
        for r in 0..rows {
            for hd in 0..self.heads {
                let span = r * d + hd * dh..r * d + (hd + 1) * dh;
                let w = cache.weights[r * self.heads + hd];
                let dw: f64 = d_concat[span.clone()]
                    .iter()
                    .zip(&cache.v[span.clone()])
                    .map(|(a, b)| a * b)
                    .sum();
                // softmax Jacobian for a single entry: w * (dw - w * dw)
                let d_logit = w * (dw - w * dw);
                for i in span {
                    dv[i] = w * d_concat[i];
                    dq[i] = d_logit * scale * cache.k[i];
                    dk[i] = d_logit * scale * cache.q[i];
                }
            }
        }
        let mut dz = self.value.backward(store, &cache.z, &dv, rows, true).unwrap();
        for (proj, g) in [(&self.query, &dq), (&self.key, &dk)] {
            let part = proj.backward(store, &cache.z, g, rows, true).unwrap();
            for (a, b) in dz.iter_mut().zip(part) {
                *a += b;
            }
        }
        dz
    }
}

/// `(z W_v + b_v) W_o + b_o`, the closed form of [`SingleTokenAttention`].
pub fn single_token_closed_form(att: &SingleTokenAttention, store: &ParamStore, z: &[f64], rows: usize) -> Vec<f64> {
    let v = att.value.forward(store, z, rows);
    let mut out = vec![0.0; rows * att.width()];
    ops::matmul(&v, store.value(att.output.w), rows, att.width(), att.width(), &mut out);
    ops::add_bias(&mut out, store.value(att.output.b));
    out
}
