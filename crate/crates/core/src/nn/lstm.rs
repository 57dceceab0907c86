//! Single-layer bidirectional LSTM with backpropagation through time.
//!
//! Sequences are stored time-major: `[T][B][d]`. Gate order inside the
//! `4h` pre-activation is input, forget, cell, output.

use super::ops::{self, sigmoid};
use super::params::{ParamId, ParamStore};

/// Weights of one direction: `wx [d_in, 4h]`, `wh [h, 4h]`, `b [4h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmDirection {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    pub d_in: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
struct StepCache {
    /// Gate activations `[B][4h]` after their nonlinearity.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    h_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
struct DirCache {
    /// Indexed by processing order, not by time.
    steps: Vec<StepCache>,
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    x: Vec<f64>,
    t: usize,
    batch: usize,
    dirs: [DirCache; 2],
}

impl BiLstm {
    pub fn new(store: &ParamStore, forward: LstmDirection, backward: LstmDirection) -> Self {
        let s = store.shape(forward.wx);
        BiLstm {
            forward,
            backward,
            d_in: s[0],
            hidden: s[1] / 4,
        }
    }

    /// Runs both directions; returns `[T][B][2h]` with `[forward_t || backward_t]`.
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        t: usize,
        batch: usize,
    ) -> (Vec<f64>, BiLstmCache) {
        let h = self.hidden;
        let mut out = vec![0.0; t * batch * 2 * h];
        let fwd = self.run_direction(store, &self.forward, x, t, batch, false, &mut out, 0);
        let bwd = self.run_direction(store, &self.backward, x, t, batch, true, &mut out, h);
        (
            out,
            BiLstmCache {
                x: x.to_vec(),
                t,
                batch,
                dirs: [fwd, bwd],
            },
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn run_direction(
        &self,
        store: &ParamStore,
        dir: &LstmDirection,
        x: &[f64],
        t: usize,
        batch: usize,
        reverse: bool,
        out: &mut [f64],
        out_offset: usize,
    ) -> DirCache {
        let h = self.hidden;
        let g4 = 4 * h;
        let mut xw = vec![0.0; t * batch * g4];
        ops::matmul(x, store.value(dir.wx), t * batch, self.d_in, g4, &mut xw);
        let wh = store.value(dir.wh);
        let bias = store.value(dir.b);

        let mut h_prev = vec![0.0; batch * h];
        let mut c_prev = vec![0.0; batch * h];
        let mut steps = Vec::with_capacity(t);
        for k in 0..t {
            let time = if reverse { t - 1 - k } else { k };
            let mut gates = xw[time * batch * g4..(time + 1) * batch * g4].to_vec();
            ops::matmul_acc(&h_prev, wh, batch, h, g4, &mut gates);
            ops::add_bias(&mut gates, bias);
            let mut c = vec![0.0; batch * h];
            let mut tanh_c = vec![0.0; batch * h];
            let mut h_new = vec![0.0; batch * h];
            for b in 0..batch {
                let g = &mut gates[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let i_g = sigmoid(g[j]);
                    let f_g = sigmoid(g[h + j]);
                    let c_g = g[2 * h + j].tanh();
                    let o_g = sigmoid(g[3 * h + j]);
                    g[j] = i_g;
                    g[h + j] = f_g;
                    g[2 * h + j] = c_g;
                    g[3 * h + j] = o_g;
                    let cv = f_g * c_prev[b * h + j] + i_g * c_g;
                    let tc = cv.tanh();
                    c[b * h + j] = cv;
                    tanh_c[b * h + j] = tc;
                    h_new[b * h + j] = o_g * tc;
                }
                let dst = (time * batch + b) * 2 * h + out_offset;
                out[dst..dst + h].copy_from_slice(&h_new[b * h..(b + 1) * h]);
            }
            steps.push(StepCache {
                gates,
                c_prev: std::mem::replace(&mut c_prev, c),
                h_prev: std::mem::replace(&mut h_prev, h_new),
                tanh_c,
            });
        }
        DirCache { steps }
    }

    /// Backpropagates `d_out` (`[T][B][2h]`); accumulates weight gradients and
    /// returns the gradient with respect to the input sequence.
    pub fn backward(&self, store: &mut ParamStore, cache: &BiLstmCache, d_out: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; cache.x.len()];
        self.backprop_direction(store, &self.forward, cache, &cache.dirs[0], d_out, false, 0, &mut dx);
        self.backprop_direction(
            store,
            &self.backward,
            cache,
            &cache.dirs[1],
            d_out,
            true,
            self.hidden,
            &mut dx,
        );
        dx
    }

    #[allow(clippy::too_many_arguments)]
    fn backprop_direction(
        &self,
        store: &mut ParamStore,
        dir: &LstmDirection,
        cache: &BiLstmCache,
        dc: &DirCache,
        d_out: &[f64],
        reverse: bool,
        out_offset: usize,
        dx: &mut [f64],
    ) {
        let (t, batch, h) = (cache.t, cache.batch, self.hidden);
        let g4 = 4 * h;
        let d_in = self.d_in;
        let mut dh_next = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        let mut d_pre_all = vec![0.0; t * batch * g4];

        for k in (0..t).rev() {
            let time = if reverse { t - 1 - k } else { k };
            let s = &dc.steps[k];
            let d_pre = &mut d_pre_all[time * batch * g4..(time + 1) * batch * g4];
            for b in 0..batch {
                let g = &s.gates[b * g4..(b + 1) * g4];
                let dp = &mut d_pre[b * g4..(b + 1) * g4];
                let src = (time * batch + b) * 2 * h + out_offset;
                for j in 0..h {
                    let bj = b * h + j;
                    let dh = d_out[src + j] + dh_next[bj];
                    let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let tc = s.tanh_c[bj];
                    let d_o = dh * tc;
                    let d_c = dc_next[bj] + dh * o_g * (1.0 - tc * tc);
                    let d_i = d_c * c_g;
                    let d_g = d_c * i_g;
                    let d_f = d_c * s.c_prev[bj];
                    dc_next[bj] = d_c * f_g;
                    dp[j] = d_i * i_g * (1.0 - i_g);
                    dp[h + j] = d_f * f_g * (1.0 - f_g);
                    dp[2 * h + j] = d_g * (1.0 - c_g * c_g);
                    dp[3 * h + j] = d_o * o_g * (1.0 - o_g);
                }
            }
            let mut dh_prev = vec![0.0; batch * h];
            ops::matmul_nt(d_pre, store.value(dir.wh), batch, h, g4, &mut dh_prev);
            dh_next = dh_prev;
            ops::matmul_tn_acc(&s.h_prev, d_pre, batch, h, g4, store.grad_mut(dir.wh));
        }

        ops::matmul_tn_acc(&cache.x, &d_pre_all, t * batch, d_in, g4, store.grad_mut(dir.wx));
        ops::col_sum_acc(&d_pre_all, store.grad_mut(dir.b));
        let mut dx_dir = vec![0.0; t * batch * d_in];
        ops::matmul_nt(&d_pre_all, store.value(dir.wx), t * batch, d_in, g4, &mut dx_dir);
        for (d, v) in dx.iter_mut().zip(dx_dir) {
            *d += v;
        }
    }
}
