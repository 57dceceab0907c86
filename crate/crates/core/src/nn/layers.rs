//! Affine, activation and graph-convolution layers with their gradient rules.

use super::ops;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{AstroError, Result};

fn check_linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    if w.shape().len() != 2 {
        return Err(AstroError::Shape {
            stage: "linear weight",
            expected: vec![x.last_dim(), b.len()],
            got: w.shape().to_vec(),
        });
    }
    let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
    if x.last_dim() != d_in {
        return Err(AstroError::Shape {
            stage: "linear input",
            expected: vec![d_in],
            got: x.shape().to_vec(),
        });
    }
    if b.len() != d_out {
        return Err(AstroError::Shape {
            stage: "linear bias",
            expected: vec![d_out],
            got: b.shape().to_vec(),
        });
    }
    Ok((x.rows(), d_in, d_out))
}

/// `x W + b` over the trailing dimension of `x`, with `W` stored `[d_in, d_out]`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (rows, d_in, d_out) = check_linear(x, w, b)?;
    let mut out = vec![0.0; rows * d_out];
    ops::matmul(x.data(), w.data(), rows, d_in, d_out, &mut out);
    ops::add_bias(&mut out, b.data());
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = d_out;
    Ok(Tensor::from_parts_unchecked(shape, out))
}

/// Gradients of [`linear`] given the upstream gradient `dy`.
#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<LinearGrads> {
    let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
    if dy.last_dim() != d_out || dy.rows() != x.rows() {
        return Err(AstroError::Shape {
            stage: "linear upstream gradient",
            expected: vec![x.rows(), d_out],
            got: dy.shape().to_vec(),
        });
    }
    let rows = x.rows();
    let mut dx = vec![0.0; rows * d_in];
    ops::matmul_nt(dy.data(), w.data(), rows, d_in, d_out, &mut dx);
    let mut dw = vec![0.0; d_in * d_out];
    ops::matmul_tn_acc(x.data(), dy.data(), rows, d_in, d_out, &mut dw);
    let mut db = vec![0.0; d_out];
    ops::col_sum_acc(dy.data(), &mut db);
    Ok(LinearGrads {
        dx: Tensor::from_parts_unchecked(x.shape().to_vec(), dx),
        dw: Tensor::from_parts_unchecked(vec![d_in, d_out], dw),
        db: Tensor::from_vec(db),
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut d = x.data().to_vec();
    ops::relu_inplace(&mut d);
    Tensor::from_parts_unchecked(x.shape().to_vec(), d)
}

/// Passes `dy` through where `x > 0`.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let d = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_parts_unchecked(x.shape().to_vec(), d)
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let d = x.data().iter().map(|&v| ops::sigmoid(v)).collect();
    Tensor::from_parts_unchecked(x.shape().to_vec(), d)
}

/// Gradient through the sigmoid given its output `y`.
pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let d = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&p, &g)| g * p * (1.0 - p))
        .collect();
    Tensor::from_parts_unchecked(y.shape().to_vec(), d)
}

/// A graph convolution `ReLU(Op H W + b)` applied independently to each
/// block of `N` rows in `h`.
pub fn gcn_layer(h: &Tensor, op: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let n = check_op(op)?;
    let (rows, d_in, d_out) = check_linear(h, w, b)?;
    if rows % n != 0 {
        return Err(AstroError::Shape {
            stage: "graph convolution input",
            expected: vec![n, d_in],
            got: h.shape().to_vec(),
        });
    }
    let agg = propagate(op.data(), n, h.data(), d_in);
    let mut out = vec![0.0; rows * d_out];
    ops::matmul(&agg, w.data(), rows, d_in, d_out, &mut out);
    ops::add_bias(&mut out, b.data());
    ops::relu_inplace(&mut out);
    Ok(Tensor::from_parts_unchecked(vec![rows, d_out], out))
}

fn check_op(op: &Tensor) -> Result<usize> {
    match op.shape() {
        [r, c] if r == c => Ok(*r),
        s => Err(AstroError::Shape {
            stage: "graph operator",
            expected: vec![s.first().copied().unwrap_or(0); 2],
            got: s.to_vec(),
        }),
    }
}

/// Applies the `n x n` operator to each `n`-row block of `h` (`d` columns).
pub(crate) fn propagate(op: &[f64], n: usize, h: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; h.len()];
    for (h_blk, o_blk) in h.chunks_exact(n * d).zip(out.chunks_exact_mut(n * d)) {
        ops::matmul(op, h_blk, n, n, d, o_blk);
    }
    out
}

/// Applies the transposed operator blockwise.
pub(crate) fn propagate_t(op: &[f64], n: usize, g: &[f64], d: usize) -> Vec<f64> {
    let op_t = ops::transpose(op, n, n);
    propagate(&op_t, n, g, d)
}

/// Affine map whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Dense {
    pub fn new(store: &ParamStore, w: ParamId, b: ParamId) -> Self {
        let s = store.shape(w);
        Dense {
            w,
            b,
            d_in: s[0],
            d_out: s[1],
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64], rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * self.d_out];
        ops::matmul(x, store.value(self.w), rows, self.d_in, self.d_out, &mut out);
        ops::add_bias(&mut out, store.value(self.b));
        out
    }

    /// Accumulates parameter gradients; returns `dx` when requested.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &[f64],
        dy: &[f64],
        rows: usize,
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let dx = want_dx.then(|| {
            let mut dx = vec![0.0; rows * self.d_in];
            ops::matmul_nt(dy, store.value(self.w), rows, self.d_in, self.d_out, &mut dx);
            dx
        });
        ops::matmul_tn_acc(x, dy, rows, self.d_in, self.d_out, store.grad_mut(self.w));
        ops::col_sum_acc(dy, store.grad_mut(self.b));
        dx
    }
}

/// Graph convolution whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConv {
    pub dense: Dense,
}

/// Saved activations of a [`GraphConv`] forward pass.
#[derive(Debug, Clone)]
pub struct GraphConvCache {
    agg: Vec<f64>,
    out: Vec<f64>,
}

impl GraphConvCache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

impl GraphConv {
    pub fn forward(
        &self,
        store: &ParamStore,
        op: &[f64],
        n: usize,
        h: &[f64],
        rows: usize,
    ) -> GraphConvCache {
        let agg = propagate(op, n, h, self.dense.d_in);
        let mut out = self.dense.forward(store, &agg, rows);
        ops::relu_inplace(&mut out);
        GraphConvCache { agg, out }
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        op: &[f64],
        n: usize,
        cache: &GraphConvCache,
        d_out: &[f64],
        rows: usize,
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let mut dz = d_out.to_vec();
        ops::relu_mask(&mut dz, &cache.out);
        let d_agg = self.dense.backward(store, &cache.agg, &dz, rows, want_dx)?;
        Some(propagate_t(op, n, &d_agg, self.dense.d_in))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_of_zero_is_half() {
        let y = sigmoid(&Tensor::from_vec(vec![0.0, 800.0, -800.0]));
        assert_eq!(y.data()[0], 0.5);
        assert!(y.data()[1] <= 1.0 && y.data()[2] >= 0.0);
        assert!(y.is_finite());
    }

    #[test]
    fn relu_values_and_mask() {
        let x = Tensor::from_vec(vec![-1.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::from_vec(vec![1.0, 1.0]));
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn identity_linear_is_identity() {
        let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.25]).unwrap();
        let y = linear(&x, &Tensor::identity(3), &Tensor::zeros(vec![3])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn linear_shape_mismatch_names_both_shapes() {
        let x = Tensor::zeros(vec![2, 3]);
        let err = linear(&x, &Tensor::zeros(vec![4, 2]), &Tensor::zeros(vec![2])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[4]") && msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let x = Tensor::matrix(2, 2, vec![0.3, -0.7, 1.1, 0.2]).unwrap();
        let w = Tensor::matrix(2, 3, vec![0.5, -0.1, 0.2, 0.4, 0.9, -0.6]).unwrap();
        let b = Tensor::from_vec(vec![0.1, 0.0, -0.2]);
        // loss = sum(y * c) for fixed c
        let c = [1.0, -2.0, 0.5, 0.3, 0.7, -1.0];
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
            linear(x, w, b).unwrap().data().iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let dy = Tensor::matrix(2, 3, c.to_vec()).unwrap();
        let g = linear_backward(&x, &w, &dy).unwrap();
        let h = 1e-6;
        for i in 0..w.len() {
            let mut wp = w.clone();
            wp.data_mut()[i] += h;
            let mut wm = w.clone();
            wm.data_mut()[i] -= h;
            let num = (loss(&x, &wp, &b) - loss(&x, &wm, &b)) / (2.0 * h);
            assert!((num - g.dw.data()[i]).abs() < 1e-8);
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let num = (loss(&xp, &w, &b) - loss(&xm, &w, &b)) / (2.0 * h);
            assert!((num - g.dx.data()[i]).abs() < 1e-8);
        }
        assert_eq!(g.db.data(), &[1.3, -1.3, -0.5]);
    }

    #[test]
    fn isolated_node_gcn_is_identity_on_positive_input() {
        let h = Tensor::matrix(1, 3, vec![0.2, 1.5, 3.0]).unwrap();
        let out = gcn_layer(
            &h,
            &Tensor::identity(1),
            &Tensor::identity(3),
            &Tensor::zeros(vec![3]),
        )
        .unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn symmetric_graph_with_equal_features_gives_equal_outputs() {
        let op = Tensor::matrix(2, 2, vec![0.5; 4]).unwrap();
        let h = Tensor::matrix(2, 2, vec![0.4, -0.3, 0.4, -0.3]).unwrap();
        let w = Tensor::matrix(2, 2, vec![1.0, 0.5, -0.5, 2.0]).unwrap();
        let out = gcn_layer(&h, &op, &w, &Tensor::from_vec(vec![0.1, 0.1])).unwrap();
        assert_eq!(out.data()[0..2], out.data()[2..4]);
    }

    #[test]
    fn gcn_rejects_bad_operator() {
        let h = Tensor::zeros(vec![3, 2]);
        let op = Tensor::zeros(vec![2, 2]);
        assert!(gcn_layer(&h, &op, &Tensor::identity(2), &Tensor::zeros(vec![2])).is_err());
        assert!(gcn_layer(&h, &Tensor::zeros(vec![2, 3]), &Tensor::identity(2), &Tensor::zeros(vec![2])).is_err());
    }
}
