//! Low-level dense kernels on row-major slices.
//!
//! Every routine processes rows independently and accumulates along the
//! inner dimension in a fixed order, so results for one row never depend on
//! how many other rows share the call.

/// `out[rows x cols] = a[rows x inner] * b[inner x cols]`.
pub fn matmul(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(b.len(), inner * cols);
    debug_assert_eq!(out.len(), rows * cols);
    out.fill(0.0);
    matmul_acc(a, b, rows, inner, cols, out);
}

/// `out += a * b`.
pub fn matmul_acc(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize, out: &mut [f64]) {
    if cols == 0 {
        return;
    }
    for (a_row, out_row) in a.chunks_exact(inner.max(1)).zip(out.chunks_exact_mut(cols)).take(rows) {
        if inner == 0 {
            break;
        }
        for (&aik, b_row) in a_row.iter().zip(b.chunks_exact(cols)) {
            if aik == 0.0 {
                continue;
            }
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
}

/// `out[inner x cols] += a[rows x inner]^T * b[rows x cols]`.
pub fn matmul_tn_acc(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(b.len(), rows * cols);
    debug_assert_eq!(out.len(), inner * cols);
    if inner == 0 || cols == 0 {
        return;
    }
    for (a_row, b_row) in a.chunks_exact(inner).zip(b.chunks_exact(cols)).take(rows) {
        for (&aik, out_row) in a_row.iter().zip(out.chunks_exact_mut(cols)) {
            if aik == 0.0 {
                continue;
            }
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
}

/// Transpose of a `rows x cols` matrix.
pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// `out[rows x inner] = g[rows x cols] * w[inner x cols]^T`.
pub fn matmul_nt(g: &[f64], w: &[f64], rows: usize, inner: usize, cols: usize, out: &mut [f64]) {
    let wt = transpose(w, inner, cols);
    matmul(g, &wt, rows, cols, inner, out);
}

/// Adds `bias` to every row.
pub fn add_bias(x: &mut [f64], bias: &[f64]) {
    if bias.is_empty() {
        return;
    }
    for row in x.chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Column sums of `g` accumulated into `out`.
pub fn col_sum_acc(g: &[f64], out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    for row in g.chunks_exact(out.len()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` wherever the activation output `y` is not positive.
pub fn relu_mask(grad: &mut [f64], y: &[f64]) {
    for (g, &v) in grad.iter_mut().zip(y) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
