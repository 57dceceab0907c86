//! Differentiable building blocks: tensors, parameters, layers with
//! hand-written gradient rules, the loss, Adam, and a gradient checker.

mod attention;
mod gradcheck;
mod layers;
mod loss;
mod lstm;
pub mod ops;
mod params;
mod tensor;

pub use attention::{single_token_closed_form, AttentionCache, SingleTokenAttention};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, GRAD_FLOOR, REFINE_STEPS};
pub use layers::{
    gcn_layer, linear, linear_backward, relu, relu_backward, sigmoid, sigmoid_backward, Dense,
    GraphConv, GraphConvCache, LinearGrads,
};
pub use loss::{weighted_bce, weighted_bce_logit_grad, PROB_EPS};
pub use lstm::{BiLstm, BiLstmCache, LstmDirection};
pub use params::{adam_step, AdamConfig, ParamId, ParamStore};
pub use tensor::Tensor;

use rand::Rng;

/// Uniform `±1/sqrt(fan_in)` weights of shape `[fan_in, fan_out]`.
pub fn init_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::from_parts_unchecked(vec![fan_in, fan_out], data)
}

/// Registers a `d_in -> d_out` affine map with zero bias.
pub fn add_dense<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, d_in: usize, d_out: usize) -> Dense {
    let w = store.add(format!("{name}.w"), init_uniform(rng, d_in, d_out));
    let b = store.add(format!("{name}.b"), Tensor::zeros(vec![d_out]));
    Dense { w, b, d_in, d_out }
}

/// Registers one LSTM direction; the forget-gate bias starts at +1.
pub fn add_lstm_direction<R: Rng>(
    store: &mut ParamStore,
    rng: &mut R,
    name: &str,
    d_in: usize,
    hidden: usize,
) -> LstmDirection {
    let wx = store.add(format!("{name}.wx"), init_uniform(rng, d_in, 4 * hidden));
    let wh = store.add(format!("{name}.wh"), init_uniform(rng, hidden, 4 * hidden));
    let mut bias = vec![0.0; 4 * hidden];
    bias[hidden..2 * hidden].fill(1.0);
    let b = store.add(format!("{name}.b"), Tensor::from_vec(bias));
    LstmDirection { wx, wh, b }
}
