use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{AstroError, Result};

/// Handle to one tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Named trainable tensors with gradients and Adam moments.
///
/// Every scalar is also reachable through a flat index running over the
/// parameters in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    offsets: Vec<usize>,
    total: usize,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        let n = value.len();
        self.offsets.push(self.total);
        self.total += n;
        self.params.push(Param {
            name,
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn flat_len(&self) -> usize {
        self.total
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        self.params[id.0].value.shape()
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        self.params[id.0].value.data()
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.params[id.0].value.data_mut()
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].grad
    }

    /// Value and gradient of the same parameter, borrowed together.
    pub fn value_and_grad_mut(&mut self, id: ParamId) -> (&[f64], &mut [f64]) {
        let p = &mut self.params[id.0];
        (p.value.data(), &mut p.grad)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Number of optimizer steps applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn locate(&self, flat: usize) -> (usize, usize) {
        assert!(flat < self.total, "flat index {flat} out of range");
        let p = self.offsets.partition_point(|&o| o <= flat) - 1;
        (p, flat - self.offsets[p])
    }

    pub fn flat_get(&self, flat: usize) -> f64 {
        let (p, i) = self.locate(flat);
        self.params[p].value.data()[i]
    }

    pub fn flat_set(&mut self, flat: usize, v: f64) {
        let (p, i) = self.locate(flat);
        self.params[p].value.data_mut()[i] = v;
    }

    pub fn flat_grad(&self, flat: usize) -> f64 {
        let (p, i) = self.locate(flat);
        self.params[p].grad[i]
    }

    /// Name of the parameter owning `flat`, with the element offset.
    pub fn flat_owner(&self, flat: usize) -> (&str, usize) {
        let (p, i) = self.locate(flat);
        (&self.params[p].name, i)
    }

    /// All values concatenated in flat order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    /// `(name, tensor)` pairs in insertion order.
    pub fn named_tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }

    /// Overwrites a tensor's values; the shape must match.
    pub fn set_tensor(&mut self, name: &str, value: &Tensor) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| AstroError::validation(format!("unknown parameter '{name}'")))?;
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(AstroError::Shape {
                stage: "parameter load",
                expected: p.value.shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        p.value.data_mut().copy_from_slice(value.data());
        Ok(())
    }

    /// Copies values (not gradients or moments) from a store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        assert_eq!(self.params.len(), other.params.len());
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            assert_eq!(dst.value.shape(), src.value.shape());
            dst.value.data_mut().copy_from_slice(src.value.data());
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update using the gradients currently stored.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for p in &mut store.params {
        let values = p.value.data_mut();
        for i in 0..values.len() {
            let g = p.grad[i];
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = p.m[i] / bc1;
            let v_hat = p.v[i] / bc2;
            values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}
