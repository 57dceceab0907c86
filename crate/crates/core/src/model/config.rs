use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::nn::AdamConfig;

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AstroConfig {
    pub n_nodes: usize,
    pub n_features: usize,
    /// Window length `T`.
    pub steps: usize,
    /// Per-node embedding width.
    pub d_in: usize,
    /// Graph-convolution width.
    pub d_g: usize,
    /// Recurrent hidden width per direction.
    pub d_h: usize,
    pub fusion_dim: usize,
    pub n_heads: usize,
    /// Widths of the three hidden fully connected layers.
    pub fc_widths: [usize; 3],
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Positive-class loss weight; `None` uses the training negative/positive ratio.
    pub pos_weight: Option<f64>,
    pub seed: u64,
}

impl Default for AstroConfig {
    fn default() -> Self {
        AstroConfig {
            n_nodes: 51,
            n_features: 1,
            steps: 10,
            d_in: 32,
            d_g: 32,
            d_h: 32,
            fusion_dim: 64,
            n_heads: 4,
            fc_widths: [32, 16, 8],
            batch_size: 64,
            epochs: 30,
            adam: AdamConfig::default(),
            pos_weight: None,
            seed: 0,
        }
    }
}

impl AstroConfig {
    /// Default widths for a given input geometry.
    pub fn for_shape(n_nodes: usize, n_features: usize, steps: usize) -> Self {
        AstroConfig {
            n_nodes,
            n_features,
            steps,
            ..AstroConfig::default()
        }
    }

    pub fn fusion_input(&self) -> usize {
        self.d_g + 2 * self.d_h
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_nodes", self.n_nodes),
            ("n_features", self.n_features),
            ("steps", self.steps),
            ("d_in", self.d_in),
            ("d_g", self.d_g),
            ("d_h", self.d_h),
            ("fusion_dim", self.fusion_dim),
            ("n_heads", self.n_heads),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(AstroError::validation(format!("{name} must be positive")));
            }
        }
        if self.fc_widths.contains(&0) {
            return Err(AstroError::validation("fully connected widths must be positive"));
        }
        if !self.fusion_dim.is_multiple_of(self.n_heads) {
            return Err(AstroError::validation(format!(
                "fusion_dim {} is not divisible by {} heads",
                self.fusion_dim, self.n_heads
            )));
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(AstroError::validation(format!("pos_weight must be positive, got {w}")));
            }
        }
        if !(self.adam.lr >= 0.0) {
            return Err(AstroError::validation("learning rate must be non-negative"));
        }
        Ok(())
    }
}
