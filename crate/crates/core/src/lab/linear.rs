//! Quantities that depend linearly on the measured moments.
//!
//! Every reconstruction step (q-system solve, efficiency correction, harmonic
//! fit) is linear in the moment estimates, so carrying the gradient with
//! respect to those estimates gives exact first-order error propagation,
//! including correlations between moments of one batch.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Linear {
    pub fn constant(value: f64, n_vars: usize) -> Self {
        Self {
            value,
            grad: vec![0.0; n_vars],
        }
    }

    pub fn variable(index: usize, value: f64, n_vars: usize) -> Self {
        let mut grad = vec![0.0; n_vars];
        grad[index] = 1.0;
        Self { value, grad }
    }

    pub fn add_scaled(&mut self, other: &Linear, factor: f64) {
        self.value += factor * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += factor * o;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            grad: self.grad.iter().map(|g| g * factor).collect(),
        }
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            value: self.value + offset,
            grad: self.grad.clone(),
        }
    }

    pub fn combination(terms: &[(f64, &Linear)], n_vars: usize) -> Self {
        let mut out = Self::constant(0.0, n_vars);
        for (f, l) in terms {
            out.add_scaled(l, *f);
        }
        out
    }
}

/// Covariance of the moment estimates: one dense block per measurement
/// setting, independent across settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    pub block: usize,
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockCovariance {
    pub fn empty() -> Self {
        Self {
            block: 0,
            blocks: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.block * self.blocks.len()
    }

    pub fn covariance(&self, x: &Linear, y: &Linear) -> f64 {
        let mut acc = 0.0;
        for (s, c) in self.blocks.iter().enumerate() {
            let off = s * self.block;
            for i in 0..self.block {
                let gi = x.grad[off + i];
                if gi == 0.0 {
                    continue;
                }
                for j in 0..self.block {
                    acc += gi * c[(i, j)] * y.grad[off + j];
                }
            }
        }
        acc
    }

    pub fn se(&self, x: &Linear) -> f64 {
        self.covariance(x, x).max(0.0).sqrt()
    }

    pub fn estimate(&self, x: &Linear) -> Estimate {
        Estimate {
            value: x.value,
            se: self.se(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `(value - truth) / se`, zero when both the deviation and the error vanish.
    pub fn z_score(&self, truth: f64) -> f64 {
        let d = self.value - truth;
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, truth: f64, n_se: f64) -> bool {
        (self.value - truth).abs() <= n_se * self.se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}
