use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::ops::{dense_backward, dense_forward};
use crate::error::Result;

/// A trainable tensor with its gradient buffer and optimiser moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub role: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    pub adam: AdamState,
}

impl Param {
    pub fn new(name: impl Into<String>, role: impl Into<String>, value: Array2<f64>) -> Self {
        let shape = value.dim();
        Param {
            name: name.into(),
            role: role.into(),
            grad: Array2::zeros(shape),
            adam: AdamState::new(shape),
            value,
        }
    }

    pub fn zeros(name: impl Into<String>, role: impl Into<String>, shape: (usize, usize)) -> Self {
        Param::new(name, role, Array2::zeros(shape))
    }

    /// Glorot-uniform initialisation in ±√(6/(fan_in+fan_out)).
    pub fn glorot<R: Rng>(
        name: impl Into<String>,
        role: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let value = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit));
        Param::new(name, role, value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn accumulate(&mut self, g: &Array2<f64>) {
        self.grad += g;
    }

    pub fn step(&mut self, cfg: &AdamConfig) {
        adam_step(&mut self.value, &self.grad, &mut self.adam, cfg);
    }
}

/// Affine layer `x·W + b`; the activation is applied by the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
}

impl Dense {
    pub fn glorot<R: Rng>(name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        Dense {
            w: Param::glorot(format!("{name}.w"), "weight", fan_in, fan_out, rng),
            b: Param::zeros(format!("{name}.b"), "bias", (1, fan_out)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        dense_forward(x, self.w.value.view(), self.b.value.view())
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        let (dx, dw, db) = dense_backward(x, self.w.value.view(), dy);
        self.w.accumulate(&dw);
        self.b.accumulate(&db);
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.w, &self.b]
    }
}
