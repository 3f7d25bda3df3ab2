use ndarray::Array2;
use rand::Rng;

use super::laplacian::ScaledLaplacian;
use crate::error::{Error, Result};
use crate::nn::{tanh_backward, tanh_forward, Param};

/// `[T⁰(L̃)·h, T¹(L̃)·h, …]` up to `order` terms via the three-term recurrence.
pub fn chebyshev_basis(lap: &Array2<f64>, h: &Array2<f64>, order: usize) -> Vec<Array2<f64>> {
    let mut z = Vec::with_capacity(order);
    if order == 0 {
        return z;
    }
    z.push(h.clone());
    if order > 1 {
        z.push(lap.dot(h));
    }
    for f in 2..order {
        let next = lap.dot(&z[f - 1]) * 2.0 - &z[f - 2];
        z.push(next);
    }
    z
}

/// Gradient with respect to `h` given gradients for every basis term.
pub fn chebyshev_basis_backward(lap: &Array2<f64>, mut dz: Vec<Array2<f64>>) -> Array2<f64> {
    let order = dz.len();
    for f in (2..order).rev() {
        let g = std::mem::take(&mut dz[f]);
        dz[f - 1] += &(lap.t().dot(&g) * 2.0);
        dz[f - 2] -= &g;
    }
    if order > 1 {
        let g = std::mem::take(&mut dz[1]);
        dz[0] += &lap.t().dot(&g);
    }
    dz.swap_remove(0)
}

/// `tanh(Σ_f T^f(L̃)·h·W^f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebLayer {
    pub weights: Vec<Param>,
}

#[derive(Clone, Debug)]
pub struct ChebCache {
    pub basis: Vec<Array2<f64>>,
    pub out: Array2<f64>,
}

impl ChebLayer {
    pub fn new<R: Rng>(name: &str, order: usize, in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("Chebyshev order must be at least 1"));
        }
        let weights = (0..order)
            .map(|f| Param::glorot(format!("{name}.w{f}"), "weight", in_dim, out_dim, rng))
            .collect();
        Ok(ChebLayer { weights })
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].value.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights[0].value.ncols()
    }

    pub fn preactivation(&self, basis: &[Array2<f64>]) -> Array2<f64> {
        let mut y = basis[0].dot(&self.weights[0].value);
        for (z, w) in basis.iter().zip(&self.weights).skip(1) {
            y += &z.dot(&w.value);
        }
        y
    }

    pub fn forward(&self, lap: &ScaledLaplacian, h: &Array2<f64>) -> Result<ChebCache> {
        if h.nrows() != lap.size() || h.ncols() != self.in_dim() {
            return Err(Error::domain(format!(
                "Chebyshev layer expects {}×{} input, got {:?}",
                lap.size(),
                self.in_dim(),
                h.shape()
            )));
        }
        Ok(self.forward_basis(chebyshev_basis(&lap.l_tilde, h, self.order())))
    }

    /// Forward from an already expanded basis, e.g. one cached for a fixed input.
    pub fn forward_basis(&self, basis: Vec<Array2<f64>>) -> ChebCache {
        let out = tanh_forward(&self.preactivation(&basis));
        ChebCache { basis, out }
    }

    /// Accumulates weight gradients. The input gradient is only formed when
    /// a Laplacian is supplied.
    pub fn backward(&mut self, lap: Option<&ScaledLaplacian>, cache: &ChebCache, dout: &Array2<f64>) -> Option<Array2<f64>> {
        let dpre = tanh_backward(&cache.out, dout);
        for (w, z) in self.weights.iter_mut().zip(&cache.basis) {
            w.accumulate(&z.t().dot(&dpre));
        }
        lap.map(|lap| {
            let dz = self.weights.iter().map(|w| dpre.dot(&w.value.t())).collect();
            chebyshev_basis_backward(&lap.l_tilde, dz)
        })
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.weights.iter()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.weights.iter_mut()
    }
}
