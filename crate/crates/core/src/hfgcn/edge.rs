use ndarray::{s, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{relu_backward, relu_forward, Param};

/// The `k` nearest other nodes of every node by squared Euclidean distance,
/// nearest first, ties to the lower index.
pub fn knn_pairs(h: &Array2<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let c = h.nrows();
    if k == 0 || k >= c {
        return Err(Error::config(format!("knn needs 1 ≤ K < C, got K = {k} with C = {c}")));
    }
    let mut dist = Array2::<f64>::zeros((c, c));
    for i in 0..c {
        for j in (i + 1)..c {
            let d: f64 = h.row(i).iter().zip(h.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    Ok((0..c)
        .map(|i| {
            let mut others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[[i, a]].total_cmp(&dist[[i, b]]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect())
}

/// Dynamic graph convolution: `max_k relu(relu([h_i, h_k]·W1)·W2)` over the
/// k-NN neighbourhood of each node in feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConv {
    /// `(2·D_in) × D_h`; the top half multiplies the centre node, the bottom half the neighbour.
    pub w1: Param,
    pub w2: Param,
    pub k: usize,
}

#[derive(Clone, Debug)]
pub struct EdgeCache {
    pub h: Array2<f64>,
    pub neighbours: Vec<Vec<usize>>,
    u_pre: Array2<f64>,
    u: Array2<f64>,
    e_pre: Array2<f64>,
    /// Winning edge row for each (node, output channel).
    argmax: Array2<usize>,
}

impl EdgeConv {
    pub fn new<R: Rng>(name: &str, k: usize, in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        EdgeConv {
            w1: Param::glorot(format!("{name}.w1"), "weight", 2 * in_dim, hidden, rng),
            w2: Param::glorot(format!("{name}.w2"), "weight", hidden, out_dim, rng),
            k,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.value.nrows() / 2
    }

    pub fn forward(&self, h: &Array2<f64>) -> Result<(Array2<f64>, EdgeCache)> {
        let d_in = self.in_dim();
        if h.ncols() != d_in {
            return Err(Error::domain(format!("EdgeConv expects width {d_in}, got {}", h.ncols())));
        }
        let neighbours = knn_pairs(h, self.k)?;
        let (c, k) = (h.nrows(), self.k);
        let centre = h.dot(&self.w1.value.slice(s![..d_in, ..]));
        let other = h.dot(&self.w1.value.slice(s![d_in.., ..]));
        let mut u_pre = Array2::zeros((c * k, self.w1.value.ncols()));
        for (i, nbrs) in neighbours.iter().enumerate() {
            for (slot, &j) in nbrs.iter().enumerate() {
                let mut row = u_pre.row_mut(i * k + slot);
                row.assign(&centre.row(i));
                row += &other.row(j);
            }
        }
        let u = relu_forward(&u_pre);
        let e_pre = u.dot(&self.w2.value);
        let d_out = e_pre.ncols();
        let mut out = Array2::zeros((c, d_out));
        let mut argmax = Array2::zeros((c, d_out));
        for i in 0..c {
            for d in 0..d_out {
                let mut best = i * k;
                for r in (i * k + 1)..(i * k + k) {
                    if e_pre[[r, d]] > e_pre[[best, d]] {
                        best = r;
                    }
                }
                argmax[[i, d]] = best;
                out[[i, d]] = e_pre[[best, d]].max(0.0);
            }
        }
        let cache = EdgeCache {
            h: h.clone(),
            neighbours,
            u_pre,
            u,
            e_pre,
            argmax,
        };
        Ok((out, cache))
    }

    /// Accumulates weight gradients and returns the input gradient. The k-NN
    /// selection itself is piecewise constant and carries no gradient.
    pub fn backward(&mut self, cache: &EdgeCache, dout: &Array2<f64>) -> Array2<f64> {
        let d_in = self.in_dim();
        let (c, d_out) = dout.dim();
        let mut de = Array2::zeros(cache.e_pre.raw_dim());
        for i in 0..c {
            for d in 0..d_out {
                de[[cache.argmax[[i, d]], d]] = dout[[i, d]];
            }
        }
        let de_pre = relu_backward(&cache.e_pre, &de);
        self.w2.accumulate(&cache.u.t().dot(&de_pre));
        let du_pre = relu_backward(&cache.u_pre, &de_pre.dot(&self.w2.value.t()));

        let hidden = du_pre.ncols();
        let mut d_centre = Array2::zeros((c, hidden));
        let mut d_other = Array2::zeros((c, hidden));
        for (i, nbrs) in cache.neighbours.iter().enumerate() {
            for (slot, &j) in nbrs.iter().enumerate() {
                let g = du_pre.row(i * self.k + slot);
                let mut a = d_centre.row_mut(i);
                a += &g;
                let mut b = d_other.row_mut(j);
                b += &g;
            }
        }
        let mut dw1 = Array2::zeros(self.w1.value.raw_dim());
        dw1.slice_mut(s![..d_in, ..]).assign(&cache.h.t().dot(&d_centre));
        dw1.slice_mut(s![d_in.., ..]).assign(&cache.h.t().dot(&d_other));
        self.w1.accumulate(&dw1);
        d_centre.dot(&self.w1.value.slice(s![..d_in, ..]).t()) + d_other.dot(&self.w1.value.slice(s![d_in.., ..]).t())
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.w1, &self.w2]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.w1, &mut self.w2]
    }
}
