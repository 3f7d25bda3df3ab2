use log::warn;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const DEGREE_EPS: f64 = 1e-8;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 500;
const FALLBACK_LAMBDA: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ScaledLaplacian {
    pub l_tilde: Array2<f64>,
    pub lambda_max: f64,
    /// False when power iteration hit the iteration cap and the fallback was used.
    pub converged: bool,
}

impl ScaledLaplacian {
    pub fn size(&self) -> usize {
        self.l_tilde.nrows()
    }
}

/// `2L/λ_max − I` for the symmetric normalised Laplacian of `a`.
///
/// Degrees use `|a_ij|` so signed edges still give a valid normalisation;
/// with `clamp_negative` the negative entries are dropped first.
pub fn scaled_laplacian(a: &Array2<f64>, clamp_negative: bool) -> Result<ScaledLaplacian> {
    let c = a.nrows();
    if a.ncols() != c {
        return Err(Error::domain(format!("adjacency must be square, got {:?}", a.shape())));
    }
    for i in 0..c {
        if a[[i, i]] != 0.0 {
            return Err(Error::domain(format!("adjacency has nonzero diagonal at {i}")));
        }
        for j in (i + 1)..c {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-12 {
                return Err(Error::domain(format!("adjacency is not symmetric at ({i}, {j})")));
            }
        }
    }
    let a = if clamp_negative { a.mapv(|v| v.max(0.0)) } else { a.clone() };
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|r| 1.0 / (r.iter().map(|v| v.abs()).sum::<f64>() + DEGREE_EPS).sqrt())
        .collect();
    let mut l = Array2::from_shape_fn((c, c), |(i, j)| -a[[i, j]] * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..c {
        l[[i, i]] += 1.0;
    }
    let (lambda_max, converged) = largest_eigenvalue(&l);
    if !converged {
        warn!("power iteration did not converge in {POWER_MAX_ITER} steps; using λ_max = {FALLBACK_LAMBDA}");
    }
    let mut l_tilde = l * (2.0 / lambda_max);
    for i in 0..c {
        l_tilde[[i, i]] -= 1.0;
    }
    Ok(ScaledLaplacian {
        l_tilde,
        lambda_max,
        converged,
    })
}

/// Power iteration stopped on the eigen-residual `‖Lv − λv‖`. The Laplacian
/// is positive semi-definite, so the dominant eigenvalue is the largest one.
fn largest_eigenvalue(l: &Array2<f64>) -> (f64, bool) {
    let c = l.nrows();
    if c == 0 {
        return (FALLBACK_LAMBDA, true);
    }
    // fixed, non-symmetric start so no eigenvector is orthogonal to it by construction
    let mut v = Array1::from_shape_fn(c, |i| 1.0 + ((i as f64 + 1.0) * 0.618_034).fract());
    v /= v.dot(&v).sqrt();
    for _ in 0..POWER_MAX_ITER {
        let w = l.dot(&v);
        let lambda = v.dot(&w);
        let residual = &w - &(&v * lambda);
        if residual.dot(&residual).sqrt() < POWER_TOL {
            return (lambda, true);
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
    }
    (FALLBACK_LAMBDA, false)
}
