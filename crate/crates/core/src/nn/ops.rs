//! Layer primitives with explicit forward and backward passes.
//!
//! Every batch is a matrix with one sample (or node) per row.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

/// `y = x·W + b` with `b` a `1 × out` row broadcast over the batch.
pub fn dense_forward(x: ArrayView2<f64>, w: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != w.nrows() {
        return Err(Error::domain(format!(
            "dense: input width {} does not match weight rows {}",
            x.ncols(),
            w.nrows()
        )));
    }
    if b.nrows() != 1 || b.ncols() != w.ncols() {
        return Err(Error::domain(format!(
            "dense: bias shape {:?} does not match output width {}",
            b.shape(),
            w.ncols()
        )));
    }
    Ok(x.dot(&w) + &b)
}

/// Gradients of the affine map: returns `(dx, dW, db)`.
pub fn dense_backward(
    x: ArrayView2<f64>,
    w: ArrayView2<f64>,
    dy: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let dx = dy.dot(&w.t());
    let dw = x.t().dot(&dy);
    let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    (dx, dw, db)
}

pub fn tanh_forward(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(f64::tanh)
}

/// Backward of tanh expressed through its output `y`.
pub fn tanh_backward(y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(y).for_each(|d, &y| *d *= 1.0 - y * y);
    dx
}

pub fn relu_forward(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Subgradient 0 at the kink.
pub fn relu_backward(x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(x).for_each(|d, &x| {
        if x <= 0.0 {
            *d = 0.0
        }
    });
    dx
}

/// Average pooling with window 2 and stride 2 along each row.
pub fn avgpool1d(x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() % 2 != 0 {
        return Err(Error::domain(format!("avgpool1d needs an even width, got {}", x.ncols())));
    }
    let even = x.slice(s![.., ..;2]);
    let odd = x.slice(s![.., 1..;2]);
    Ok((&even + &odd) * 0.5)
}

pub fn avgpool1d_backward(dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = Array2::zeros((dy.nrows(), dy.ncols() * 2));
    dx.slice_mut(s![.., ..;2]).assign(&(dy * 0.5));
    dx.slice_mut(s![.., 1..;2]).assign(&(dy * 0.5));
    dx
}

/// Nearest-neighbour upsampling: every column is repeated twice.
pub fn unpool1d(x: &Array2<f64>) -> Array2<f64> {
    let mut y = Array2::zeros((x.nrows(), x.ncols() * 2));
    y.slice_mut(s![.., ..;2]).assign(x);
    y.slice_mut(s![.., 1..;2]).assign(x);
    y
}

pub fn unpool1d_backward(dy: &Array2<f64>) -> Array2<f64> {
    &dy.slice(s![.., ..;2]) + &dy.slice(s![.., 1..;2])
}

pub fn hadamard(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::domain(format!(
            "hadamard: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b)
}

/// Returns `(da, db)`.
pub fn hadamard_backward(a: &Array2<f64>, b: &Array2<f64>, dy: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    (dy * b, dy * a)
}

/// Euclidean norm of every row.
pub fn row_norms(x: &Array2<f64>) -> Vec<f64> {
    x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// Scales row `i` of `x` by `w[i]`.
pub fn scale_rows(x: &Array2<f64>, w: &[f64]) -> Array2<f64> {
    let mut y = x.clone();
    for (mut row, &wi) in y.rows_mut().into_iter().zip(w) {
        row *= wi;
    }
    y
}

/// Backward of `w = row_norms(x)`; zero rows receive a zero subgradient.
pub fn row_norms_backward(x: &Array2<f64>, norms: &[f64], dw: &[f64]) -> Array2<f64> {
    let mut dx = Array2::zeros(x.raw_dim());
    for (i, (mut drow, row)) in dx.rows_mut().into_iter().zip(x.rows()).enumerate() {
        if norms[i] > 0.0 {
            drow.assign(&(&row * (dw[i] / norms[i])));
        }
    }
    dx
}
