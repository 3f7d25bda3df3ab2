use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Numerically stable row-wise softmax (max subtraction).
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut p = x.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    p
}

/// Cross-entropy over the selected `rows` with optional per-class weights.
///
/// Weighted losses are normalised by the total weight of the selected rows,
/// so the unweighted case reduces to the mean over rows. The returned gradient
/// is with respect to the logits that produced `probs` and is zero outside
/// `rows`.
pub fn cross_entropy(
    probs: &Array2<f64>,
    labels: &[usize],
    rows: &[usize],
    class_weights: Option<&[f64]>,
) -> Result<(f64, Array2<f64>)> {
    if labels.len() != probs.nrows() {
        return Err(Error::domain(format!(
            "cross_entropy: {} labels for {} rows",
            labels.len(),
            probs.nrows()
        )));
    }
    if rows.is_empty() {
        return Err(Error::config("cross_entropy: no rows selected"));
    }
    if let Some(w) = class_weights {
        if w.len() != probs.ncols() {
            return Err(Error::config("cross_entropy: one weight per class required"));
        }
    }
    let weight = |c: usize| class_weights.map_or(1.0, |w| w[c]);
    let total: f64 = rows.iter().map(|&i| weight(labels[i])).sum();
    if total <= 0.0 {
        return Err(Error::config("cross_entropy: selected rows carry zero total weight"));
    }
    let mut loss = 0.0;
    let mut grad = Array2::zeros(probs.raw_dim());
    for &i in rows {
        let y = labels[i];
        if y >= probs.ncols() {
            return Err(Error::domain(format!("label {y} out of range")));
        }
        let w = weight(y) / total;
        loss -= w * probs[[i, y]].max(f64::MIN_POSITIVE).ln();
        let mut g = grad.row_mut(i);
        g.assign(&(&probs.row(i) * w));
        g[y] -= w;
    }
    Ok((loss, grad))
}

/// Mean squared error averaged over all entries, i.e. the per-sample
/// `‖x − y‖² / I` averaged over the batch. Gradient is with respect to `x`.
pub fn mse(x: &Array2<f64>, y: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if x.shape() != y.shape() {
        return Err(Error::domain(format!(
            "mse: shapes {:?} and {:?} differ",
            x.shape(),
            y.shape()
        )));
    }
    let n = x.len() as f64;
    let diff = x - y;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// Index of the larger entry per row (first on ties).
pub fn argmax_rows(x: &Array2<f64>) -> Vec<usize> {
    x.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
