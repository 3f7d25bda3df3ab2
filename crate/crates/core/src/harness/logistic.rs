use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// L2-regularised logistic regression fitted by full-batch gradient descent
/// on standardised features. Used as the reference classifier on latents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-2,
            lr: 0.5,
            epochs: 500,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0) || !(self.lr > 0.0) || self.epochs == 0 {
            return Err(Error::config(format!(
                "logistic: l2 must be >= 0, lr > 0 and epochs >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
    pub w: Array1<f64>,
    pub b: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    /// Fits on the rows of `x` selected by `rows`.
    pub fn fit(x: &Array2<f64>, labels: &[u8], rows: &[usize], cfg: &LogisticConfig) -> Result<Self> {
        cfg.validate()?;
        if rows.is_empty() {
            return Err(Error::config("logistic baseline needs at least one training row"));
        }
        let xt = x.select(Axis(0), rows);
        let y: Array1<f64> = rows.iter().map(|&i| labels[i] as f64).collect();
        let n = rows.len() as f64;
        let mean = xt.mean_axis(Axis(0)).expect("non-empty");
        let scale = xt.var_axis(Axis(0), 0.0).mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        let z = (&xt - &mean) / &scale;

        let mut w = Array1::zeros(x.ncols());
        let mut b = 0.0;
        for _ in 0..cfg.epochs {
            let p = (z.dot(&w) + b).mapv(sigmoid);
            let r = &p - &y;
            let gw = z.t().dot(&r) / n + &w * cfg.l2;
            let gb = r.sum() / n;
            w.scaled_add(-cfg.lr, &gw);
            b -= cfg.lr * gb;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("logistic baseline diverged".into()));
        }
        Ok(LogisticModel { mean, scale, w, b })
    }

    /// SOZ probability of every row.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Array1<f64> {
        ((x - &self.mean) / &self.scale).dot(&self.w).mapv(|z| sigmoid(z + self.b))
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<u8> {
        self.predict_proba(x).iter().map(|&p| u8::from(p > 0.5)).collect()
    }
}
