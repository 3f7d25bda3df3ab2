//! Binary classification metrics with SOZ as the positive class.

use log::debug;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Counts over the nodes where `mask` is set.
    pub fn from_predictions(pred: &[u8], labels: &[u8], mask: &[bool]) -> Self {
        let mut c = Confusion::default();
        for ((&p, &y), &m) in pred.iter().zip(labels).zip(mask) {
            if !m {
                continue;
            }
            match (p == 1, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when a ratio had a zero denominator and was reported as 0.
    pub zero_denominator: bool,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(c: &Confusion) -> Self {
        let mut flag = false;
        let acc = ratio(c.tp + c.tn, c.total(), &mut flag);
        let recall = ratio(c.tp, c.tp + c.fn_, &mut flag);
        let precision = ratio(c.tp, c.tp + c.fp, &mut flag);
        let f1 = if precision + recall == 0.0 {
            flag = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if flag {
            debug!("zero denominator in metrics for {c:?}; affected ratios reported as 0");
        }
        Metrics {
            acc,
            recall,
            precision,
            f1,
            zero_denominator: flag,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.acc, self.recall, self.precision, self.f1]
    }
}

pub fn compute_metrics(pred: &[u8], labels: &[u8], mask: &[bool]) -> Metrics {
    Metrics::from_confusion(&Confusion::from_predictions(pred, labels, mask))
}

/// Mean and sample standard deviation (divisor n − 1; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
