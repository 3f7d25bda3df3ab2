use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GraphInput, HfgcnModel};
use super::{ClassWeights, HfgcnConfig, Masks, PatientGraph};
use crate::error::{Error, Result};
use crate::metrics::compute_metrics;
use crate::nn::{argmax_rows, cross_entropy, load_checkpoint, save_checkpoint, softmax_rows, AdamConfig, Param};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_f1: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HfgcnHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
}

impl HfgcnHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_acc,val_f1\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{},{:.10},{:.10},{:.10}", r.epoch, r.train_loss, r.val_acc, r.val_f1);
        }
        out
    }
}

fn class_weights(cfg: &HfgcnConfig, labels: &[usize], train: &[usize]) -> Option<[f64; 2]> {
    match cfg.class_weights? {
        ClassWeights::Fixed(w) => Some(w),
        ClassWeights::Auto => {
            let pos = train.iter().filter(|&&i| labels[i] == 1).count();
            let counts = [train.len() - pos, pos];
            let n = train.len() as f64;
            Some(counts.map(|k| if k == 0 { 1.0 } else { n / (2.0 * k as f64) }))
        }
    }
}

/// Full-graph training on the train-mask nodes with Adam. The parameters
/// kept are those with the best validation F1, lower validation loss
/// breaking ties; without validation nodes the last epoch is kept.
pub fn train_hfgcn(g: &PatientGraph, cfg: &HfgcnConfig, seed: u64) -> Result<(HfgcnModel, HfgcnHistory)> {
    cfg.validate()?;
    g.validate()?;
    let train = Masks::indices(&g.masks.train);
    if train.is_empty() {
        return Err(Error::config(format!("patient {}: training mask is empty", g.patient)));
    }
    let val = Masks::indices(&g.masks.val);
    let labels: Vec<usize> = g.labels.iter().map(|&l| l as usize).collect();
    let weights = class_weights(cfg, &labels, &train);
    let input = GraphInput::new(g, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = HfgcnModel::new(cfg, g.x.ncols(), &mut rng)?;
    let adam = AdamConfig::with_lr(cfg.lr);

    let mut history = HfgcnHistory::default();
    let mut best: Option<(f64, f64, Vec<Array2<f64>>)> = None;
    for epoch in 1..=cfg.epochs {
        model.zero_grad();
        let pass = model.forward(&input)?;
        let probs = softmax_rows(&pass.logits);
        let (loss, dlogits) = cross_entropy(&probs, &labels, &train, weights.as_ref().map(|w| &w[..]))?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "patient {}: training loss became {loss} in epoch {epoch}",
                g.patient
            )));
        }

        let (val_acc, val_f1, val_loss) = if val.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let pred: Vec<u8> = argmax_rows(&probs).into_iter().map(|c| c as u8).collect();
            let m = compute_metrics(&pred, &g.labels, &g.masks.val);
            let (vl, _) = cross_entropy(&probs, &labels, &val, weights.as_ref().map(|w| &w[..]))?;
            (m.acc, m.f1, vl)
        };
        let improves = match &best {
            None => true,
            Some(_) if val.is_empty() => true,
            Some((f1, vl, _)) => val_f1 > *f1 || (val_f1 == *f1 && val_loss < *vl),
        };
        if improves {
            let snapshot = model.params().iter().map(|p| p.value.clone()).collect();
            best = Some((val_f1, val_loss, snapshot));
            history.best_epoch = epoch;
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_acc,
            val_f1,
            val_loss,
        });
        log::trace!("patient {} epoch {epoch}: loss {loss:.5} val f1 {val_f1:.3}", g.patient);

        model.backward(&input, &pass, &dlogits);
        for p in model.params_mut() {
            p.step(&adam);
        }
    }

    let (_, _, snapshot) = best.expect("at least one epoch");
    for (p, v) in model.params_mut().into_iter().zip(snapshot) {
        p.value = v;
    }
    model.zero_grad();
    Ok((model, history))
}

/// Per-node class probabilities; column 1 is the SOZ probability.
pub fn predict(g: &PatientGraph, model: &HfgcnModel) -> Result<Array2<f64>> {
    let input = GraphInput::new(g, &model.cfg)?;
    Ok(softmax_rows(&model.forward(&input)?.logits))
}

pub fn save_model(model: &HfgcnModel, path: &Path) -> Result<()> {
    let meta = serde_json::json!({ "model": "hfgcn", "config": model.cfg, "input_dim": model.input_dim });
    let params: Vec<&Param> = model.params();
    save_checkpoint(path, params, meta)
}

pub fn load_model(path: &Path) -> Result<HfgcnModel> {
    let ck = load_checkpoint(path)?;
    if ck.meta["model"] != "hfgcn" {
        return Err(Error::config(format!("{} is not a graph network checkpoint", path.display())));
    }
    let cfg: HfgcnConfig = serde_json::from_value(ck.meta["config"].clone())
        .map_err(|e| Error::config(format!("bad graph network config in checkpoint: {e}")))?;
    let input_dim = ck.meta["input_dim"]
        .as_u64()
        .ok_or_else(|| Error::config("checkpoint lacks input_dim"))? as usize;
    let mut model = HfgcnModel::new(&cfg, input_dim, &mut ChaCha8Rng::seed_from_u64(0))?;
    ck.restore(model.params_mut())?;
    Ok(model)
}
