use std::path::Path;

use ndarray::{Array2, Array4, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SataeConfig, SataeModel};
use crate::dsp::features::TensorKind;
use crate::dsp::FeatureTensor;
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, mse, save_checkpoint, AdamConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean reconstruction MSE of each epoch, weighted by batch size.
    pub epoch_loss: Vec<f64>,
}

/// Stacks every (patient, site, state, band) vector into one row.
pub fn training_matrix(tensors: &[FeatureTensor]) -> Result<Array2<f64>> {
    let width = match tensors.first() {
        Some(t) => t.unit_len(),
        None => return Ok(Array2::zeros((0, 0))),
    };
    let mut rows = Vec::new();
    for t in tensors {
        if t.unit_len() != width {
            return Err(Error::domain(format!(
                "patient {} has feature length {}, expected {width}",
                t.patient,
                t.unit_len()
            )));
        }
        rows.extend(t.data.iter().copied());
    }
    let n = rows.len() / width;
    Ok(Array2::from_shape_vec((n, width), rows).expect("whole rows"))
}

/// Trains one autoencoder on the pooled vectors of all patients.
pub fn train_shared(tensors: &[FeatureTensor], cfg: &SataeConfig, seed: u64) -> Result<(SataeModel, TrainHistory)> {
    let x = training_matrix(tensors)?;
    train_on_matrix(&x, cfg, seed)
}

pub(crate) fn train_on_matrix(x: &Array2<f64>, cfg: &SataeConfig, seed: u64) -> Result<(SataeModel, TrainHistory)> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::config("autoencoder training set is empty"));
    }
    if x.ncols() != cfg.input_dim {
        return Err(Error::domain(format!(
            "feature length {} does not match input_dim {}",
            x.ncols(),
            cfg.input_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SataeModel::new(cfg, &mut rng)?;
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            model.zero_grad();
            let pass = model.forward(xb.view())?;
            let (loss, grad) = mse(&pass.reconstruction, &xb)?;
            model.backward(&pass, &grad);
            for p in model.params_mut() {
                p.step(&adam);
            }
            total += loss * batch.len() as f64;
        }
        let mean = total / x.nrows() as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical(format!("autoencoder loss became {mean} in epoch {}", epoch + 1)));
        }
        log::debug!("satae epoch {}: mse {mean:.6}", epoch + 1);
        history.epoch_loss.push(mean);
    }
    Ok((model, history))
}

/// Latent tensors `[site, state, band, N]` for every patient.
pub fn encode_cohort(model: &SataeModel, tensors: &[FeatureTensor]) -> Result<Vec<FeatureTensor>> {
    tensors
        .iter()
        .map(|t| {
            let (c, ns, nb, _) = t.data.dim();
            let x = training_matrix(std::slice::from_ref(t))?;
            let l = model.encode(x.view())?;
            let n = model.cfg.latent_dim;
            let data = Array4::from_shape_vec((c, ns, nb, n), l.iter().copied().collect()).expect("row per vector");
            Ok(FeatureTensor {
                patient: t.patient,
                kind: TensorKind::Latent,
                data,
                states: t.states.clone(),
                bands: t.bands.clone(),
                labels: t.labels.clone(),
                zscored: t.zscored,
            })
        })
        .collect()
}

pub fn save_model(model: &SataeModel, path: &Path) -> Result<()> {
    let meta = serde_json::json!({ "model": "satae", "config": model.cfg });
    save_checkpoint(path, model.params(), meta)
}

pub fn load_model(path: &Path) -> Result<SataeModel> {
    let ck = load_checkpoint(path)?;
    if ck.meta["model"] != "satae" {
        return Err(Error::config(format!("{} is not an autoencoder checkpoint", path.display())));
    }
    let cfg: SataeConfig = serde_json::from_value(ck.meta["config"].clone())
        .map_err(|e| Error::config(format!("bad autoencoder config in checkpoint: {e}")))?;
    let mut model = SataeModel::new(&cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    ck.restore(model.params_mut())?;
    Ok(model)
}
