//! Per-patient band-power extraction and the feature store.
//!
//! A store holds one tensor per patient with axes
//! `site × state × band × bin` (little-endian f32) and a JSON sidecar. The
//! latent store produced by the autoencoder uses the same layout with the
//! last axis holding latent units.

use std::path::{Path, PathBuf};

use ndarray::{s, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::{bandpass, downsample, lowpass_filter, morlet_power_matrix, notch_filter, Band, Recording, State};
use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub notch_hz: f64,
    pub notch_q: f64,
    pub lowpass_hz: f64,
    pub feature_rate_hz: f64,
    pub ccep_rate_hz: f64,
    pub n_cycles: usize,
    pub feat_len: usize,
    /// z-score each (state, band) slice over sites before autoencoding.
    pub zscore: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            notch_hz: 50.0,
            notch_q: 30.0,
            lowpass_hz: 800.0,
            feature_rate_hz: 1000.0,
            ccep_rate_hz: 5000.0,
            n_cycles: 6,
            feat_len: 128,
            zscore: true,
        }
    }
}

/// Line-noise notch followed by the acquisition low-pass.
pub fn clean(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    let rec = notch_filter(rec, cfg.notch_hz, cfg.notch_q)?;
    lowpass_filter(&rec, cfg.lowpass_hz)
}

/// Cleaned CCEP or interictal data at the connectivity rate.
pub fn ccep_chain(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    downsample(&clean(rec, cfg)?, cfg.ccep_rate_hz)
}

/// `channels × 6 × feat_len` band-power features of one behavioural-state recording.
pub fn extract_state_features(rec: &Recording, cfg: &PreprocessConfig) -> Result<Array3<f64>> {
    let low = downsample(&clean(rec, cfg)?, cfg.feature_rate_hz)?;
    let mut out = Array3::zeros((rec.channels(), Band::ALL.len(), cfg.feat_len));
    for (b, band) in Band::ALL.iter().enumerate() {
        let def = band.def();
        let filtered = bandpass(&low, &def)?;
        let power = morlet_power_matrix(&filtered, &def, cfg.n_cycles as f64, cfg.feat_len)?;
        out.slice_mut(s![.., b, ..]).assign(&power);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    BandPower,
    Latent,
}

/// Site-indexed tensor for one patient: `[site, state, band, unit]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    pub patient: usize,
    pub kind: TensorKind,
    pub data: Array4<f64>,
    pub states: Vec<State>,
    pub bands: Vec<Band>,
    pub labels: Vec<u8>,
    pub zscored: bool,
}

pub const STORE_MAGIC: &str = "SOZGRAPH-SITES";
pub const STORE_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Sidecar {
    magic: String,
    version: u32,
    kind: TensorKind,
    patient: usize,
    axes: [String; 4],
    shape: [usize; 4],
    states: Vec<State>,
    bands: Vec<Band>,
    labels: Vec<u8>,
    zscored: bool,
    dtype: String,
}

impl FeatureTensor {
    pub fn sites(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn unit_len(&self) -> usize {
        self.data.shape()[3]
    }

    /// z-scores every (state, band) slice with mean and standard deviation
    /// pooled over sites and bins. Constant slices are only centred.
    pub fn zscore(&mut self) {
        let (_, ns, nb, _) = self.data.dim();
        for st in 0..ns {
            for b in 0..nb {
                let mut view = self.data.slice_mut(s![.., st, b, ..]);
                let n = view.len() as f64;
                let mean = view.sum() / n;
                let var = view.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                view.mapv_inplace(|v| (v - mean) / sd);
            }
        }
        self.zscored = true;
    }

    pub fn file_stem(patient: usize) -> String {
        format!("patient_{patient:03}")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        io::create_dir(dir)?;
        let stem = Self::file_stem(self.patient);
        let bin = dir.join(format!("{stem}.f32"));
        io::write_f32(&bin, self.data.iter().copied())?;
        let d = self.data.dim();
        let last = match self.kind {
            TensorKind::BandPower => "bin",
            TensorKind::Latent => "latent",
        };
        io::write_json(
            &dir.join(format!("{stem}.json")),
            &Sidecar {
                magic: STORE_MAGIC.into(),
                version: STORE_VERSION,
                kind: self.kind,
                patient: self.patient,
                axes: ["site".into(), "state".into(), "band".into(), last.into()],
                shape: [d.0, d.1, d.2, d.3],
                states: self.states.clone(),
                bands: self.bands.clone(),
                labels: self.labels.clone(),
                zscored: self.zscored,
                dtype: "f32le".into(),
            },
        )?;
        Ok(bin)
    }

    pub fn load(dir: &Path, patient: usize) -> Result<Self> {
        let stem = Self::file_stem(patient);
        let side_path = dir.join(format!("{stem}.json"));
        let side: Sidecar = io::read_json(&side_path)?;
        if side.magic != STORE_MAGIC {
            return Err(Error::Parse {
                path: side_path,
                offset: 0,
                msg: format!("bad magic {:?}", side.magic),
            });
        }
        if side.version != STORE_VERSION {
            return Err(Error::Version {
                path: side_path,
                found: side.version,
                expected: STORE_VERSION,
            });
        }
        let [a, b, c, d] = side.shape;
        if side.states.len() != b || side.bands.len() != c || side.labels.len() != a {
            return Err(Error::Parse {
                path: side_path,
                offset: 0,
                msg: "sidecar axis labels disagree with shape".into(),
            });
        }
        let values = io::read_f32(&dir.join(format!("{stem}.f32")), a * b * c * d)?;
        Ok(FeatureTensor {
            patient: side.patient,
            kind: side.kind,
            data: Array4::from_shape_vec((a, b, c, d), values).expect("length checked"),
            states: side.states,
            bands: side.bands,
            labels: side.labels,
            zscored: side.zscored,
        })
    }

    /// Loads every `patient_*.json` tensor in `dir`, sorted by patient index.
    pub fn load_all(dir: &Path) -> Result<Vec<Self>> {
        let mut ids = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = name
                .strip_prefix("patient_")
                .and_then(|r| r.strip_suffix(".json"))
                .and_then(|r| r.parse::<usize>().ok())
            {
                ids.push(id);
            }
        }
        ids.sort_unstable();
        ids.into_iter().map(|id| Self::load(dir, id)).collect()
    }
}
