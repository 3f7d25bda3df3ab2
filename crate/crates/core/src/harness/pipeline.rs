use std::path::Path;

use log::info;
use ndarray::{s, Array4};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::connstats::{
    adjacency_from_ccep, average_adjacency, GraphConfig, GraphSidecar, StoredGraph, GRAPH_MAGIC, GRAPH_VERSION,
};
use crate::dsp::features::{ccep_chain, TensorKind};
use crate::dsp::{build_baseline, extract_state_features, Band, FeatureTensor, PreprocessConfig, State};
use crate::error::{Error, Result};
use crate::io;
use crate::satae::{encode_cohort, AttentionPlacement, SataeModel};
use crate::synth::{CohortReader, PatientSource, RecordingId};

/// Settings a stored artifact directory was produced with.
pub(crate) const SETTINGS_FILE: &str = "settings.json";

/// Everything the per-patient jobs read.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub features: Vec<FeatureTensor>,
    pub graphs: Vec<StoredGraph>,
    pub latents: Vec<(AttentionPlacement, Vec<FeatureTensor>)>,
}

impl Inputs {
    pub fn latents(&self, placement: AttentionPlacement) -> Option<&[FeatureTensor]> {
        self.latents.iter().find(|(p, _)| *p == placement).map(|(_, l)| &l[..])
    }
}

pub fn worker_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))
}

/// Stored tensors are f32; rounding in memory keeps cached and fresh runs identical.
pub fn round_to_f32(t: &mut FeatureTensor) {
    t.data.mapv_inplace(|v| v as f32 as f64);
}

/// Band-power tensor `[site, state, band, bin]` over the behavioural states.
/// Recordings are rendered or read one at a time.
pub fn preprocess_patient(src: &dyn PatientSource, pp: &PreprocessConfig) -> Result<FeatureTensor> {
    let c = src.labels().len();
    let mut data = Array4::zeros((c, State::BEHAVIORAL.len(), Band::ALL.len(), pp.feat_len));
    for (k, &state) in State::BEHAVIORAL.iter().enumerate() {
        let rec = src.recording(RecordingId::Behavioral(state))?;
        let f = extract_state_features(&rec, pp)?;
        data.slice_mut(s![.., k, .., ..]).assign(&f);
    }
    let mut t = FeatureTensor {
        patient: src.index(),
        kind: TensorKind::BandPower,
        data,
        states: State::BEHAVIORAL.to_vec(),
        bands: Band::ALL.to_vec(),
        labels: src.labels().to_vec(),
        zscored: false,
    };
    if pp.zscore {
        t.zscore();
    }
    round_to_f32(&mut t);
    Ok(t)
}

pub fn preprocess_cohort(cohort: &CohortReader, pp: &PreprocessConfig, pool: &ThreadPool) -> Result<Vec<FeatureTensor>> {
    pool.install(|| {
        cohort
            .patients
            .par_iter()
            .map(|p| {
                info!("preprocessing patient {}", p.entry.index);
                preprocess_patient(p, pp)
            })
            .collect()
    })
}

/// Averaged CCEP adjacency of one patient, from all segments or `subset`.
pub fn build_graph(
    src: &dyn PatientSource,
    cfg: &GraphConfig,
    pp: &PreprocessConfig,
    subset: Option<&[usize]>,
) -> Result<StoredGraph> {
    let total = src.ccep_segments();
    let segments: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..total).collect(),
    };
    if segments.is_empty() {
        return Err(Error::config(format!("patient {}: no CCEP segments selected", src.index())));
    }
    if let Some(&bad) = segments.iter().find(|&&q| q >= total) {
        return Err(Error::config(format!(
            "patient {}: CCEP segment {bad} out of range (patient has {total})",
            src.index()
        )));
    }
    let baseline = build_baseline(&ccep_chain(&src.recording(RecordingId::Interictal)?, pp)?)?;
    let mats = segments
        .iter()
        .map(|&q| {
            let seg = ccep_chain(&src.recording(RecordingId::Ccep(q))?, pp)?;
            adjacency_from_ccep(&seg, &baseline, cfg).map(|(a, _)| a)
        })
        .collect::<Result<Vec<_>>>()?;
    let adjacency = average_adjacency(&mats)?;
    Ok(StoredGraph {
        sidecar: GraphSidecar {
            magic: GRAPH_MAGIC.into(),
            version: GRAPH_VERSION,
            patient: src.index(),
            c: adjacency.size(),
            rho_tau: cfg.rho_tau,
            alpha: cfg.alpha,
            q: segments.len(),
            eq8_literal: cfg.eq8_literal,
            ccep_subset: subset.map(<[usize]>::to_vec),
            dtype: "f64le".into(),
        },
        adjacency,
    })
}

pub fn build_graphs(
    cohort: &CohortReader,
    cfg: &GraphConfig,
    pp: &PreprocessConfig,
    subset: Option<&[usize]>,
    pool: &ThreadPool,
) -> Result<Vec<StoredGraph>> {
    pool.install(|| {
        cohort
            .patients
            .par_iter()
            .map(|p| {
                info!("building graph for patient {}", p.entry.index);
                build_graph(p, cfg, pp, subset)
            })
            .collect()
    })
}

/// Latent tensors, rounded to the precision they are stored with.
pub fn encode_latents(model: &SataeModel, features: &[FeatureTensor]) -> Result<Vec<FeatureTensor>> {
    let mut latents = encode_cohort(model, features)?;
    latents.iter_mut().for_each(round_to_f32);
    Ok(latents)
}

/// Loads a feature or latent store; `stage` names the command that writes it.
pub fn load_features(dir: &Path, stage: &'static str) -> Result<Vec<FeatureTensor>> {
    if !dir.is_dir() {
        return Err(Error::Dependency {
            stage,
            path: dir.to_path_buf(),
        });
    }
    let tensors = FeatureTensor::load_all(dir)?;
    if tensors.is_empty() {
        return Err(Error::Dependency {
            stage,
            path: dir.join("patient_000.json"),
        });
    }
    Ok(tensors)
}

pub fn load_graphs(dir: &Path, patients: &[usize]) -> Result<Vec<StoredGraph>> {
    patients.iter().map(|&p| StoredGraph::load(dir, p)).collect()
}

pub fn load_tensors(dir: &Path, patients: &[usize]) -> Result<Vec<FeatureTensor>> {
    patients.iter().map(|&p| FeatureTensor::load(dir, p)).collect()
}

/// Hex SHA-256 of the compact JSON form.
pub fn fingerprint_json(value: &Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct Settings {
    fingerprint: String,
    settings: Value,
}

/// Fingerprint recorded in `dir`, if any. Comparison goes through the
/// fingerprint because floats need not survive a JSON round trip bit-exactly.
pub(crate) fn read_settings(dir: &Path) -> Option<String> {
    let path = dir.join(SETTINGS_FILE);
    if !path.exists() {
        return None;
    }
    io::read_json::<Settings>(&path).ok().map(|s| s.fingerprint)
}

pub fn write_settings(dir: &Path, settings: &Value) -> Result<()> {
    io::create_dir(dir)?;
    let s = Settings {
        fingerprint: fingerprint_json(settings),
        settings: settings.clone(),
    };
    io::write_json(&dir.join(SETTINGS_FILE), &s)
}

/// What a feature store depends on.
pub fn feature_settings(cohort: &CohortReader, pp: &PreprocessConfig) -> Value {
    let patients: Vec<usize> = cohort.patients.iter().map(|p| p.entry.index).collect();
    json!({ "cohort": cohort.spec, "patients": patients, "preprocess": pp })
}

/// What a graph store depends on.
pub fn graph_settings(cohort: &CohortReader, pp: &PreprocessConfig, cfg: &GraphConfig, subset: Option<&[usize]>) -> Value {
    let patients: Vec<usize> = cohort.patients.iter().map(|p| p.entry.index).collect();
    json!({ "cohort": cohort.spec, "patients": patients, "preprocess": pp, "graph": cfg, "ccep_subset": subset })
}

/// Writes tensors plus the settings record that makes the directory reusable as a cache.
pub fn save_store(dir: &Path, tensors: &[FeatureTensor], settings: &Value) -> Result<()> {
    tensors.iter().try_for_each(|t| t.save(dir).map(drop))?;
    write_settings(dir, settings)
}

/// The settings stored alongside an artifact directory.
pub fn stored_settings(dir: &Path) -> Option<Value> {
    io::read_json::<Settings>(&dir.join(SETTINGS_FILE)).ok().map(|s| s.settings)
}

/// Reads the cached artifact in `dir` when it was made with `settings`,
/// otherwise computes, stores and returns it. Without a cache dir the
/// artifact is only computed.
pub(crate) fn cached<T>(
    dir: Option<&Path>,
    settings: &Value,
    load: impl FnOnce(&Path) -> Result<T>,
    compute: impl FnOnce() -> Result<T>,
    save: impl FnOnce(&Path, &T) -> Result<()>,
) -> Result<T> {
    let Some(dir) = dir else {
        return compute();
    };
    if read_settings(dir) == Some(fingerprint_json(settings)) {
        match load(dir) {
            Ok(v) => {
                info!("reusing {}", dir.display());
                return Ok(v);
            }
            Err(e) => log::warn!("cached {} unreadable ({e}); recomputing", dir.display()),
        }
    }
    let value = compute()?;
    // settings go last, so an interrupted write is never mistaken for a valid cache
    let stale = dir.join(SETTINGS_FILE);
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }
    save(dir, &value)?;
    write_settings(dir, settings)?;
    Ok(value)
}
