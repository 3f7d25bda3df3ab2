use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::assemble::assemble_node_features;
use super::logistic::LogisticModel;
use super::pipeline::{
    build_graphs, cached, encode_latents, feature_settings, fingerprint_json, graph_settings, load_graphs,
    load_tensors, preprocess_cohort, worker_pool, Inputs,
};
use super::split::split_nodes;
use super::{placement_name, CheckpointPolicy, ExperimentConfig, Variant};
use crate::error::{Error, Result};
use crate::hfgcn::{self, Masks, PatientGraph};
use crate::io;
use crate::metrics::{compute_metrics, mean_std, Metrics};
use crate::nn::argmax_rows;
use crate::satae::{self, SataeConfig};
use crate::synth::CohortReader;

pub const METRICS_HEADER: &str = "variant,model,features,patients,repeats,acc_mean,acc_std,recall_mean,recall_std,\
precision_mean,precision_std,f1_mean,f1_std,fingerprint";

const PER_PATIENT_HEADER: &str = "variant,model,patient,repeat,acc,recall,precision,f1,zero_denominator";

const SPLIT_NOTE: &str = "node splits are stratified by label and repeated with seeds seed+0..repeats-1; \
the source protocol states only the 10/20/70 proportions";

/// Test-set metrics of one (variant, model, patient, repeat) job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRow {
    pub variant: String,
    pub model: String,
    pub patient: usize,
    pub repeat: usize,
    pub metrics: Metrics,
}

/// Mean and standard deviation across patients of the per-patient means over repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub variant: String,
    pub model: String,
    /// Node feature width N′.
    pub features: usize,
    pub patients: usize,
    pub repeats: usize,
    /// acc, recall, precision, f1
    pub mean: [f64; 4],
    pub std: [f64; 4],
    pub fingerprint: String,
}

impl AggregateRow {
    pub fn csv_line(&self) -> String {
        let mut line = format!(
            "{},{},{},{},{}",
            self.variant, self.model, self.features, self.patients, self.repeats
        );
        for k in 0..4 {
            let _ = write!(line, ",{},{}", self.mean[k], self.std[k]);
        }
        let _ = write!(line, ",{}", self.fingerprint);
        line
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub fingerprint: String,
    pub rows: Vec<AggregateRow>,
    pub per_patient: Vec<PatientRow>,
    pub wall_clock_s: f64,
}

impl RunOutcome {
    pub fn row(&self, variant: &str, model: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.variant == variant && r.model == model)
    }
}

/// SHA-256 of the configuration, ignoring settings that cannot change
/// results (worker count and output or cache locations).
pub fn fingerprint(cfg: &ExperimentConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    if let Value::Object(map) = &mut v {
        for key in ["workers", "runs_dir", "artifacts"] {
            map.remove(key);
        }
    }
    fingerprint_json(&v)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// (split seed, model seed) of one job. Depends only on the run seed,
/// repeat and patient, so every variant sees the same splits.
pub fn job_seeds(seed: u64, repeat: usize, patient: usize) -> (u64, u64) {
    let split = splitmix(splitmix(seed.wrapping_add(repeat as u64)) ^ patient as u64);
    (split, splitmix(split ^ 0x5eed))
}

fn new_run_dir(runs_dir: &Path, fingerprint: &str) -> Result<PathBuf> {
    io::create_dir(runs_dir)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let stem = format!("{secs}-{}", &fingerprint[..12]);
    let mut dir = runs_dir.join(&stem);
    let mut n = 1;
    while dir.exists() {
        dir = runs_dir.join(format!("{stem}-{n}"));
        n += 1;
    }
    io::create_dir(&dir)?;
    Ok(dir)
}

/// Features, graphs and latents for every placement the variants need,
/// reusing the artifact cache where its settings match.
fn prepare_inputs(
    cfg: &ExperimentConfig,
    cohort: &CohortReader,
    pool: &rayon::ThreadPool,
    checkpoints: Option<&Path>,
) -> Result<Inputs> {
    let patients: Vec<usize> = cohort.patients.iter().map(|p| p.entry.index).collect();
    let cache = |name: &str| cfg.artifacts.as_ref().map(|a| a.join(name));

    let feature_settings = feature_settings(cohort, &cfg.preprocess);
    let features = cached(
        cache("features").as_deref(),
        &feature_settings,
        |dir| load_tensors(dir, &patients),
        || preprocess_cohort(cohort, &cfg.preprocess, pool),
        |dir, tensors| tensors.iter().try_for_each(|t| t.save(dir).map(drop)),
    )?;

    let graph_settings = graph_settings(cohort, &cfg.preprocess, &cfg.graph, cfg.ccep_subset.as_deref());
    let graphs = cached(
        cache("graphs").as_deref(),
        &graph_settings,
        |dir| load_graphs(dir, &patients),
        || build_graphs(cohort, &cfg.graph, &cfg.preprocess, cfg.ccep_subset.as_deref(), pool),
        |dir, graphs| graphs.iter().try_for_each(|g| g.save(dir)),
    )?;

    let mut latents = Vec::new();
    for placement in cfg.placements() {
        let sae_cfg = SataeConfig {
            attention_placement: placement,
            ..cfg.satae.clone()
        };
        let settings = json!({ "features": fingerprint_json(&feature_settings), "satae": sae_cfg, "seed": cfg.seed });
        let (model, encoded) = cached(
            cache(&format!("latents_{}", placement_name(placement))).as_deref(),
            &settings,
            |dir| Ok((satae::load_model(&dir.join("satae.ckpt"))?, load_tensors(dir, &patients)?)),
            || {
                info!("training shared autoencoder (attention {})", placement_name(placement));
                let (model, history) = pool.install(|| satae::train_shared(&features, &sae_cfg, cfg.seed))?;
                if let Some(last) = history.epoch_loss.last() {
                    info!("autoencoder final reconstruction loss {last:.5}");
                }
                let encoded = encode_latents(&model, &features)?;
                Ok((model, encoded))
            },
            |dir, (model, encoded)| {
                io::create_dir(dir)?;
                satae::save_model(model, &dir.join("satae.ckpt"))?;
                encoded.iter().try_for_each(|t| t.save(dir).map(drop))
            },
        )?;
        if let Some(dir) = checkpoints {
            satae::save_model(&model, &dir.join(format!("satae_{}.ckpt", placement_name(placement))))?;
        }
        latents.push((placement, encoded));
    }
    Ok(Inputs {
        features,
        graphs,
        latents,
    })
}

struct Job<'a> {
    variant: &'a Variant,
    repeat: usize,
    slot: usize,
}

fn run_job(cfg: &ExperimentConfig, inputs: &Inputs, job: &Job, checkpoints: Option<&Path>) -> Result<Vec<PatientRow>> {
    let latents = inputs.latents(job.variant.placement).expect("latents prepared for every placement");
    let latent = &latents[job.slot];
    let graph = &inputs.graphs[job.slot];
    let patient = latent.patient;
    if graph.sidecar.patient != patient || graph.adjacency.size() != latent.sites() {
        return Err(Error::domain(format!(
            "graph of patient {} ({} sites) does not match latents of patient {patient} ({} sites)",
            graph.sidecar.patient,
            graph.adjacency.size(),
            latent.sites()
        )));
    }
    let x = assemble_node_features(latent, &job.variant.bands, &job.variant.states)?;
    let (split_seed, model_seed) = job_seeds(cfg.seed, job.repeat, patient);
    let masks = split_nodes(&latent.labels, cfg.split_fractions, split_seed)?;
    let g = PatientGraph {
        patient,
        x,
        adjacency: graph.adjacency.clone(),
        labels: latent.labels.clone(),
        masks,
    };

    let (model, history) = hfgcn::train_hfgcn(&g, &job.variant.hfgcn, model_seed)?;
    let probs = hfgcn::predict(&g, &model)?;
    let pred: Vec<u8> = argmax_rows(&probs).into_iter().map(|c| c as u8).collect();
    let row = |model: &str, metrics: Metrics| PatientRow {
        variant: job.variant.label.clone(),
        model: model.into(),
        patient,
        repeat: job.repeat,
        metrics,
    };
    let mut rows = vec![row("hfgcn", compute_metrics(&pred, &g.labels, &g.masks.test))];
    info!(
        "{} patient {patient} repeat {}: test f1 {:.3}",
        job.variant.label, job.repeat, rows[0].metrics.f1
    );

    let keep = match cfg.checkpoints {
        CheckpointPolicy::All => true,
        CheckpointPolicy::FirstRepeat => job.repeat == 0,
        CheckpointPolicy::None => false,
    };
    if let (true, Some(dir)) = (keep, checkpoints) {
        let dir = dir.join(&job.variant.label);
        io::create_dir(&dir)?;
        let stem = format!("patient_{patient:03}_r{}", job.repeat);
        hfgcn::save_model(&model, &dir.join(format!("{stem}.ckpt")))?;
        io::write_text(&dir.join(format!("{stem}.history.csv")), &history.to_csv())?;
    }

    if cfg.logistic_baseline {
        let train = Masks::indices(&g.masks.train);
        let lr = LogisticModel::fit(&g.x, &g.labels, &train, &cfg.logistic)?;
        rows.push(row("logistic", compute_metrics(&lr.predict(&g.x), &g.labels, &g.masks.test)));
    }
    Ok(rows)
}

/// Per-patient means over repeats, then mean and std (n−1) across patients.
pub(crate) fn aggregate(
    per_patient: &[PatientRow],
    variants: &[Variant],
    widths: &[usize],
    repeats: usize,
    fingerprint: &str,
) -> Vec<AggregateRow> {
    let mut models: Vec<&str> = Vec::new();
    for r in per_patient {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    let mut out = Vec::new();
    for (v, &width) in variants.iter().zip(widths) {
        for &model in &models {
            let rows: Vec<&PatientRow> =
                per_patient.iter().filter(|r| r.variant == v.label && r.model == model).collect();
            let mut patients: Vec<usize> = rows.iter().map(|r| r.patient).collect();
            patients.sort_unstable();
            patients.dedup();
            let per_patient_means: Vec<[f64; 4]> = patients
                .iter()
                .map(|&p| {
                    let mine: Vec<[f64; 4]> =
                        rows.iter().filter(|r| r.patient == p).map(|r| r.metrics.as_array()).collect();
                    std::array::from_fn(|k| mine.iter().map(|m| m[k]).sum::<f64>() / mine.len() as f64)
                })
                .collect();
            let mut mean = [0.0; 4];
            let mut std = [0.0; 4];
            for k in 0..4 {
                let col: Vec<f64> = per_patient_means.iter().map(|m| m[k]).collect();
                (mean[k], std[k]) = mean_std(&col);
            }
            out.push(AggregateRow {
                variant: v.label.clone(),
                model: model.into(),
                features: width,
                patients: patients.len(),
                repeats,
                mean,
                std,
                fingerprint: fingerprint.into(),
            });
        }
    }
    out
}

fn per_patient_csv(rows: &[PatientRow]) -> String {
    let mut out = format!("{PER_PATIENT_HEADER}\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.variant, r.model, r.patient, r.repeat, m.acc, m.recall, m.precision, m.f1, m.zero_denominator
        );
    }
    out
}

pub(crate) fn metrics_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Runs every (variant, repeat, patient) job and writes the run directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let cohort = CohortReader::open(&cfg.cohort)?;
    if cohort.patients.is_empty() {
        return Err(Error::config(format!("cohort {} has no patients", cfg.cohort.display())));
    }
    let pool = worker_pool(cfg.workers)?;
    let fp = fingerprint(cfg);
    let dir = new_run_dir(&cfg.runs_dir, &fp)?;
    info!("run directory {}", dir.display());
    io::write_json(&dir.join("config.json"), cfg)?;
    let checkpoints = (cfg.checkpoints != CheckpointPolicy::None).then(|| dir.join("checkpoints"));
    if let Some(c) = &checkpoints {
        io::create_dir(c)?;
    }

    let inputs = prepare_inputs(cfg, &cohort, &pool, checkpoints.as_deref())?;
    let variants = cfg.variants();
    let patients = cohort.patients.len();
    let mut jobs = Vec::with_capacity(variants.len() * cfg.repeats * patients);
    for v in &variants {
        for repeat in 0..cfg.repeats {
            for slot in 0..patients {
                jobs.push(Job { variant: v, repeat, slot });
            }
        }
    }
    info!("{} jobs on {} workers", jobs.len(), cfg.workers);
    let results: Vec<Vec<PatientRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_job(cfg, &inputs, job, checkpoints.as_deref()))
            .collect::<Result<_>>()
    })?;
    let per_patient: Vec<PatientRow> = results.into_iter().flatten().collect();

    let latent_dim = cfg.satae.latent_dim;
    let widths: Vec<usize> = variants
        .iter()
        .map(|v| super::feature_width(v.bands.len(), v.states.len(), latent_dim))
        .collect();
    let rows = aggregate(&per_patient, &variants, &widths, cfg.repeats, &fp);
    io::write_text(&dir.join("metrics.csv"), &metrics_csv(&rows))?;
    io::write_text(&dir.join("per_patient.csv"), &per_patient_csv(&per_patient))?;
    let wall_clock_s = started.elapsed().as_secs_f64();
    io::write_json(
        &dir.join("report.json"),
        &json!({
            "note": SPLIT_NOTE,
            "fingerprint": fp,
            "wall_clock_s": wall_clock_s,
            "rows": rows,
            "per_patient": per_patient,
        }),
    )?;
    Ok(RunOutcome {
        dir,
        fingerprint: fp,
        rows,
        per_patient,
        wall_clock_s,
    })
}
