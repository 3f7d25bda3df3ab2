//! Experiment orchestration: node splits, feature assembly, cohort-wide
//! training runs with repeats and sweeps, run directories and reports.
//!
//! A run goes cohort → band-power features → shared autoencoder → latents,
//! and in parallel cohort → CCEP graphs. Each (variant, repeat, patient) job
//! then assembles node features, splits the nodes, trains a graph network and
//! scores it on the test nodes. Jobs are independent and seeded by
//! (seed + repeat, patient), so the worker count never changes the numbers.

mod assemble;
mod logistic;
mod pipeline;
mod report;
mod run;
mod split;

#[cfg(test)]
mod tests;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::connstats::GraphConfig;
use crate::dsp::{Band, PreprocessConfig, State};
use crate::error::{Error, Result};
use crate::hfgcn::{FusionMode, HfgcnConfig};
use crate::satae::{AttentionPlacement, SataeConfig};

pub use crate::metrics::{compute_metrics, mean_std, Confusion, Metrics};
pub use assemble::{assemble_node_features, feature_width};
pub use logistic::{LogisticConfig, LogisticModel};
pub use pipeline::{
    build_graph, build_graphs, encode_latents, feature_settings, fingerprint_json, graph_settings, load_features,
    load_graphs, load_tensors, preprocess_cohort, preprocess_patient, round_to_f32, save_store, stored_settings,
    worker_pool, write_settings, Inputs,
};
pub use report::{report, report_csv, ReportRow};
pub use run::{fingerprint, job_seeds, run_experiment, AggregateRow, PatientRow, RunOutcome, METRICS_HEADER};
pub use split::split_nodes;

/// A one-parameter sweep. Every value becomes one variant of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "values")]
pub enum Sweep {
    /// Chebyshev order.
    F(Vec<usize>),
    /// Neighbours in the dynamic branch.
    K(Vec<usize>),
    #[serde(rename = "fusion")]
    Fusion(Vec<FusionMode>),
    #[serde(rename = "bands")]
    Bands(Vec<Vec<Band>>),
    #[serde(rename = "states")]
    States(Vec<Vec<State>>),
    /// Attention placement; retrains the autoencoder per value.
    #[serde(rename = "placement")]
    Placement(Vec<AttentionPlacement>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::F(v) | Sweep::K(v) => v.len(),
            Sweep::Fusion(v) => v.len(),
            Sweep::Bands(v) => v.len(),
            Sweep::States(v) => v.len(),
            Sweep::Placement(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    All,
    /// Graph-network checkpoints of repeat 0 only, plus the autoencoders.
    #[default]
    FirstRepeat,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Cohort directory written by `synth`.
    pub cohort: PathBuf,
    /// Cache for features, graphs and latents; recomputed when the stored
    /// settings differ. Without it everything stays in memory.
    pub artifacts: Option<PathBuf>,
    pub runs_dir: PathBuf,
    pub seed: u64,
    pub repeats: usize,
    pub workers: usize,
    /// Train, validation and test fractions.
    pub split_fractions: [f64; 3],
    pub bands: Vec<Band>,
    pub states: Vec<State>,
    /// CCEP segment indices forming each patient's graph; all when absent.
    pub ccep_subset: Option<Vec<usize>>,
    pub preprocess: PreprocessConfig,
    pub satae: SataeConfig,
    pub graph: GraphConfig,
    pub hfgcn: HfgcnConfig,
    pub sweep: Option<Sweep>,
    /// Also score a logistic classifier on the same latents and splits.
    pub logistic_baseline: bool,
    pub logistic: LogisticConfig,
    pub checkpoints: CheckpointPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cohort: PathBuf::from("cohort"),
            artifacts: None,
            runs_dir: PathBuf::from("runs"),
            seed: 0,
            repeats: 5,
            workers: 1,
            split_fractions: [0.1, 0.2, 0.7],
            bands: Band::ALL.to_vec(),
            states: State::BEHAVIORAL.to_vec(),
            ccep_subset: None,
            preprocess: PreprocessConfig::default(),
            satae: SataeConfig::default(),
            graph: GraphConfig::default(),
            hfgcn: HfgcnConfig::default(),
            sweep: None,
            logistic_baseline: true,
            logistic: LogisticConfig::default(),
            checkpoints: CheckpointPolicy::default(),
        }
    }
}

/// One row of the experiment grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub label: String,
    pub hfgcn: HfgcnConfig,
    pub bands: Vec<Band>,
    pub states: Vec<State>,
    pub placement: AttentionPlacement,
}

fn join_names<T: Copy>(items: &[T], name: impl Fn(T) -> &'static str) -> String {
    items.iter().map(|&i| name(i)).collect::<Vec<_>>().join("+")
}

pub fn placement_name(p: AttentionPlacement) -> &'static str {
    match p {
        AttentionPlacement::Encoder => "E",
        AttentionPlacement::Decoder => "D",
        AttentionPlacement::Both => "ED",
        AttentionPlacement::None => "none",
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.split_fractions;
        if [a, b, c].iter().any(|&f| !(0.0..=1.0).contains(&f)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "split fractions {:?} must lie in [0, 1] and sum to 1",
                self.split_fractions
            )));
        }
        if self.bands.is_empty() || self.states.is_empty() {
            return Err(Error::config("band and state subsets must be non-empty"));
        }
        if let Some(s) = self.states.iter().find(|s| !State::BEHAVIORAL.contains(s)) {
            return Err(Error::config(format!("state {} is not a behavioural state", s.name())));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        if self.satae.input_dim != self.preprocess.feat_len {
            return Err(Error::config(format!(
                "satae.input_dim {} must equal preprocess.feat_len {}",
                self.satae.input_dim, self.preprocess.feat_len
            )));
        }
        if matches!(&self.ccep_subset, Some(s) if s.is_empty()) {
            return Err(Error::config("ccep_subset must name at least one segment"));
        }
        self.satae.validate()?;
        self.logistic.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(Error::config("sweep has no values"));
            }
        }
        for v in self.variants() {
            v.hfgcn.validate()?;
            if v.bands.is_empty() || v.states.is_empty() {
                return Err(Error::config(format!("variant {} has an empty band or state subset", v.label)));
            }
            if v.states.iter().any(|s| !State::BEHAVIORAL.contains(s)) {
                return Err(Error::config(format!("variant {} uses a non-behavioural state", v.label)));
            }
        }
        Ok(())
    }

    pub fn variants(&self) -> Vec<Variant> {
        let base = Variant {
            label: self.hfgcn.fusion_mode.name().to_string(),
            hfgcn: self.hfgcn.clone(),
            bands: self.bands.clone(),
            states: self.states.clone(),
            placement: self.satae.attention_placement,
        };
        let Some(sweep) = &self.sweep else {
            return vec![base];
        };
        match sweep {
            Sweep::F(values) => values
                .iter()
                .map(|&f| Variant {
                    label: format!("F={f}"),
                    hfgcn: HfgcnConfig { cheb_order: f, ..base.hfgcn.clone() },
                    ..base.clone()
                })
                .collect(),
            Sweep::K(values) => values
                .iter()
                .map(|&k| Variant {
                    label: format!("K={k}"),
                    hfgcn: HfgcnConfig { knn: k, ..base.hfgcn.clone() },
                    ..base.clone()
                })
                .collect(),
            Sweep::Fusion(values) => values
                .iter()
                .map(|&m| Variant {
                    label: m.name().to_string(),
                    hfgcn: HfgcnConfig { fusion_mode: m, ..base.hfgcn.clone() },
                    ..base.clone()
                })
                .collect(),
            Sweep::Bands(values) => values
                .iter()
                .map(|b| Variant {
                    label: join_names(b, Band::name),
                    bands: b.clone(),
                    ..base.clone()
                })
                .collect(),
            Sweep::States(values) => values
                .iter()
                .map(|s| Variant {
                    label: join_names(s, State::name),
                    states: s.clone(),
                    ..base.clone()
                })
                .collect(),
            Sweep::Placement(values) => values
                .iter()
                .map(|&p| Variant {
                    label: placement_name(p).to_string(),
                    placement: p,
                    ..base.clone()
                })
                .collect(),
        }
    }

    /// Placements whose latents the variants need, in first-use order.
    pub fn placements(&self) -> Vec<AttentionPlacement> {
        let mut out = Vec::new();
        for v in self.variants() {
            if !out.contains(&v.placement) {
                out.push(v.placement);
            }
        }
        out
    }
}
