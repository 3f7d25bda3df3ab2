//! Hierarchical fusion graph network for per-node SOZ classification.
//!
//! A static branch chains Chebyshev graph convolutions over the connectivity
//! graph. A dynamic branch applies EdgeConv on a k-NN graph rebuilt from each
//! static layer's output. The two branches are summed per layer and fused by
//! node-wise L2 weighting before a linear classifier.

mod cheb;
mod edge;
mod laplacian;
mod model;
mod train;


use serde::{Deserialize, Serialize};

use crate::connstats::AdjacencyMatrix;
use crate::error::{Error, Result};

pub use cheb::{chebyshev_basis, chebyshev_basis_backward, ChebCache, ChebLayer};
pub use edge::{knn_pairs, EdgeCache, EdgeConv};
pub use laplacian::{scaled_laplacian, ScaledLaplacian};
pub use model::{node_weights, ForwardPass, GraphInput, HfgcnModel};
pub use train::{load_model, predict, save_model, train_hfgcn, EpochRecord, HfgcnHistory};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Full,
    FusionS1,
    FusionS2,
    StaticOnly,
    DynamicOnly,
}

impl FusionMode {
    pub const ALL: [FusionMode; 5] = [
        FusionMode::Full,
        FusionMode::FusionS1,
        FusionMode::FusionS2,
        FusionMode::StaticOnly,
        FusionMode::DynamicOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionMode::Full => "full",
            FusionMode::FusionS1 => "fusion_s1",
            FusionMode::FusionS2 => "fusion_s2",
            FusionMode::StaticOnly => "static_only",
            FusionMode::DynamicOnly => "dynamic_only",
        }
    }

    pub fn uses_weighting(self) -> bool {
        matches!(self, FusionMode::Full | FusionMode::FusionS1 | FusionMode::FusionS2)
    }

    pub fn uses_dynamic_branch(self) -> bool {
        !matches!(self, FusionMode::FusionS1 | FusionMode::StaticOnly)
    }
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown fusion mode {s:?}")))
    }
}

/// How the second and later node weights are formed in `full` mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Each weight is the norm of the already weighted stream.
    #[default]
    Cascade,
    /// The last weight is the norm of the raw summed layer output.
    RawLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeights {
    /// Inverse class frequency over the training nodes.
    Auto,
    Fixed([f64; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HfgcnConfig {
    pub layers: usize,
    pub cheb_order: usize,
    pub knn: usize,
    pub hidden: usize,
    pub fusion_mode: FusionMode,
    pub weighting: Weighting,
    pub lr: f64,
    pub epochs: usize,
    pub class_weights: Option<ClassWeights>,
    /// Zero negative edges before building the Laplacian instead of using |a|.
    pub clamp_negative_edges: bool,
}

impl Default for HfgcnConfig {
    fn default() -> Self {
        HfgcnConfig {
            layers: 3,
            cheb_order: 3,
            knn: 10,
            hidden: 64,
            fusion_mode: FusionMode::Full,
            weighting: Weighting::Cascade,
            lr: 0.005,
            epochs: 150,
            class_weights: None,
            clamp_negative_edges: false,
        }
    }
}

impl HfgcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::config("layers must be at least 1"));
        }
        if self.fusion_mode.uses_weighting() && self.layers < 2 {
            return Err(Error::config(format!(
                "fusion mode {} weights consecutive layers and needs layers ≥ 2",
                self.fusion_mode.name()
            )));
        }
        if self.cheb_order == 0 {
            return Err(Error::config("cheb_order must be at least 1"));
        }
        if self.knn == 0 {
            return Err(Error::config("knn must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if let Some(ClassWeights::Fixed(w)) = self.class_weights {
            if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || w.iter().sum::<f64>() == 0.0 {
                return Err(Error::config(format!("class weights {w:?} must be non-negative and not both zero")));
            }
        }
        Ok(())
    }

    /// Checks that depend on the graph size.
    pub fn validate_for(&self, nodes: usize) -> Result<()> {
        self.validate()?;
        if self.knn >= nodes {
            return Err(Error::config(format!("knn {} must be smaller than the node count {nodes}", self.knn)));
        }
        Ok(())
    }
}

/// Disjoint train/validation/test node selections.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.train.len() != nodes || self.val.len() != nodes || self.test.len() != nodes {
            return Err(Error::domain(format!("masks must each have {nodes} entries")));
        }
        for i in 0..nodes {
            let n = self.train[i] as u8 + self.val[i] as u8 + self.test[i] as u8;
            if n != 1 {
                return Err(Error::domain(format!("node {i} belongs to {n} masks; expected exactly one")));
            }
        }
        Ok(())
    }

    pub fn indices(mask: &[bool]) -> Vec<usize> {
        mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }
}

/// One patient's node features, connectivity and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientGraph {
    pub patient: usize,
    pub x: ndarray::Array2<f64>,
    pub adjacency: AdjacencyMatrix,
    pub labels: Vec<u8>,
    pub masks: Masks,
}

impl PatientGraph {
    pub fn nodes(&self) -> usize {
        self.x.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.nodes();
        if self.adjacency.size() != c || self.labels.len() != c {
            return Err(Error::domain(format!(
                "patient {}: {c} feature rows, {} adjacency rows, {} labels",
                self.patient,
                self.adjacency.size(),
                self.labels.len()
            )));
        }
        self.masks.validate(c)
    }
}
