//! Connectivity graphs from CCEP segments.
//!
//! Each segment is compared site by site against the interictal baseline with
//! a paired t-test; Benjamini–Hochberg adjusted p-values select the responsive
//! sites, non-responsive rows are zeroed, and thresholded Pearson correlation
//! between the remaining rows gives one adjacency per segment. The patient
//! graph is the element-wise mean over segments.

use std::path::{Path, PathBuf};

use log::debug;
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dsp::Recording;
use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
}

/// Two-sided paired t-test on `x − y`. Inputs of different lengths are
/// truncated to the shorter one.
pub fn paired_t_test(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<TTest> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(Error::domain(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let nf = n as f64;
    let mean = (0..n).map(|i| x[i] - y[i]).sum::<f64>() / nf;
    let ss = (0..n).map(|i| (x[i] - y[i] - mean).powi(2)).sum::<f64>();
    let sd = (ss / (nf - 1.0)).sqrt();
    if sd == 0.0 {
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        debug!("paired t-test with zero-variance differences (mean {mean}); p = {p}");
        let t = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        return Ok(TTest { t, p });
    }
    let t = mean / (sd / nf.sqrt());
    Ok(TTest { t, p: t_two_sided_p(t, nf - 1.0) })
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Benjamini–Hochberg step-up adjustment. Returns the adjusted p-values in the
/// original order and the mask `adjusted < alpha`.
pub fn fdr_bh(p: &[f64], alpha: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    let mask = adjusted.iter().map(|&a| a < alpha).collect();
    Ok((adjusted, mask))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceMask {
    pub p_raw: Vec<f64>,
    pub p_adjusted: Vec<f64>,
    pub mask: Vec<bool>,
    pub alpha: f64,
}

/// Zeroes the rows of non-significant sites.
pub fn mask_ccep(s_ccep: &Recording, mask: &[bool]) -> Result<Recording> {
    if mask.len() != s_ccep.channels() {
        return Err(Error::domain(format!(
            "mask has {} entries for {} channels",
            mask.len(),
            s_ccep.channels()
        )));
    }
    let mut out = s_ccep.clone();
    for (mut row, &keep) in out.samples.rows_mut().into_iter().zip(mask) {
        if !keep {
            row.fill(0.0);
        }
    }
    Ok(out)
}

/// Pearson correlation; 0 when either vector has zero variance.
pub fn pearson(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::domain(format!(
            "pearson needs equal lengths ≥ 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Correlation threshold ρ_τ.
    pub rho_tau: f64,
    pub alpha: f64,
    /// Keep entries with ρ < ρ_τ instead of |ρ| ≥ ρ_τ.
    pub eq8_literal: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            rho_tau: 0.3,
            alpha: 0.05,
            eq8_literal: false,
        }
    }
}

impl GraphConfig {
    pub fn keeps(&self, rho: f64) -> bool {
        if self.eq8_literal {
            rho < self.rho_tau
        } else {
            rho.abs() >= self.rho_tau
        }
    }
}

/// Symmetric, zero-diagonal weighted adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    pub a: Array2<f64>,
    pub threshold: f64,
}

impl AdjacencyMatrix {
    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    /// Fraction of off-diagonal entries that are nonzero.
    pub fn density(&self) -> f64 {
        let c = self.size();
        if c < 2 {
            return 0.0;
        }
        let nz = self.a.iter().filter(|&&v| v != 0.0).count();
        nz as f64 / (c * (c - 1)) as f64
    }
}

/// Per-site paired t-test against the baseline followed by FDR masking.
pub fn significance(s_ccep: &Recording, baseline: &Recording, alpha: f64) -> Result<SignificanceMask> {
    if s_ccep.channels() != baseline.channels() {
        return Err(Error::domain(format!(
            "CCEP has {} channels, baseline {}",
            s_ccep.channels(),
            baseline.channels()
        )));
    }
    let p_raw = s_ccep
        .samples
        .rows()
        .into_iter()
        .zip(baseline.samples.rows())
        .map(|(x, y)| paired_t_test(x, y).map(|t| t.p))
        .collect::<Result<Vec<f64>>>()?;
    let (p_adjusted, mask) = fdr_bh(&p_raw, alpha)?;
    Ok(SignificanceMask {
        p_raw,
        p_adjusted,
        mask,
        alpha,
    })
}

/// Adjacency for one CCEP segment. The segment and baseline may differ in
/// length; the t-test uses the common prefix.
pub fn adjacency_from_ccep(
    s_ccep: &Recording,
    baseline: &Recording,
    cfg: &GraphConfig,
) -> Result<(AdjacencyMatrix, SignificanceMask)> {
    let sig = significance(s_ccep, baseline, cfg.alpha)?;
    let masked = mask_ccep(s_ccep, &sig.mask)?;
    let c = masked.channels();
    let mut a = Array2::zeros((c, c));
    for i in 0..c {
        for j in (i + 1)..c {
            let rho = pearson(masked.samples.row(i), masked.samples.row(j))?;
            if rho != 0.0 && cfg.keeps(rho) {
                a[[i, j]] = rho;
                a[[j, i]] = rho;
            }
        }
    }
    Ok((
        AdjacencyMatrix {
            a,
            threshold: cfg.rho_tau,
        },
        sig,
    ))
}

/// Element-wise mean of per-segment adjacencies (no re-thresholding).
pub fn average_adjacency(mats: &[AdjacencyMatrix]) -> Result<AdjacencyMatrix> {
    let first = mats.first().ok_or_else(|| Error::domain("no adjacency matrices to average"))?;
    let mut acc = Array2::<f64>::zeros(first.a.raw_dim());
    for m in mats {
        if m.a.dim() != first.a.dim() {
            return Err(Error::domain("adjacency matrices differ in size"));
        }
        acc += &m.a;
    }
    acc /= mats.len() as f64;
    Ok(AdjacencyMatrix {
        a: acc,
        threshold: first.threshold,
    })
}

/// Builds the patient graph from all (or a subset of) CCEP segments.
pub fn patient_adjacency(
    segments: &[Recording],
    baseline: &Recording,
    cfg: &GraphConfig,
) -> Result<AdjacencyMatrix> {
    let mats = segments
        .iter()
        .map(|s| adjacency_from_ccep(s, baseline, cfg).map(|(a, _)| a))
        .collect::<Result<Vec<_>>>()?;
    average_adjacency(&mats)
}

pub const GRAPH_MAGIC: &str = "SOZGRAPH-ADJ";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub magic: String,
    pub version: u32,
    pub patient: usize,
    pub c: usize,
    pub rho_tau: f64,
    pub alpha: f64,
    pub q: usize,
    pub eq8_literal: bool,
    pub ccep_subset: Option<Vec<usize>>,
    pub dtype: String,
}

/// Adjacency of one patient as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredGraph {
    pub adjacency: AdjacencyMatrix,
    pub sidecar: GraphSidecar,
}

fn graph_paths(dir: &Path, patient: usize) -> (PathBuf, PathBuf) {
    let stem = format!("patient_{patient:03}");
    (dir.join(format!("{stem}.adj.f64")), dir.join(format!("{stem}.adj.json")))
}

impl StoredGraph {
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        let (bin, side) = graph_paths(dir, self.sidecar.patient);
        io::write_f64(&bin, self.adjacency.a.iter().copied())?;
        io::write_json(&side, &self.sidecar)
    }

    pub fn load(dir: &Path, patient: usize) -> Result<Self> {
        let (bin, side_path) = graph_paths(dir, patient);
        if !side_path.exists() {
            return Err(Error::Dependency {
                stage: "build-graph",
                path: side_path,
            });
        }
        let sidecar: GraphSidecar = io::read_json(&side_path)?;
        if sidecar.magic != GRAPH_MAGIC {
            return Err(Error::Parse {
                path: side_path,
                offset: 0,
                msg: format!("bad magic {:?}", sidecar.magic),
            });
        }
        if sidecar.version != GRAPH_VERSION {
            return Err(Error::Version {
                path: side_path,
                found: sidecar.version,
                expected: GRAPH_VERSION,
            });
        }
        let c = sidecar.c;
        let a = Array2::from_shape_vec((c, c), io::read_f64(&bin, c * c)?).expect("length checked");
        Ok(StoredGraph {
            adjacency: AdjacencyMatrix {
                a,
                threshold: sidecar.rho_tau,
            },
            sidecar,
        })
    }
}
