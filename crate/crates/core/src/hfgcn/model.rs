use ndarray::Array2;
use rand::Rng;

use super::cheb::{chebyshev_basis, ChebCache, ChebLayer};
use super::edge::{EdgeCache, EdgeConv};
use super::laplacian::{scaled_laplacian, ScaledLaplacian};
use super::{FusionMode, HfgcnConfig, PatientGraph, Weighting};
use crate::error::{Error, Result};
use crate::nn::{row_norms, row_norms_backward, scale_rows, Dense, Param};

/// Node weights: the L2 norm of each node's feature row.
pub fn node_weights(s: &Array2<f64>) -> Vec<f64> {
    row_norms(s)
}

/// The per-graph quantities that stay fixed during training.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub lap: ScaledLaplacian,
    /// Chebyshev expansion of the input features for the first layer.
    pub basis: Vec<Array2<f64>>,
}

impl GraphInput {
    pub fn new(g: &PatientGraph, cfg: &HfgcnConfig) -> Result<Self> {
        g.validate()?;
        let lap = scaled_laplacian(&g.adjacency.a, cfg.clamp_negative_edges)?;
        let basis = chebyshev_basis(&lap.l_tilde, &g.x, cfg.cheb_order);
        Ok(GraphInput { lap, basis })
    }

    pub fn nodes(&self) -> usize {
        self.lap.size()
    }
}

/// Which per-layer signal the fusion step reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stream {
    Static,
    Summed,
    Dynamic,
}

#[derive(Clone, Debug)]
enum Fusion {
    /// `z_0 = t_1`, `z_l = diag(‖z_{l−1}‖)·t_{l+1}`; output is the last `z`.
    Cascade { z: Vec<Array2<f64>>, w: Vec<Vec<f64>> },
    /// Output is `diag(Π_{l∈layers} ‖t_l‖)·t_last`.
    Product { layers: Vec<usize>, w: Vec<Vec<f64>>, prod: Vec<f64> },
    Last,
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub statics: Vec<ChebCache>,
    pub dynamics: Vec<Option<(Array2<f64>, EdgeCache)>>,
    streams: Vec<Option<Array2<f64>>>,
    stream: Stream,
    fusion: Fusion,
    pub fused: Array2<f64>,
    pub logits: Array2<f64>,
}

impl ForwardPass {
    /// The node weights computed by the fusion step, first weighting first.
    pub fn weights(&self) -> &[Vec<f64>] {
        match &self.fusion {
            Fusion::Cascade { w, .. } | Fusion::Product { w, .. } => w,
            Fusion::Last => &[],
        }
    }

    /// k-NN neighbourhoods used by each dynamic layer that ran.
    pub fn neighbourhoods(&self) -> Vec<Option<&Vec<Vec<usize>>>> {
        self.dynamics.iter().map(|d| d.as_ref().map(|(_, c)| &c.neighbours)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HfgcnModel {
    pub cfg: HfgcnConfig,
    pub input_dim: usize,
    pub statics: Vec<ChebLayer>,
    pub dynamics: Vec<EdgeConv>,
    pub classifier: Dense,
}

impl HfgcnModel {
    pub fn new<R: Rng>(cfg: &HfgcnConfig, input_dim: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(Error::config("node feature width must be positive"));
        }
        let d = cfg.hidden;
        let mut statics = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let in_dim = if l == 0 { input_dim } else { d };
            statics.push(ChebLayer::new(&format!("cheb{l}"), cfg.cheb_order, in_dim, d, rng)?);
        }
        let dynamics = (0..cfg.layers)
            .map(|l| EdgeConv::new(&format!("edge{l}"), cfg.knn, d, d, d, rng))
            .collect();
        let classifier = Dense::glorot("cls", d, 2, rng);
        Ok(HfgcnModel {
            cfg: cfg.clone(),
            input_dim,
            statics,
            dynamics,
            classifier,
        })
    }

    fn stream(&self) -> Stream {
        match self.cfg.fusion_mode {
            FusionMode::Full | FusionMode::FusionS2 => Stream::Summed,
            FusionMode::FusionS1 | FusionMode::StaticOnly => Stream::Static,
            FusionMode::DynamicOnly => Stream::Dynamic,
        }
    }

    fn runs_dynamic(&self, l: usize) -> bool {
        match self.stream() {
            Stream::Summed => true,
            Stream::Static => false,
            Stream::Dynamic => l + 1 == self.cfg.layers,
        }
    }

    pub fn forward(&self, input: &GraphInput) -> Result<ForwardPass> {
        let n = self.cfg.layers;
        if input.basis.len() != self.cfg.cheb_order || input.basis[0].ncols() != self.input_dim {
            return Err(Error::domain(format!(
                "graph input has {} basis terms of width {}, model expects {} of width {}",
                input.basis.len(),
                input.basis.first().map_or(0, |b| b.ncols()),
                self.cfg.cheb_order,
                self.input_dim
            )));
        }
        if self.cfg.fusion_mode.uses_dynamic_branch() {
            self.cfg.validate_for(input.nodes())?;
        }

        let mut statics: Vec<ChebCache> = Vec::with_capacity(n);
        statics.push(self.statics[0].forward_basis(input.basis.clone()));
        for l in 1..n {
            let next = self.statics[l].forward(&input.lap, &statics[l - 1].out)?;
            statics.push(next);
        }
        let mut dynamics = Vec::with_capacity(n);
        for l in 0..n {
            dynamics.push(if self.runs_dynamic(l) {
                Some(self.dynamics[l].forward(&statics[l].out)?)
            } else {
                None
            });
        }
        let stream = self.stream();
        let streams: Vec<Option<Array2<f64>>> = (0..n)
            .map(|l| match (stream, &dynamics[l]) {
                (Stream::Static, _) => Some(statics[l].out.clone()),
                (Stream::Summed, Some((dynamic, _))) => Some(&statics[l].out + dynamic),
                (Stream::Dynamic, Some((dynamic, _))) => Some(dynamic.clone()),
                _ => None,
            })
            .collect();

        let (fusion, fused) = self.fuse(&streams);
        let logits = self.classifier.forward(fused.view())?;
        Ok(ForwardPass {
            statics,
            dynamics,
            streams,
            stream,
            fusion,
            fused,
            logits,
        })
    }

    fn fuse(&self, streams: &[Option<Array2<f64>>]) -> (Fusion, Array2<f64>) {
        let n = streams.len();
        let t = |l: usize| streams[l].as_ref().expect("stream computed for fused layer");
        let product = |layers: Vec<usize>| {
            let w: Vec<Vec<f64>> = layers.iter().map(|&l| node_weights(t(l))).collect();
            let prod: Vec<f64> = (0..t(n - 1).nrows()).map(|i| w.iter().map(|wl| wl[i]).product()).collect();
            let fused = scale_rows(t(n - 1), &prod);
            (Fusion::Product { layers, w, prod }, fused)
        };
        match (self.cfg.fusion_mode, self.cfg.weighting) {
            (FusionMode::Full, Weighting::Cascade) => {
                let mut z = vec![t(0).clone()];
                let mut w = Vec::with_capacity(n - 1);
                for l in 1..n {
                    let wl = node_weights(&z[l - 1]);
                    z.push(scale_rows(t(l), &wl));
                    w.push(wl);
                }
                let fused = z[n - 1].clone();
                (Fusion::Cascade { z, w }, fused)
            }
            (FusionMode::Full, Weighting::RawLayer) => product(vec![n - 2]),
            (FusionMode::FusionS1 | FusionMode::FusionS2, _) => product((0..n - 1).collect()),
            (FusionMode::StaticOnly | FusionMode::DynamicOnly, _) => (Fusion::Last, t(n - 1).clone()),
        }
    }

    /// Accumulates all parameter gradients for `dlogits`.
    pub fn backward(&mut self, input: &GraphInput, pass: &ForwardPass, dlogits: &Array2<f64>) {
        let n = self.cfg.layers;
        let dfused = self.classifier.backward(pass.fused.view(), dlogits.view());
        let t = |l: usize| pass.streams[l].as_ref().expect("stream computed for fused layer");
        let mut dstream: Vec<Option<Array2<f64>>> = vec![None; n];
        let add = |slot: &mut Option<Array2<f64>>, g: Array2<f64>| match slot {
            Some(acc) => *acc += &g,
            None => *slot = Some(g),
        };

        match &pass.fusion {
            Fusion::Cascade { z, w } => {
                let mut dz = dfused;
                for l in (1..n).rev() {
                    add(&mut dstream[l], scale_rows(&dz, &w[l - 1]));
                    let dw: Vec<f64> = dz.rows().into_iter().zip(t(l).rows()).map(|(g, s)| g.dot(&s)).collect();
                    dz = row_norms_backward(&z[l - 1], &w[l - 1], &dw);
                }
                add(&mut dstream[0], dz);
            }
            Fusion::Product { layers, w, prod } => {
                add(&mut dstream[n - 1], scale_rows(&dfused, prod));
                let dprod: Vec<f64> =
                    dfused.rows().into_iter().zip(t(n - 1).rows()).map(|(g, s)| g.dot(&s)).collect();
                for (p, &l) in layers.iter().enumerate() {
                    let dw: Vec<f64> = (0..dprod.len())
                        .map(|i| {
                            let others: f64 = w.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, wq)| wq[i]).product();
                            dprod[i] * others
                        })
                        .collect();
                    add(&mut dstream[l], row_norms_backward(t(l), &w[p], &dw));
                }
            }
            Fusion::Last => add(&mut dstream[n - 1], dfused),
        }

        let mut dstatic: Option<Array2<f64>> = None;
        for l in (0..n).rev() {
            let ds = dstream[l].take();
            let mut dh = dstatic.take();
            if let Some(ds) = &ds {
                if pass.stream != Stream::Dynamic {
                    add(&mut dh, ds.clone());
                }
            }
            if let (Some(ds), Some((_, cache))) = (&ds, &pass.dynamics[l]) {
                if pass.stream != Stream::Static {
                    add(&mut dh, self.dynamics[l].backward(cache, ds));
                }
            }
            if let Some(dh) = dh {
                let lap = (l > 0).then_some(&input.lap);
                dstatic = self.statics[l].backward(lap, &pass.statics[l], &dh);
            }
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = Vec::new();
        for layer in &self.statics {
            out.extend(layer.params());
        }
        for layer in &self.dynamics {
            out.extend(layer.params());
        }
        out.extend(self.classifier.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = Vec::new();
        for layer in &mut self.statics {
            out.extend(layer.params_mut());
        }
        for layer in &mut self.dynamics {
            out.extend(layer.params_mut());
        }
        out.extend(self.classifier.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
