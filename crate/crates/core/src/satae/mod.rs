//! Shared attention-gated autoencoder.
//!
//! ```text
//! encoder  x ─ fc ─ fc ─⊙─ fc ─ fc ─⊙─ fc ─ l
//!          └ avgpool ─ gate ┘ └ avgpool ─ gate ┘
//! decoder  l ─ fc ─ fc ─⊙─ fc ─ fc ─⊙─ fc ─ x̂      (gates read unpool(block input))
//! ```
//!
//! Every layer, gates included, is `tanh(x·W + b)`. Without attention a block
//! is just its two dense layers.

mod train;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    avgpool1d, avgpool1d_backward, tanh_backward, tanh_forward, unpool1d, unpool1d_backward, Dense, Param,
};

pub use train::{encode_cohort, load_model, save_model, train_shared, training_matrix, TrainHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttentionPlacement {
    #[serde(rename = "E")]
    Encoder,
    #[serde(rename = "D")]
    Decoder,
    #[serde(rename = "ED")]
    Both,
    #[serde(rename = "none")]
    None,
}

impl AttentionPlacement {
    fn encoder(self) -> bool {
        matches!(self, AttentionPlacement::Encoder | AttentionPlacement::Both)
    }

    fn decoder(self) -> bool {
        matches!(self, AttentionPlacement::Decoder | AttentionPlacement::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SataeConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    /// Input width of each of the five encoder layers; the first equals `input_dim`.
    pub encoder_dims: [usize; 5],
    /// Input width of each of the five decoder layers; the first equals `latent_dim`.
    pub decoder_dims: [usize; 5],
    pub attention_placement: AttentionPlacement,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SataeConfig {
    fn default() -> Self {
        SataeConfig {
            input_dim: 128,
            latent_dim: 32,
            encoder_dims: [128, 96, 64, 48, 32],
            decoder_dims: [32, 32, 48, 64, 96],
            attention_placement: AttentionPlacement::Encoder,
            batch_size: 16,
            epochs: 30,
            lr: 0.002,
        }
    }
}

impl SataeConfig {
    /// Encoder widths `[I, …, N]` with the default hidden widths scaled to a
    /// different input and latent size; handy for small test models.
    pub fn scaled(input_dim: usize, latent_dim: usize) -> Self {
        let e = [input_dim, input_dim * 3 / 4, input_dim / 2, input_dim * 3 / 8, input_dim / 4];
        SataeConfig {
            input_dim,
            latent_dim,
            encoder_dims: e,
            decoder_dims: [latent_dim, e[4], e[3], e[2], e[1]],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if self.encoder_dims[0] != self.input_dim {
            return fail(format!(
                "encoder_dims[0] = {} must equal input_dim = {}",
                self.encoder_dims[0], self.input_dim
            ));
        }
        if self.decoder_dims[0] != self.latent_dim {
            return fail(format!(
                "decoder_dims[0] = {} must equal latent_dim = {}",
                self.decoder_dims[0], self.latent_dim
            ));
        }
        if self.encoder_dims.iter().chain(&self.decoder_dims).any(|&d| d == 0) || self.latent_dim == 0 {
            return fail("layer widths must be positive".into());
        }
        let mirrored = [
            self.latent_dim,
            self.encoder_dims[4],
            self.encoder_dims[3],
            self.encoder_dims[2],
            self.encoder_dims[1],
        ];
        if self.decoder_dims != mirrored {
            return fail(format!(
                "decoder_dims {:?} must mirror the encoder: {mirrored:?}",
                self.decoder_dims
            ));
        }
        // pooled gate inputs need even block inputs
        if self.attention_placement.encoder() {
            for d in [self.encoder_dims[0], self.encoder_dims[2]] {
                if d % 2 != 0 {
                    return fail(format!("encoder block input width {d} must be even for pooling"));
                }
            }
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return fail("batch_size and epochs must be positive".into());
        }
        if !(self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Resample {
    Pool,
    Unpool,
}

/// Two dense layers with an optional gate reading the resampled block input.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedBlock {
    pub first: Dense,
    pub second: Dense,
    pub gate: Option<Dense>,
    resample: Resample,
}

#[derive(Clone, Debug)]
struct BlockCache {
    x: Array2<f64>,
    h1: Array2<f64>,
    h2: Array2<f64>,
    gate_in: Option<Array2<f64>>,
    gate: Option<Array2<f64>>,
}

impl GatedBlock {
    fn new<R: Rng>(name: &str, widths: [usize; 3], gated: bool, resample: Resample, rng: &mut R) -> Self {
        let [a, b, c] = widths;
        let gate_in = match resample {
            Resample::Pool => a / 2,
            Resample::Unpool => a * 2,
        };
        GatedBlock {
            first: Dense::glorot(&format!("{name}.fc1"), a, b, rng),
            second: Dense::glorot(&format!("{name}.fc2"), b, c, rng),
            gate: gated.then(|| Dense::glorot(&format!("{name}.gate"), gate_in, c, rng)),
            resample,
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, BlockCache)> {
        let h1 = tanh_forward(&self.first.forward(x.view())?);
        let h2 = tanh_forward(&self.second.forward(h1.view())?);
        let mut cache = BlockCache {
            x: x.clone(),
            h1,
            h2,
            gate_in: None,
            gate: None,
        };
        let out = match &self.gate {
            Some(g) => {
                let gin = match self.resample {
                    Resample::Pool => avgpool1d(x)?,
                    Resample::Unpool => unpool1d(x),
                };
                let gate = tanh_forward(&g.forward(gin.view())?);
                let out = &gate * &cache.h2;
                cache.gate_in = Some(gin);
                cache.gate = Some(gate);
                out
            }
            None => cache.h2.clone(),
        };
        Ok((out, cache))
    }

    fn backward(&mut self, c: &BlockCache, dout: &Array2<f64>) -> Array2<f64> {
        let (dh2, dx_gate) = match (&mut self.gate, &c.gate, &c.gate_in) {
            (Some(g), Some(gate), Some(gin)) => {
                let dgate = dout * &c.h2;
                let dpre = tanh_backward(gate, &dgate);
                let dgin = g.backward(gin.view(), dpre.view());
                let dx = match self.resample {
                    Resample::Pool => avgpool1d_backward(&dgin),
                    Resample::Unpool => unpool1d_backward(&dgin),
                };
                (dout * gate, Some(dx))
            }
            _ => (dout.clone(), None),
        };
        let d2 = tanh_backward(&c.h2, &dh2);
        let dh1 = self.second.backward(c.h1.view(), d2.view());
        let d1 = tanh_backward(&c.h1, &dh1);
        let mut dx = self.first.backward(c.x.view(), d1.view());
        if let Some(extra) = dx_gate {
            dx += &extra;
        }
        dx
    }

    fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.first.params().into_iter().chain(self.second.params()).collect();
        if let Some(g) = &self.gate {
            v.extend(g.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = Vec::new();
        v.extend(self.first.params_mut());
        v.extend(self.second.params_mut());
        if let Some(g) = &mut self.gate {
            v.extend(g.params_mut());
        }
        v
    }

    /// Gate activations for `x`, if the block is gated.
    pub fn gate_values(&self, x: &Array2<f64>) -> Result<Option<Array2<f64>>> {
        Ok(self.forward(x)?.1.gate)
    }
}

/// Two blocks followed by a single dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Stack {
    pub blocks: [GatedBlock; 2],
    pub out: Dense,
}

struct StackCache {
    blocks: [BlockCache; 2],
    last_in: Array2<f64>,
    y: Array2<f64>,
}

impl Stack {
    fn new<R: Rng>(name: &str, dims: [usize; 5], out_dim: usize, gated: bool, resample: Resample, rng: &mut R) -> Self {
        let b1 = GatedBlock::new(&format!("{name}.block1"), [dims[0], dims[1], dims[2]], gated, resample, rng);
        let b2 = GatedBlock::new(&format!("{name}.block2"), [dims[2], dims[3], dims[4]], gated, resample, rng);
        Stack {
            blocks: [b1, b2],
            out: Dense::glorot(&format!("{name}.fc5"), dims[4], out_dim, rng),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, StackCache)> {
        let (a, c1) = self.blocks[0].forward(x)?;
        let (b, c2) = self.blocks[1].forward(&a)?;
        let y = tanh_forward(&self.out.forward(b.view())?);
        Ok((
            y.clone(),
            StackCache {
                blocks: [c1, c2],
                last_in: b,
                y,
            },
        ))
    }

    fn backward(&mut self, c: &StackCache, dy: &Array2<f64>) -> Array2<f64> {
        let dpre = tanh_backward(&c.y, dy);
        let db = self.out.backward(c.last_in.view(), dpre.view());
        let da = self.blocks[1].backward(&c.blocks[1], &db);
        self.blocks[0].backward(&c.blocks[0], &da)
    }

    fn params(&self) -> Vec<&Param> {
        let mut v = self.blocks[0].params();
        v.extend(self.blocks[1].params());
        v.extend(self.out.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let [b1, b2] = &mut self.blocks;
        let mut v = b1.params_mut();
        v.extend(b2.params_mut());
        v.extend(self.out.params_mut());
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SataeModel {
    pub cfg: SataeConfig,
    pub encoder: Stack,
    pub decoder: Stack,
}

/// Intermediate values of one forward pass, consumed by [`SataeModel::backward`].
pub struct ForwardPass {
    enc: StackCache,
    dec: StackCache,
    pub latent: Array2<f64>,
    pub reconstruction: Array2<f64>,
}

impl SataeModel {
    pub fn new<R: Rng>(cfg: &SataeConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.attention_placement;
        Ok(SataeModel {
            cfg: cfg.clone(),
            encoder: Stack::new("enc", cfg.encoder_dims, cfg.latent_dim, p.encoder(), Resample::Pool, rng),
            decoder: Stack::new("dec", cfg.decoder_dims, cfg.input_dim, p.decoder(), Resample::Unpool, rng),
        })
    }

    fn check_width(&self, x: &ArrayView2<f64>, expected: usize, what: &str) -> Result<()> {
        if x.ncols() != expected {
            return Err(Error::domain(format!("{what} has width {}, model expects {expected}", x.ncols())));
        }
        Ok(())
    }

    /// Latent codes, one row per input row.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(&x, self.cfg.input_dim, "input")?;
        Ok(self.encoder.forward(&x.to_owned())?.0)
    }

    pub fn decode(&self, l: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(&l, self.cfg.latent_dim, "latent")?;
        Ok(self.decoder.forward(&l.to_owned())?.0)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardPass> {
        self.check_width(&x, self.cfg.input_dim, "input")?;
        let (latent, enc) = self.encoder.forward(&x.to_owned())?;
        let (reconstruction, dec) = self.decoder.forward(&latent)?;
        Ok(ForwardPass {
            enc,
            dec,
            latent,
            reconstruction,
        })
    }

    /// Accumulates parameter gradients for `d loss / d reconstruction` and
    /// returns the gradient with respect to the input.
    pub fn backward(&mut self, pass: &ForwardPass, drecon: &Array2<f64>) -> Array2<f64> {
        let dl = self.decoder.backward(&pass.dec, drecon);
        self.encoder.backward(&pass.enc, &dl)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.encoder.params();
        v.extend(self.decoder.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.encoder.params_mut();
        v.extend(self.decoder.params_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests;
