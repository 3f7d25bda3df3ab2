//! Complex Morlet wavelet magnitude, averaged over log-spaced centre
//! frequencies inside a band and mean-pooled into fixed-length features.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{BandDef, Recording};
use crate::error::{Error, Result};

/// Centre frequencies sampled per band.
pub const CENTER_FREQS: usize = 8;
/// Gaussian envelope half-width in standard deviations.
const SUPPORT_SIGMAS: f64 = 5.0;

pub fn center_frequencies(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let ratio = hi / lo;
    (0..count)
        .map(|k| lo * ratio.powf(k as f64 / (count - 1) as f64))
        .collect()
}

/// Unit-energy complex Morlet wavelet sampled at `rate`, centred in the returned
/// vector (length `2·half + 1`).
pub fn morlet_wavelet(freq: f64, n_cycles: f64, rate: f64) -> Vec<Complex64> {
    let sigma = n_cycles / (2.0 * PI * freq);
    let half = (SUPPORT_SIGMAS * sigma * rate).ceil() as isize;
    let mut w: Vec<Complex64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / rate;
            Complex64::from_polar((-t * t / (2.0 * sigma * sigma)).exp(), 2.0 * PI * freq * t)
        })
        .collect();
    let energy: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    let norm = energy.sqrt();
    for c in &mut w {
        *c /= norm;
    }
    w
}

/// Number of samples covered by the widest wavelet used for `band`.
pub fn longest_support(band: &BandDef, n_cycles: f64, rate: f64) -> usize {
    let sigma = n_cycles / (2.0 * PI * band.lo_hz);
    2 * (SUPPORT_SIGMAS * sigma * rate).ceil() as usize + 1
}

struct Plan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernels: Vec<(usize, Vec<Complex64>)>,
    pad: usize,
}

impl Plan {
    fn new(samples: usize, band: &BandDef, n_cycles: f64, rate: f64) -> Self {
        let wavelets: Vec<Vec<Complex64>> = center_frequencies(band.lo_hz, band.hi_hz, CENTER_FREQS)
            .into_iter()
            .map(|f| morlet_wavelet(f, n_cycles, rate))
            .collect();
        let pad = wavelets.iter().map(|w| w.len() / 2).max().unwrap_or(0);
        let len = (samples + 4 * pad + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let kernels = wavelets
            .into_iter()
            .map(|w| {
                let half = w.len() / 2;
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                buf[..w.len()].copy_from_slice(&w);
                forward.process(&mut buf);
                (half, buf)
            })
            .collect();
        Plan {
            len,
            forward,
            inverse,
            kernels,
            pad,
        }
    }

    /// Mean wavelet magnitude over the centre frequencies, one value per sample.
    fn mean_magnitude(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = self.pad;
        let mut spec = vec![Complex64::new(0.0, 0.0); self.len];
        // reflect padding (edge sample not repeated)
        for i in 0..pad {
            spec[i] = Complex64::new(x[pad - i], 0.0);
            spec[pad + n + i] = Complex64::new(x[n - 2 - i], 0.0);
        }
        for (i, &v) in x.iter().enumerate() {
            spec[pad + i] = Complex64::new(v, 0.0);
        }
        self.forward.process(&mut spec);

        let scale = 1.0 / self.len as f64;
        let mut acc = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (half, kernel) in &self.kernels {
            for ((b, s), k) in buf.iter_mut().zip(&spec).zip(kernel) {
                *b = s * k;
            }
            self.inverse.process(&mut buf);
            for (i, a) in acc.iter_mut().enumerate() {
                *a += (buf[pad + i + half] * scale).norm();
            }
        }
        let m = self.kernels.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }
}

/// Mean-pools `trace` into `bins` contiguous bins with integer boundaries
/// `floor(b·T/bins)`.
pub fn mean_pool(trace: &[f64], bins: usize) -> Vec<f64> {
    let n = trace.len();
    (0..bins)
        .map(|b| {
            let start = b * n / bins;
            let end = ((b + 1) * n / bins).max(start + 1);
            trace[start..end].iter().sum::<f64>() / (end - start) as f64
        })
        .collect()
}

/// Band power features for every channel: a `channels × out_len` matrix.
pub fn morlet_power_matrix(rec: &Recording, band: &BandDef, n_cycles: f64, out_len: usize) -> Result<Array2<f64>> {
    if n_cycles < 1.0 {
        return Err(Error::domain(format!("n_cycles must be at least 1, got {n_cycles}")));
    }
    band.validate(rec.rate_hz)?;
    let t = rec.len();
    if out_len == 0 || out_len > t {
        return Err(Error::domain(format!("cannot pool {t} samples into {out_len} bins")));
    }
    let support = longest_support(band, n_cycles, rec.rate_hz);
    if t < support {
        return Err(Error::domain(format!(
            "signal of {t} samples is shorter than the {support}-sample wavelet support for {:?}",
            band.band
        )));
    }
    let plan = Plan::new(t, band, n_cycles, rec.rate_hz);
    let rows: Vec<Vec<f64>> = rec
        .samples
        .outer_iter()
        .into_par_iter()
        .map(|row| {
            let x = row.to_vec();
            mean_pool(&plan.mean_magnitude(&x), out_len)
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((rec.channels(), out_len), flat).expect("rows have out_len entries"))
}
