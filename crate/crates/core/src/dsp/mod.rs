//! Signal preprocessing: notch and low-pass cleaning, decimation, band
//! decomposition, Morlet band power and interictal baseline construction.
//!
//! ```text
//! raw (10 kHz) ── notch 50 Hz ── low-pass 800 Hz ─┬─ ↓1000 Hz ── band-pass ×6 ── Morlet |W| ── I bins
//!                                                 └─ ↓5000 Hz ── CCEP segments / interictal baseline
//! ```

pub mod features;
pub mod filter;
pub mod morlet;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use filter::{Sos, BUTTER_ORDER};

pub use features::{extract_state_features, FeatureTensor, PreprocessConfig};
pub use morlet::morlet_power_matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Wake,
    Sleep,
    Seizure,
    Ccep,
    Interictal,
}

impl State {
    /// The behavioural states, in feature-concatenation order.
    pub const BEHAVIORAL: [State; 3] = [State::Wake, State::Sleep, State::Seizure];

    pub fn name(self) -> &'static str {
        match self {
            State::Wake => "wake",
            State::Sleep => "sleep",
            State::Seizure => "seizure",
            State::Ccep => "ccep",
            State::Interictal => "interictal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    LowGamma,
    HighGamma,
}

impl Band {
    pub const ALL: [Band; 6] = [
        Band::Delta,
        Band::Theta,
        Band::Alpha,
        Band::Beta,
        Band::LowGamma,
        Band::HighGamma,
    ];

    pub fn def(self) -> BandDef {
        let (lo, hi) = match self {
            Band::Delta => (1.0, 4.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 14.0),
            Band::Beta => (14.0, 30.0),
            Band::LowGamma => (30.0, 80.0),
            Band::HighGamma => (80.0, 150.0),
        };
        BandDef {
            band: self,
            lo_hz: lo,
            hi_hz: hi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::LowGamma => "low_gamma",
            Band::HighGamma => "high_gamma",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDef {
    pub band: Band,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandDef {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        if !(0.0 < self.lo_hz && self.lo_hz < self.hi_hz && self.hi_hz < rate_hz / 2.0) {
            return Err(Error::domain(format!(
                "band {:?} [{}, {}] Hz is invalid at {} Hz",
                self.band, self.lo_hz, self.hi_hz, rate_hz
            )));
        }
        Ok(())
    }
}

/// Multichannel time series, one channel per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub samples: Array2<f64>,
    pub rate_hz: f64,
    pub state: Option<State>,
}

impl Recording {
    pub fn new(samples: Array2<f64>, rate_hz: f64, state: Option<State>) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::domain("recording must contain at least one sample"));
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::domain(format!("sampling rate must be positive, got {rate_hz}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("recording contains NaN or infinite samples"));
        }
        Ok(Recording {
            samples,
            rate_hz,
            state,
        })
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    fn with_samples(&self, samples: Array2<f64>, rate_hz: f64) -> Recording {
        Recording {
            samples,
            rate_hz,
            state: self.state,
        }
    }

    fn map_rows<F>(&self, f: F) -> Array2<f64>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let rows: Vec<Vec<f64>> = self
            .samples
            .outer_iter()
            .into_par_iter()
            .map(|r| f(&r.to_vec()))
            .collect();
        let cols = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((self.channels(), cols), flat).expect("rows share a length")
    }

    fn apply(&self, sos: &Sos) -> Recording {
        self.with_samples(self.map_rows(|x| sos.filtfilt(x)), self.rate_hz)
    }
}

/// Zero-phase notch at `freq_hz` with quality factor `q`.
pub fn notch_filter(rec: &Recording, freq_hz: f64, q: f64) -> Result<Recording> {
    if !(freq_hz > 0.0 && freq_hz < rec.rate_hz / 2.0) {
        return Err(Error::domain(format!(
            "notch frequency {freq_hz} Hz must lie in (0, {}) Hz",
            rec.rate_hz / 2.0
        )));
    }
    if q <= 0.0 {
        return Err(Error::domain(format!("notch quality factor must be positive, got {q}")));
    }
    Ok(rec.apply(&Sos::notch(freq_hz, q, rec.rate_hz)))
}

/// Zero-phase 4th-order Butterworth low-pass.
pub fn lowpass_filter(rec: &Recording, cutoff_hz: f64) -> Result<Recording> {
    if !(cutoff_hz > 0.0 && cutoff_hz < rec.rate_hz / 2.0) {
        return Err(Error::domain(format!(
            "low-pass cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            rec.rate_hz / 2.0
        )));
    }
    Ok(rec.apply(&Sos::butter_lowpass(BUTTER_ORDER, cutoff_hz, rec.rate_hz)))
}

/// Integer-factor decimation after an anti-alias low-pass at 0.4 × target.
pub fn downsample(rec: &Recording, target_rate_hz: f64) -> Result<Recording> {
    let factor = rec.rate_hz / target_rate_hz;
    let k = factor.round();
    if !(target_rate_hz > 0.0) || k < 1.0 || (factor - k).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "cannot downsample {} Hz to {target_rate_hz} Hz: factor is not an integer",
            rec.rate_hz
        )));
    }
    let k = k as usize;
    if k == 1 {
        return Ok(rec.clone());
    }
    let filtered = lowpass_filter(rec, 0.4 * target_rate_hz)?;
    let out_len = rec.len() / k;
    let samples = filtered.samples.slice(s![.., ..out_len * k;k]).to_owned();
    Ok(rec.with_samples(samples, target_rate_hz))
}

/// Zero-phase Butterworth band-pass (4th-order prototype).
pub fn bandpass(rec: &Recording, band: &BandDef) -> Result<Recording> {
    band.validate(rec.rate_hz)?;
    Ok(rec.apply(&Sos::butter_bandpass(BUTTER_ORDER, band.lo_hz, band.hi_hz, rec.rate_hz)))
}

/// Per-site feature vector produced by [`morlet_power`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub site_index: usize,
    pub band: Band,
    pub state: Option<State>,
}

/// Morlet band power per channel (see [`morlet::morlet_power_matrix`]).
pub fn morlet_power(rec_band: &Recording, band: &BandDef, n_cycles: usize, out_len: usize) -> Result<Vec<FeatureVector>> {
    let m = morlet_power_matrix(rec_band, band, n_cycles as f64, out_len)?;
    Ok(m
        .outer_iter()
        .enumerate()
        .map(|(i, row)| FeatureVector {
            values: row.to_vec(),
            site_index: i,
            band: band.band,
            state: rec_band.state,
        })
        .collect())
}

/// Seconds of interictal data averaged into the baseline.
pub const BASELINE_WINDOW_S: f64 = 60.0;
pub const BASELINE_SPLITS: usize = 10;

/// Averages ten contiguous subsegments of the first 60 s.
pub fn build_baseline(interictal: &Recording) -> Result<Recording> {
    let window = (BASELINE_WINDOW_S * interictal.rate_hz).round() as usize;
    if interictal.len() < window {
        return Err(Error::domain(format!(
            "baseline needs {BASELINE_WINDOW_S} s of interictal data, got {:.3} s",
            interictal.duration_s()
        )));
    }
    let seg = window / BASELINE_SPLITS;
    let mut acc = Array2::<f64>::zeros((interictal.channels(), seg));
    for k in 0..BASELINE_SPLITS {
        acc += &interictal.samples.slice(s![.., k * seg..(k + 1) * seg]);
    }
    acc /= BASELINE_SPLITS as f64;
    Ok(Recording {
        samples: acc,
        rate_hz: interictal.rate_hz,
        state: Some(State::Interictal),
    })
}

/// Per-channel RMS over samples `from..to`.
pub fn channel_rms(rec: &Recording, from: usize, to: usize) -> Vec<f64> {
    rec.samples
        .slice(s![.., from..to])
        .map_axis(Axis(1), |r| (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt())
        .to_vec()
}

#[cfg(test)]
mod tests;
