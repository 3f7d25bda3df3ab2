//! IIR filter design as cascaded second-order sections and zero-phase
//! (forward-backward) application.
//!
//! Butterworth designs go through the bilinear transform with frequency
//! pre-warping. Initial conditions follow the step-response steady state of
//! each section scaled by the first sample, which keeps the filters linear
//! and makes constant inputs pass without a start-up transient.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Default Butterworth prototype order.
pub const BUTTER_ORDER: usize = 4;

/// One normalised biquad: `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z_inv * z_inv;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z_inv * z_inv;
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Steady-state DF2T state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }

    /// Biquad with the given conjugate pole pair (or two real poles) and
    /// numerator polynomial.
    fn from_poles(p1: Complex64, p2: Complex64, b: [f64; 3]) -> Self {
        let a1 = -(p1 + p2).re;
        let a2 = (p1 * p2).re;
        Biquad { b, a: [a1, a2] }
    }

    fn normalise_at(mut self, omega: f64) -> Self {
        let z_inv = Complex64::from_polar(1.0, -omega);
        let g = self.response(z_inv).norm();
        for b in &mut self.b {
            *b /= g;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    /// Reflection padding used by [`Sos::filtfilt`], in samples.
    pub padlen: usize,
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + s) / (k - s)
}

/// Left-half-plane poles of the normalised analog Butterworth prototype.
fn butter_prototype(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

/// Groups digital poles into biquads, pairing each upper-half-plane pole with
/// its conjugate and real poles with one another.
fn pair_poles(poles: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-14).collect();
    let mut real: Vec<Complex64> = poles.iter().copied().filter(|p| p.im.abs() <= 1e-14).collect();
    upper.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
    real.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    let mut pairs: Vec<(Complex64, Complex64)> = upper.into_iter().map(|p| (p, p.conj())).collect();
    for chunk in real.chunks(2) {
        let p2 = chunk.get(1).copied().unwrap_or(Complex64::new(0.0, 0.0));
        pairs.push((chunk[0], p2));
    }
    pairs
}

/// Samples needed for the slowest pole to decay by e³.
fn settle_samples(sections: &[Biquad]) -> usize {
    sections
        .iter()
        .map(|s| {
            let r = s.a[1].abs().sqrt().clamp(1e-12, 1.0 - 1e-12);
            (3.0 / -r.ln()).ceil() as usize
        })
        .max()
        .unwrap_or(0)
        .max(3 * (2 * sections.len() + 1))
}

impl Sos {
    fn new(sections: Vec<Biquad>) -> Self {
        let padlen = settle_samples(&sections);
        Sos { sections, padlen }
    }

    pub fn butter_lowpass(order: usize, cutoff: f64, fs: f64) -> Self {
        let wc = prewarp(cutoff, fs);
        let poles: Vec<Complex64> = butter_prototype(order).into_iter().map(|p| bilinear(p * wc, fs)).collect();
        let sections = pair_poles(&poles)
            .into_iter()
            .map(|(p1, p2)| Biquad::from_poles(p1, p2, [1.0, 2.0, 1.0]).normalise_at(0.0))
            .collect();
        Sos::new(sections)
    }

    pub fn butter_highpass(order: usize, cutoff: f64, fs: f64) -> Self {
        let wc = prewarp(cutoff, fs);
        let poles: Vec<Complex64> = butter_prototype(order).into_iter().map(|p| bilinear(wc / p, fs)).collect();
        let sections = pair_poles(&poles)
            .into_iter()
            .map(|(p1, p2)| Biquad::from_poles(p1, p2, [1.0, -2.0, 1.0]).normalise_at(PI))
            .collect();
        Sos::new(sections)
    }

    /// Band-pass from the low-pass → band-pass transform of an `order` prototype
    /// (the digital filter has `2·order` poles).
    pub fn butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Self {
        let w1 = prewarp(lo, fs);
        let w2 = prewarp(hi, fs);
        let bw = w2 - w1;
        let w0sq = w1 * w2;
        let mut poles = Vec::with_capacity(2 * order);
        for p in butter_prototype(order) {
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0sq).sqrt();
            poles.push(bilinear((pb + disc) / 2.0, fs));
            poles.push(bilinear((pb - disc) / 2.0, fs));
        }
        let center = 2.0 * (w0sq.sqrt() / (2.0 * fs)).atan();
        let sections = pair_poles(&poles)
            .into_iter()
            .map(|(p1, p2)| Biquad::from_poles(p1, p2, [1.0, 0.0, -1.0]).normalise_at(center))
            .collect();
        Sos::new(sections)
    }

    /// Second-order notch with quality factor `q`; unit gain at DC and Nyquist.
    pub fn notch(freq: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * freq / fs;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        let c = -2.0 * w0.cos();
        Sos::new(vec![Biquad {
            b: [1.0 / a0, c / a0, 1.0 / a0],
            a: [c / a0, (1.0 - alpha) / a0],
        }])
    }

    /// Magnitude response of a single pass at `freq`.
    pub fn magnitude(&self, freq: f64, fs: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections.iter().map(|s| s.response(z_inv)).product::<Complex64>().norm()
    }

    fn initial_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state();
                let out = [st[0] * scale, st[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Causal filtering, starting from the steady state of a constant input
    /// equal to `x[0]`.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        if x.is_empty() {
            return;
        }
        let x0 = x[0];
        for (sec, st) in self.sections.iter().zip(self.initial_states()) {
            let [b0, b1, b2] = sec.b;
            let [a1, a2] = sec.a;
            let (mut z1, mut z2) = (st[0] * x0, st[1] * x0);
            for v in x.iter_mut() {
                let xi = *v;
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                *v = y;
            }
        }
    }

    /// Zero-phase forward-backward filtering with odd reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_lowpass_half_power_at_cutoff() {
        let sos = Sos::butter_lowpass(4, 800.0, 10_000.0);
        assert!((sos.magnitude(0.0, 10_000.0) - 1.0).abs() < 1e-12);
        assert!((sos.magnitude(800.0, 10_000.0) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(sos.magnitude(1600.0, 10_000.0) < 0.1);
    }

    #[test]
    fn butterworth_highpass_half_power_at_cutoff() {
        let sos = Sos::butter_highpass(4, 14.0, 1000.0);
        assert!((sos.magnitude(500.0, 1000.0) - 1.0).abs() < 1e-12);
        assert!((sos.magnitude(14.0, 1000.0) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn bandpass_edges_are_half_power() {
        let sos = Sos::butter_bandpass(4, 4.0, 8.0, 1000.0);
        assert!((sos.magnitude(4.0, 1000.0) - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((sos.magnitude(8.0, 1000.0) - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((sos.magnitude((32.0f64).sqrt(), 1000.0) - 1.0).abs() < 1e-6);
        assert_eq!(sos.sections.len(), 4);
    }

    #[test]
    fn notch_kills_center_and_passes_dc() {
        let sos = Sos::notch(50.0, 30.0, 10_000.0);
        assert!(sos.magnitude(50.0, 10_000.0) < 1e-9);
        assert!((sos.magnitude(0.0, 10_000.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_passes_lowpass_exactly() {
        let sos = Sos::butter_lowpass(4, 100.0, 1000.0);
        let y = sos.filtfilt(&vec![2.5; 500]);
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }
}
