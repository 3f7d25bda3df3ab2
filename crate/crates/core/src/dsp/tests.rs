use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn tone(freq: f64, rate: f64, seconds: f64, amp: f64) -> Recording {
    let n = (rate * seconds) as usize;
    let row = Array1::from_shape_fn(n, |i| amp * (2.0 * PI * freq * i as f64 / rate).sin());
    Recording::new(row.insert_axis(ndarray::Axis(0)), rate, None).unwrap()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Amplitude of a sinusoid estimated from the RMS of the central half.
fn mid_amplitude(rec: &Recording) -> f64 {
    let n = rec.len();
    channel_rms(rec, n / 4, 3 * n / 4)[0] * 2f64.sqrt()
}

#[test]
fn notch_removes_line_noise() {
    let x = tone(50.0, 10_000.0, 2.0, 1.0);
    let y = notch_filter(&x, 50.0, 30.0).unwrap();
    let ratio = rms(y.samples.as_slice().unwrap()) / rms(x.samples.as_slice().unwrap());
    assert!(ratio < 0.1, "notch rms ratio {ratio}");
}

#[test]
fn notch_passes_dc() {
    let x = Recording::new(Array2::from_elem((2, 5000), 3.7), 10_000.0, None).unwrap();
    let y = notch_filter(&x, 50.0, 30.0).unwrap();
    assert!(y.samples.iter().all(|v| ((v - 3.7) / 3.7).abs() < 1e-6));
}

#[test]
fn notch_above_nyquist_is_rejected() {
    let x = tone(10.0, 10_000.0, 0.1, 1.0);
    assert!(matches!(notch_filter(&x, 6000.0, 30.0), Err(Error::Domain(_))));
}

#[test]
fn lowpass_tone_measurements() {
    let pass = lowpass_filter(&tone(100.0, 10_000.0, 1.0, 1.0), 800.0).unwrap();
    assert!((mid_amplitude(&pass) - 1.0).abs() < 0.05);
    let stop = lowpass_filter(&tone(3000.0, 10_000.0, 1.0, 1.0), 800.0).unwrap();
    assert!(mid_amplitude(&stop) <= 0.1);
    // ≥ 20 dB at twice the cutoff
    let edge = lowpass_filter(&tone(1600.0, 10_000.0, 1.0, 1.0), 800.0).unwrap();
    assert!(mid_amplitude(&edge) <= 0.1);
    assert!(lowpass_filter(&pass, 5000.0).is_err());
}

#[test]
fn downsample_lengths_and_errors() {
    let x = Recording::new(Array2::zeros((1, 10_000)), 10_000.0, None).unwrap();
    assert_eq!(downsample(&x, 1000.0).unwrap().len(), 1000);
    assert_eq!(downsample(&x, 5000.0).unwrap().len(), 5000);
    let odd = Recording::new(Array2::zeros((1, 10_007)), 10_000.0, None).unwrap();
    assert_eq!(downsample(&odd, 1000.0).unwrap().len(), 1000);
    assert!(matches!(downsample(&x, 3000.0), Err(Error::Domain(_))));
}

#[test]
fn slow_tone_survives_decimation() {
    let y = downsample(&tone(10.0, 10_000.0, 2.0, 1.0), 1000.0).unwrap();
    assert_eq!(y.rate_hz, 1000.0);
    assert!((mid_amplitude(&y) - 1.0).abs() < 0.05);
}

#[test]
fn bandpass_tone_measurements() {
    let x = tone(6.0, 1000.0, 10.0, 1.0);
    let theta = bandpass(&x, &Band::Theta.def()).unwrap();
    assert!((mid_amplitude(&theta) - 1.0).abs() < 0.1);
    let beta = bandpass(&x, &Band::Beta.def()).unwrap();
    assert!(mid_amplitude(&beta) <= 0.1);
    let zero = Recording::new(Array2::zeros((2, 1000)), 1000.0, None).unwrap();
    assert!(bandpass(&zero, &Band::Alpha.def()).unwrap().samples.iter().all(|&v| v == 0.0));
}

#[test]
fn invalid_bands_are_rejected() {
    let x = tone(6.0, 250.0, 2.0, 1.0);
    assert!(bandpass(&x, &Band::HighGamma.def()).is_err());
    let inverted = BandDef {
        band: Band::Alpha,
        lo_hz: 14.0,
        hi_hz: 8.0,
    };
    assert!(bandpass(&x, &inverted).is_err());
}

#[test]
fn morlet_tone_power_is_stationary() {
    let x = tone(2.5, 1000.0, 30.0, 1.0);
    let band = Band::Delta.def();
    let f = morlet_power(&x, &band, 6, 128).unwrap();
    let v = &f[0].values;
    // drop 10% of bins on each side
    let core = &v[13..115];
    let mean = core.iter().sum::<f64>() / core.len() as f64;
    let sd = (core.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / core.len() as f64).sqrt();
    assert!(mean > 0.0);
    assert!(sd / mean < 0.1, "cv {}", sd / mean);
    assert!(v.iter().all(|&a| a >= 0.0));
}

#[test]
fn morlet_zero_and_scaling() {
    let band = Band::Theta.def();
    let zero = Recording::new(Array2::zeros((2, 5000)), 1000.0, None).unwrap();
    assert!(morlet_power(&zero, &band, 6, 64).unwrap().iter().all(|f| f.values.iter().all(|&v| v == 0.0)));

    let one = morlet_power(&tone(6.0, 1000.0, 5.0, 1.0), &band, 6, 64).unwrap();
    let two = morlet_power(&tone(6.0, 1000.0, 5.0, 2.0), &band, 6, 64).unwrap();
    for (a, b) in one[0].values.iter().zip(&two[0].values) {
        assert!((b - 2.0 * a).abs() <= 1e-6 * b.abs());
    }
}

#[test]
fn morlet_rejects_short_signals() {
    let band = Band::Delta.def();
    let short = tone(2.5, 1000.0, 2.0, 1.0);
    assert!(matches!(morlet_power(&short, &band, 6, 16), Err(Error::Domain(_))));
}

#[test]
fn out_of_band_tone_has_little_power() {
    let band = Band::Theta.def();
    let feature = |freq: f64| {
        let x = bandpass(&tone(freq, 1000.0, 10.0, 1.0), &band).unwrap();
        let f = morlet_power(&x, &band, 6, 32).unwrap();
        f[0].values.iter().sum::<f64>() / 32.0
    };
    let inside = feature(6.0);
    let outside = feature(40.0);
    assert!(outside < 0.05 * inside, "{outside} vs {inside}");
}

#[test]
fn baseline_examples() {
    let c = Recording::new(Array2::from_elem((2, 60_000), 1.25), 1000.0, None).unwrap();
    assert!(build_baseline(&c).unwrap().samples.iter().all(|&v| (v - 1.25).abs() < 1e-15));

    let alt = Array2::from_shape_fn((1, 60_000), |(_, t)| if (t / 6000) % 2 == 0 { 1.0 } else { -1.0 });
    let alt = Recording::new(alt, 1000.0, None).unwrap();
    let b = build_baseline(&alt).unwrap();
    assert_eq!(b.len(), 6000);
    assert!(b.samples.iter().all(|&v| v == 0.0));

    let short = Recording::new(Array2::zeros((1, 59_999)), 1000.0, None).unwrap();
    assert!(matches!(build_baseline(&short), Err(Error::Domain(_))));
}

#[test]
fn baseline_matches_direct_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((3, 60_500), |_| rng.random_range(-1.0..1.0));
    let rec = Recording::new(x.clone(), 1000.0, None).unwrap();
    let b = build_baseline(&rec).unwrap();
    for c in 0..3 {
        for t in 0..6000 {
            let direct: f64 = (0..10).map(|k| x[[c, k * 6000 + t]]).sum::<f64>() / 10.0;
            assert!((b.samples[[c, t]] - direct).abs() < 1e-7);
        }
    }
}

#[test]
fn state_features_have_expected_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 10_000 * 12;
    let x = Array2::from_shape_fn((2, n), |_| rng.random_range(-1.0..1.0));
    let rec = Recording::new(x, 10_000.0, Some(State::Wake)).unwrap();
    let f = extract_state_features(&rec, &PreprocessConfig::default()).unwrap();
    assert_eq!(f.shape(), &[2, 6, 128]);
    assert!(f.iter().all(|&v| v >= 0.0 && v.is_finite()));
}

fn check_linear(apply: impl Fn(&Recording) -> Recording, x: &Array2<f64>, y: &Array2<f64>, a: f64, b: f64, rate: f64) {
    let rx = Recording::new(x.clone(), rate, None).unwrap();
    let ry = Recording::new(y.clone(), rate, None).unwrap();
    let mix = Recording::new(x * a + y * b, rate, None).unwrap();
    let lhs = apply(&mix).samples;
    let rhs = apply(&rx).samples * a + apply(&ry).samples * b;
    let scale = rhs.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    for (l, r) in lhs.iter().zip(rhs.iter()) {
        assert!((l - r).abs() <= 1e-6 * scale, "{l} vs {r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn filters_are_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((2, 3000), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((2, 3000), |_| rng.random_range(-1.0..1.0));
        check_linear(|r| notch_filter(r, 50.0, 30.0).unwrap(), &x, &y, a, b, 1000.0);
        check_linear(|r| lowpass_filter(r, 100.0).unwrap(), &x, &y, a, b, 1000.0);
        check_linear(|r| bandpass(r, &Band::Alpha.def()).unwrap(), &x, &y, a, b, 1000.0);
        check_linear(|r| downsample(r, 500.0).unwrap(), &x, &y, a, b, 1000.0);
    }
}
