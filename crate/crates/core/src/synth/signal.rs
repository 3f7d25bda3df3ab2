//! Per-channel signal components at the raw rate.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::SiteParams;
use crate::dsp::State;

/// Corner frequencies of the one-pole bank whose sum approximates 1/f noise.
const PINK_CORNERS_HZ: [f64; 5] = [2.0, 8.0, 32.0, 128.0, 512.0];
const WHITE_WEIGHT: f64 = 0.3;
const LINE_HZ: f64 = 50.0;
const LINE_AMP: f64 = 0.3;
const BURN_IN_S: f64 = 0.5;

/// Peak amplitude of the evoked response at full coupling and unit site gain,
/// in units of background RMS.
pub const EVOKED_AMPLITUDE: f64 = 15.0;
const EVOKED_HZ: f64 = 20.0;
const EVOKED_DECAY_S: f64 = 0.05;
const EVOKED_LATENCY_S: f64 = 0.01;

fn state_gain(state: State, band: usize) -> f64 {
    match (state, band) {
        (State::Wake, 2) => 1.6,
        (State::Sleep, 0) => 2.5,
        (State::Sleep, 1) => 1.5,
        (State::Sleep, 2) => 0.6,
        (State::Seizure, 3 | 4) => 1.3,
        _ => 1.0,
    }
}

/// Unit-variance 1/f-shaped noise plus band oscillations and line noise.
pub(super) fn background(rng: &mut ChaCha8Rng, n: usize, rate: f64, site: &SiteParams, state: State) -> Vec<f64> {
    let poles: Vec<f64> = PINK_CORNERS_HZ.iter().map(|f| (-2.0 * PI * f / rate).exp()).collect();
    let drive: Vec<f64> = poles.iter().map(|a| (1.0 - a * a).sqrt()).collect();
    // Exact stationary variance of the bank driven by one shared white sequence.
    let mut var = WHITE_WEIGHT * WHITE_WEIGHT;
    for j in 0..poles.len() {
        for k in 0..poles.len() {
            var += drive[j] * drive[k] / (1.0 - poles[j] * poles[k]);
        }
    }
    for j in 0..poles.len() {
        var += 2.0 * WHITE_WEIGHT * drive[j];
    }
    let norm = var.sqrt().recip();

    let burn = (BURN_IN_S * rate) as usize;
    let mut state_y = [0.0; PINK_CORNERS_HZ.len()];
    let mut out = Vec::with_capacity(n);
    for t in 0..burn + n {
        let w: f64 = rng.sample(StandardNormal);
        let mut v = WHITE_WEIGHT * w;
        for ((y, a), d) in state_y.iter_mut().zip(&poles).zip(&drive) {
            *y = a * *y + d * w;
            v += *y;
        }
        if t >= burn {
            out.push(v * norm);
        }
    }

    for b in 0..6 {
        let amp = site.osc_amp[b] * state_gain(state, b);
        let omega = 2.0 * PI * site.osc_hz[b] / rate;
        let phase = rng.random_range(0.0..2.0 * PI);
        for (t, v) in out.iter_mut().enumerate() {
            *v += amp * (omega * t as f64 + phase).sin();
        }
    }
    let phase = rng.random_range(0.0..2.0 * PI);
    let omega = 2.0 * PI * LINE_HZ / rate;
    for (t, v) in out.iter_mut().enumerate() {
        *v += LINE_AMP * (omega * t as f64 + phase).sin();
    }
    out
}

/// Onset-site bursts and spikes for the seizure state, weaker bursts in sleep.
pub(super) fn add_state_events(rng: &mut ChaCha8Rng, x: &mut [f64], rate: f64, site: &SiteParams, state: State) {
    let g = site.ictal_gain;
    if g == 0.0 {
        return;
    }
    let (burst_rate, burst_amp, spike_rate) = match state {
        State::Seizure => (3.0, 1.5 * g, 2.0),
        State::Sleep => (1.0, 0.35 * 1.5 * g, 0.0),
        _ => return,
    };
    let duration = x.len() as f64 / rate;

    let gaps = Exp::new(burst_rate).expect("positive rate");
    let mut t0 = gaps.sample(rng);
    while t0 < duration {
        let len_s = rng.random_range(0.05..0.15);
        let freq = rng.random_range(90.0..140.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let start = (t0 * rate) as usize;
        let len = (len_s * rate) as usize;
        for k in 0..len.min(x.len().saturating_sub(start)) {
            let env = 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos();
            x[start + k] += burst_amp * env * (2.0 * PI * freq * k as f64 / rate + phase).sin();
        }
        t0 += gaps.sample(rng);
    }

    if spike_rate > 0.0 {
        let gaps = Exp::new(spike_rate).expect("positive rate");
        let mut t0 = gaps.sample(rng);
        while t0 < duration {
            add_spike(x, rate, t0, 4.0 * g);
            t0 += gaps.sample(rng);
        }
    }
}

/// Sharp negative transient followed by a slow positive wave.
fn add_spike(x: &mut [f64], rate: f64, t0: f64, amp: f64) {
    let (sharp_sd, slow_sd, slow_delay) = (0.005, 0.04, 0.05);
    let from = ((t0 - 4.0 * sharp_sd) * rate).max(0.0) as usize;
    let to = (((t0 + slow_delay + 4.0 * slow_sd) * rate) as usize).min(x.len());
    for (i, v) in x.iter_mut().enumerate().take(to).skip(from) {
        let t = i as f64 / rate - t0;
        let sharp = (-0.5 * (t / sharp_sd).powi(2)).exp();
        let slow = (-0.5 * ((t - slow_delay) / slow_sd).powi(2)).exp();
        *v += amp * (0.25 * slow - sharp);
    }
}

/// Single evoked response `t` seconds after a stimulus pulse.
pub fn evoked_response(t: f64) -> f64 {
    let s = t - EVOKED_LATENCY_S;
    if s < 0.0 {
        return 0.0;
    }
    (-s / EVOKED_DECAY_S).exp() * (2.0 * PI * EVOKED_HZ * s).sin()
}

/// Superposed responses to a pulse train starting at t = 0.
pub fn stimulus_response(n: usize, rate: f64, stim_rate_hz: f64) -> Vec<f64> {
    let period = 1.0 / stim_rate_hz;
    let support = EVOKED_LATENCY_S + 8.0 * EVOKED_DECAY_S;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let last = (t / period).floor() as i64;
            let mut v = 0.0;
            let mut k = last;
            while k >= 0 && t - k as f64 * period <= support {
                v += evoked_response(t - k as f64 * period);
                k -= 1;
            }
            v
        })
        .collect()
}
