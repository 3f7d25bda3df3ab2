use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers of one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        AdamState {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Array2<f64>, grad: &Array2<f64>, state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    Zip::from(param)
        .and(grad)
        .and(&mut state.m)
        .and(&mut state.v)
        .for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let cfg = AdamConfig::with_lr(0.005);
        let mut p = array![[1.0, -2.0, 0.5]];
        let g = array![[0.3, -4.0, 1e-3]];
        let mut st = AdamState::new((1, 3));
        adam_step(&mut p, &g, &mut st, &cfg);
        // m̂ = g, v̂ = g², Δ = −lr·g/(|g| + ε)
        let expected = [
            1.0 - 0.005 * 0.3 / (0.3 + 1e-8),
            -2.0 + 0.005 * 4.0 / (4.0 + 1e-8),
            0.5 - 0.005 * 1e-3 / (1e-3 + 1e-8),
        ];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let cfg = AdamConfig::default();
        let mut p = array![[1.5, -0.25]];
        let mut st = AdamState::new((1, 2));
        for _ in 0..100 {
            adam_step(&mut p, &Array2::zeros((1, 2)), &mut st, &cfg);
        }
        assert_eq!(p, array![[1.5, -0.25]]);
    }

    #[test]
    fn two_scalar_steps_match_hand_evaluation() {
        let cfg = AdamConfig::with_lr(0.1);
        let mut p = array![[1.0]];
        let mut st = AdamState::new((1, 1));
        adam_step(&mut p, &array![[2.0]], &mut st, &cfg);
        adam_step(&mut p, &array![[-1.0]], &mut st, &cfg);

        // Step 1: m=0.2, v=0.004, m̂=2, v̂=4 -> p = 1 - 0.1*2/(2+1e-8)
        let p1 = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        // Step 2: m = 0.18 - 0.1 = 0.08, v = 0.003996 + 0.001 = 0.004996
        let m2: f64 = 0.9 * 0.2 + 0.1 * -1.0;
        let v2: f64 = 0.999 * 0.004 + 0.001 * 1.0;
        let m_hat = m2 / (1.0 - 0.81);
        let v_hat = v2 / (1.0 - 0.999f64 * 0.999);
        let p2 = p1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[[0, 0]] - p2).abs() < 1e-12);
    }
}
