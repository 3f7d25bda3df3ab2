//! Finite-difference check of a hand-written backward pass: a dense layer
//! followed by softmax cross-entropy.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sozgraph::nn::{cross_entropy, grad_check, softmax_rows, Dense};

fn main() -> sozgraph::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Array2::from_shape_fn((6, 5), |_| rng.random_range(-1.0..1.0));
    let labels = [0, 1, 1, 0, 1, 0];
    let rows: Vec<usize> = (0..6).collect();
    let mut layer = Dense::glorot("demo", 5, 2, &mut rng);

    let loss = |layer: &Dense, x: &Array2<f64>| {
        let probs = softmax_rows(&layer.forward(x.view()).unwrap());
        cross_entropy(&probs, &labels, &rows, None).unwrap()
    };
    let (_, dlogits) = loss(&layer, &x);
    let dx = layer.backward(x.view(), dlogits.view());

    let err_x = grad_check(|probe| loss(&layer, probe).0, &x, &dx, 1e-6);
    let w0 = layer.w.value.clone();
    let dw = layer.w.grad.clone();
    let err_w = grad_check(
        |probe| {
            let mut l = layer.clone();
            l.w.value = probe.clone();
            loss(&l, &x).0
        },
        &w0,
        &dw,
        1e-6,
    );
    println!("max relative error: input {err_x:.2e}, weights {err_w:.2e}");
    Ok(())
}
