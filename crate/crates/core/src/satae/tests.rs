use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::train_on_matrix;
use super::*;
use crate::dsp::features::TensorKind;
use crate::dsp::{Band, FeatureTensor, State};
use crate::nn::{grad_check, mse, tanh_forward};

const PLACEMENTS: [AttentionPlacement; 4] = [
    AttentionPlacement::Encoder,
    AttentionPlacement::Decoder,
    AttentionPlacement::Both,
    AttentionPlacement::None,
];

fn small(placement: AttentionPlacement) -> SataeConfig {
    SataeConfig {
        attention_placement: placement,
        ..SataeConfig::scaled(16, 4)
    }
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn loss(model: &SataeModel, x: &Array2<f64>, target: &Array2<f64>) -> f64 {
    mse(&model.forward(x.view()).unwrap().reconstruction, target).unwrap().0
}

/// Worst relative error over every parameter tensor and the input.
fn worst_gradient_error(model: &SataeModel, x: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let mut m = model.clone();
    m.zero_grad();
    let pass = m.forward(x.view()).unwrap();
    let (_, d) = mse(&pass.reconstruction, target).unwrap();
    let dx = m.backward(&pass, &d);
    let mut worst = grad_check(|xp| loss(model, xp, target), x, &dx, 1e-5);
    let n = m.params().len();
    for i in 0..n {
        let analytic = m.params()[i].grad.clone();
        let value = m.params()[i].value.clone();
        let err = grad_check(
            |v| {
                let mut probe = model.clone();
                probe.params_mut()[i].value.assign(v);
                loss(&probe, x, target)
            },
            &value,
            &analytic,
            1e-5,
        );
        worst = worst.max(err);
    }
    worst
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    for placement in PLACEMENTS {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = SataeModel::new(&small(placement), &mut rng).unwrap();
            let x = random(3, 16, &mut rng);
            let target = random(3, 16, &mut rng);
            let err = worst_gradient_error(&model, &x, &target);
            assert!(err < 1e-4, "{placement:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn zero_parameters_give_zero_codes_and_reconstructions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for placement in PLACEMENTS {
        let mut model = SataeModel::new(&small(placement), &mut rng).unwrap();
        for p in model.params_mut() {
            p.value.fill(0.0);
        }
        let x = random(5, 16, &mut rng);
        assert!(model.encode(x.view()).unwrap().iter().all(|&v| v == 0.0));
        let pass = model.forward(x.view()).unwrap();
        assert!(pass.reconstruction.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn without_attention_the_model_is_a_plain_mlp() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = SataeModel::new(&small(AttentionPlacement::None), &mut rng).unwrap();
    let x = random(4, 16, &mut rng);
    let mut layers: Vec<&crate::nn::Dense> = Vec::new();
    for stack in [&model.encoder, &model.decoder] {
        for b in &stack.blocks {
            assert!(b.gate.is_none());
            layers.push(&b.first);
            layers.push(&b.second);
        }
        layers.push(&stack.out);
    }
    let mut h = x.clone();
    for (i, layer) in layers.iter().enumerate() {
        h = tanh_forward(&(h.dot(&layer.w.value) + &layer.b.value));
        if i == 4 {
            assert_eq!(h, model.encode(x.view()).unwrap());
        }
    }
    assert_eq!(h, model.forward(x.view()).unwrap().reconstruction);
}

#[test]
fn gates_stay_inside_the_open_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = SataeModel::new(&small(AttentionPlacement::Both), &mut rng).unwrap();
    let x = random(20, 16, &mut rng);
    for block in [&model.encoder.blocks[0], &model.decoder.blocks[1]] {
        let input = if block.first.in_dim() == 16 { x.clone() } else { random(20, block.first.in_dim(), &mut rng) };
        let g = block.gate_values(&input).unwrap().unwrap();
        assert!(g.iter().all(|&v| v > -1.0 && v < 1.0));
    }
    // saturation reaches the closed bound in floating point, never beyond
    let g = model.encoder.blocks[0].gate_values(&(x * 1e3)).unwrap().unwrap();
    assert!(g.iter().all(|&v| v.abs() <= 1.0));
}

#[test]
fn shapes_round_trip_for_every_placement() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for placement in PLACEMENTS {
        let cfg = SataeConfig {
            attention_placement: placement,
            ..Default::default()
        };
        let model = SataeModel::new(&cfg, &mut rng).unwrap();
        let x = random(3, 128, &mut rng);
        let l = model.encode(x.view()).unwrap();
        assert_eq!(l.dim(), (3, 32));
        assert_eq!(model.decode(l.view()).unwrap().dim(), (3, 128));
        assert!(matches!(model.encode(random(3, 64, &mut rng).view()), Err(Error::Domain(_))));
    }
}

#[test]
fn inconsistent_configs_are_rejected() {
    let mut bad = SataeConfig::default();
    bad.decoder_dims[2] = 50;
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let odd = SataeConfig {
        input_dim: 15,
        encoder_dims: [15, 12, 8, 6, 4],
        decoder_dims: [32, 4, 6, 8, 12],
        ..Default::default()
    };
    assert!(odd.validate().is_err());
    assert!(SataeConfig { attention_placement: AttentionPlacement::None, ..odd }.validate().is_ok());
    assert!(SataeConfig { epochs: 0, ..Default::default() }.validate().is_err());
}

#[test]
fn memorises_a_repeated_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random(1, 16, &mut rng) * 0.8;
    let x = Array2::from_shape_fn((64, 16), |(_, j)| v[[0, j]]);
    let (_, hist) = train_on_matrix(&x, &small(AttentionPlacement::Encoder), 0).unwrap();
    let last = *hist.epoch_loss.last().unwrap();
    assert_eq!(hist.epoch_loss.len(), 30);
    assert!(last < 1e-3, "{last}");
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(100, 16, &mut rng) * 0.7;
    let cfg = SataeConfig {
        epochs: 5,
        ..small(AttentionPlacement::Both)
    };
    let (a, ha) = train_on_matrix(&x, &cfg, 9).unwrap();
    let (b, hb) = train_on_matrix(&x, &cfg, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert!(ha.epoch_loss.iter().all(|l| l.is_finite()));
    assert!(ha.epoch_loss.last().unwrap() < &ha.epoch_loss[0]);
    assert!(matches!(train_on_matrix(&Array2::zeros((0, 16)), &cfg, 0), Err(Error::Config(_))));
}

/// Mean squared residual of the best rank-`n` affine reconstruction (PCA).
fn pca_residual(x: &Array2<f64>, n: usize) -> f64 {
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let centred = x - &mean;
    let cov = centred.t().dot(&centred) / x.nrows() as f64;
    let d = cov.nrows();
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig[..d - n].iter().sum::<f64>() / d as f64
}

#[test]
fn rank_n_data_reconstructs_near_the_linear_floor() {
    const EPOCHS: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (i, n) = (16, 4);
    let basis = random(n, i, &mut rng) * 0.3;
    let coef = random(512, n, &mut rng);
    let noise = random(512, i, &mut rng) * 0.01;
    let x = coef.dot(&basis) + &noise;
    let floor = pca_residual(&x, n);
    let cfg = SataeConfig {
        epochs: EPOCHS,
        batch_size: 512,
        attention_placement: AttentionPlacement::None,
        ..SataeConfig::scaled(i, n)
    };
    let (model, _) = train_on_matrix(&x, &cfg, 1).unwrap();
    let err = loss(&model, &x, &x);
    assert!(err < 5.0 * floor, "mse {err} vs floor {floor}");
}

fn tensor(patient: usize, c: usize, len: usize, fill: impl Fn(usize) -> f64) -> FeatureTensor {
    let mut k = 0;
    FeatureTensor {
        patient,
        kind: TensorKind::BandPower,
        data: Array4::from_shape_simple_fn((c, 3, 6, len), || {
            k += 1;
            fill(k)
        }),
        states: State::BEHAVIORAL.to_vec(),
        bands: Band::ALL.to_vec(),
        labels: vec![0; c],
        zscored: true,
    }
}

#[test]
fn cohort_encoding_shapes_and_zero_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tensors = vec![
        tensor(0, 5, 16, |k| (k as f64 * 0.37).sin()),
        tensor(1, 3, 16, |k| (k as f64 * 0.11).cos()),
    ];
    let model = SataeModel::new(&small(AttentionPlacement::Encoder), &mut rng).unwrap();
    let latents = encode_cohort(&model, &tensors).unwrap();
    assert_eq!(latents[0].data.dim(), (5, 3, 6, 4));
    assert_eq!(latents[1].data.dim(), (3, 3, 6, 4));
    assert_eq!(latents[0].kind, TensorKind::Latent);
    assert_eq!(encode_cohort(&model, &tensors).unwrap(), latents);

    // each vector is encoded on its own
    let v = tensors[0].data.slice(ndarray::s![2, 1, 4, ..]).to_owned().insert_axis(ndarray::Axis(0));
    let direct = model.encode(v.view()).unwrap();
    assert_eq!(latents[0].data.slice(ndarray::s![2, 1, 4, ..]), direct.row(0));

    let mut zero = model.clone();
    for p in zero.params_mut() {
        p.value.fill(0.0);
    }
    let zeros = encode_cohort(&zero, &[tensor(0, 2, 16, |_| 0.0)]).unwrap();
    assert!(zeros[0].data.iter().all(|&v| v == 0.0));
}

#[test]
fn checkpoints_restore_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = SataeModel::new(&small(AttentionPlacement::Both), &mut rng).unwrap();
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    let x = random(4, 16, &mut rng);
    assert_eq!(back.encode(x.view()).unwrap(), model.encode(x.view()).unwrap());
    assert_eq!(back.cfg, model.cfg);
}
