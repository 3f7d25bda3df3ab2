use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use ndarray::{Array2, Array4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsp::features::TensorKind;
use crate::dsp::FeatureTensor;
use crate::hfgcn::FusionMode;
use crate::synth::{plan_cohort, save_plans, CohortSpec, SitesSpec};

fn labels_with(c: usize, pos: usize) -> Vec<u8> {
    (0..c).map(|i| u8::from(i < pos)).collect()
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

fn positives(mask: &[bool], labels: &[u8]) -> usize {
    mask.iter().zip(labels).filter(|&(&m, &y)| m && y == 1).count()
}

#[test]
fn hundred_nodes_split_ten_twenty_seventy() {
    let labels = labels_with(100, 25);
    assert_eq!(labels.iter().filter(|&&y| y == 1).count(), 25);
    let m = split_nodes(&labels, [0.1, 0.2, 0.7], 4).unwrap();
    assert_eq!((count(&m.train), count(&m.val), count(&m.test)), (10, 20, 70));
    m.validate(100).unwrap();
    // 25% positives: 2.5 → 3 (rounded half away), 5, and the remaining 17
    assert_eq!(positives(&m.train, &labels), 3);
    assert_eq!(positives(&m.val, &labels), 5);
    assert_eq!(positives(&m.test, &labels), 17);
}

#[test]
fn single_class_input_cannot_be_stratified() {
    for labels in [vec![1u8; 30], vec![0u8; 30]] {
        assert!(matches!(split_nodes(&labels, [0.1, 0.2, 0.7], 0), Err(Error::Config(_))));
    }
    assert!(matches!(split_nodes(&labels_with(10, 3), [0.5, 0.2, 0.2], 0), Err(Error::Config(_))));
}

#[test]
fn splits_are_deterministic_per_seed() {
    let labels = labels_with(64, 16);
    let a = split_nodes(&labels, [0.1, 0.2, 0.7], 11).unwrap();
    assert_eq!(a, split_nodes(&labels, [0.1, 0.2, 0.7], 11).unwrap());
    assert_ne!(a, split_nodes(&labels, [0.1, 0.2, 0.7], 12).unwrap());
}

#[test]
fn train_always_holds_both_classes() {
    // 1 positive in 40: proportional share would round to 0
    let mut labels = vec![0u8; 40];
    labels[17] = 1;
    let m = split_nodes(&labels, [0.1, 0.2, 0.7], 0).unwrap();
    assert!(m.train[17]);
    assert_eq!(count(&m.train), 4);
}

proptest! {
    #[test]
    fn splits_partition_and_stratify(c in 15usize..300, frac in 0.05f64..0.6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = ((frac * c as f64).round() as usize).clamp(1, c - 1);
        let mut labels: Vec<u8> = (0..c).map(|i| u8::from(i < pos)).collect();
        for i in (1..c).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let m = split_nodes(&labels, [0.1, 0.2, 0.7], seed).unwrap();
        m.validate(c).unwrap();
        let n_train = (0.1 * c as f64).round() as usize;
        let n_val = (0.2 * c as f64).round() as usize;
        prop_assert_eq!(count(&m.train), n_train);
        prop_assert_eq!(count(&m.val), n_val);
        prop_assert_eq!(count(&m.test), c - n_train - n_val);
        let tp = positives(&m.train, &labels);
        prop_assert!(tp >= 1 && tp < n_train);
        let expect = n_train as f64 * pos as f64 / c as f64;
        prop_assert!((tp as f64 - expect).abs() <= 1.0 || tp == 1);
        let vp = positives(&m.val, &labels) as f64;
        let expect_val = n_val as f64 * pos as f64 / c as f64;
        prop_assert!((vp - expect_val).abs() <= 1.0 + (tp as f64 - expect).abs());
    }
}

/// Latents whose every entry encodes its own (site, state, band, unit).
fn coded_latent(sites: usize, n: usize) -> FeatureTensor {
    FeatureTensor {
        patient: 0,
        kind: TensorKind::Latent,
        data: Array4::from_shape_fn((sites, 3, 6, n), |(i, s, b, u)| (i * 10_000 + s * 1000 + b * 100 + u) as f64),
        states: State::BEHAVIORAL.to_vec(),
        bands: Band::ALL.to_vec(),
        labels: vec![0; sites],
        zscored: true,
    }
}

#[test]
fn node_feature_widths() {
    let t = coded_latent(5, 32);
    let all = assemble_node_features(&t, &Band::ALL, &State::BEHAVIORAL).unwrap();
    assert_eq!(all.dim(), (5, 576));
    let delta = assemble_node_features(&t, &[Band::Delta], &State::BEHAVIORAL).unwrap();
    assert_eq!(delta.ncols(), 96);
    let wake = assemble_node_features(&t, &Band::ALL, &[State::Wake]).unwrap();
    assert_eq!(wake.ncols(), 192);
    assert_eq!(feature_width(1, 3, 32), 96);
}

#[test]
fn states_outer_bands_inner_in_canonical_order() {
    let n = 4;
    let t = coded_latent(3, n);
    let bands = [Band::HighGamma, Band::Theta, Band::Beta];
    let states = [State::Seizure, State::Wake];
    let x = assemble_node_features(&t, &bands, &states).unwrap();
    let want_states = [0usize, 2];
    let want_bands = [1usize, 3, 5];
    for i in 0..3 {
        let mut col = 0;
        for &s in &want_states {
            for &b in &want_bands {
                for u in 0..n {
                    assert_eq!(x[[i, col]], (i * 10_000 + s * 1000 + b * 100 + u) as f64);
                    col += 1;
                }
            }
        }
        assert_eq!(col, x.ncols());
    }
}

#[test]
fn missing_or_empty_subsets_are_rejected() {
    let mut t = coded_latent(2, 3);
    assert!(assemble_node_features(&t, &[], &[State::Wake]).is_err());
    assert!(assemble_node_features(&t, &[Band::Alpha], &[]).is_err());
    t.states = vec![State::Wake, State::Sleep, State::Ccep];
    assert!(matches!(
        assemble_node_features(&t, &[Band::Alpha], &[State::Seizure]),
        Err(Error::Domain(_))
    ));
}

#[test]
fn logistic_separates_a_linear_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Array2::from_shape_fn((80, 5), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<u8> = x.rows().into_iter().map(|r| u8::from(r[0] - 0.5 * r[3] > 0.1)).collect();
    let rows: Vec<usize> = (0..80).collect();
    let cfg = LogisticConfig { l2: 0.0, epochs: 3000, ..Default::default() };
    let model = LogisticModel::fit(&x, &labels, &rows, &cfg).unwrap();
    let pred = model.predict(&x);
    let correct = pred.iter().zip(&labels).filter(|(p, y)| p == y).count();
    assert!(correct >= 78, "{correct}/80");
    assert!(model.predict_proba(&x).iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn logistic_gradient_vanishes_at_the_fit() {
    // stationarity of the regularised loss: Zᵀ(p − y)/n + λw = 0
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<u8> = (0..40).map(|_| rng.random_range(0..2)).collect();
    let rows: Vec<usize> = (0..40).collect();
    let cfg = LogisticConfig { l2: 0.1, lr: 0.5, epochs: 5000 };
    let m = LogisticModel::fit(&x, &labels, &rows, &cfg).unwrap();
    let p = m.predict_proba(&x);
    let z = (&x - &m.mean) / &m.scale;
    let r: ndarray::Array1<f64> = p.iter().zip(&labels).map(|(p, &y)| p - y as f64).collect();
    let g = z.t().dot(&r) / 40.0 + &m.w * 0.1;
    assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
    assert!((r.sum() / 40.0).abs() < 1e-9);
}

#[test]
fn sweeps_expand_to_labelled_variants() {
    let cfg = ExperimentConfig { sweep: Some(Sweep::F((1..=10).collect())), ..Default::default() };
    let v = cfg.variants();
    assert_eq!(v.len(), 10);
    assert_eq!(v[2].label, "F=3");
    assert_eq!(v[2].hfgcn.cheb_order, 3);

    let cfg = ExperimentConfig { sweep: Some(Sweep::K((1..=13).collect())), ..Default::default() };
    assert_eq!(cfg.variants().iter().map(|v| v.hfgcn.knn).collect::<Vec<_>>(), (1..=13).collect::<Vec<_>>());

    let cfg = ExperimentConfig { sweep: Some(Sweep::Fusion(FusionMode::ALL.to_vec())), ..Default::default() };
    let labels: Vec<String> = cfg.variants().into_iter().map(|v| v.label).collect();
    assert_eq!(labels, ["full", "fusion_s1", "fusion_s2", "static_only", "dynamic_only"]);

    let cfg = ExperimentConfig {
        sweep: Some(Sweep::Bands(vec![vec![Band::Delta], vec![Band::Theta, Band::Delta]])),
        ..Default::default()
    };
    let v = cfg.variants();
    assert_eq!((v[0].label.as_str(), v[1].label.as_str()), ("delta", "theta+delta"));

    let cfg = ExperimentConfig {
        sweep: Some(Sweep::Placement(vec![AttentionPlacement::Encoder, AttentionPlacement::None])),
        ..Default::default()
    };
    assert_eq!(cfg.placements(), [AttentionPlacement::Encoder, AttentionPlacement::None]);
}

#[test]
fn config_json_round_trips_with_sweeps() {
    let text = r#"{"seed": 3, "sweep": {"param": "K", "values": [2, 4]}, "states": ["wake"]}"#;
    let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.sweep, Some(Sweep::K(vec![2, 4])));
    assert_eq!(cfg.repeats, 5);
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sede": 3}"#).is_err());
}

#[test]
fn invalid_configs_are_config_errors() {
    let bad = [
        ExperimentConfig { split_fractions: [0.1, 0.2, 0.6], ..Default::default() },
        ExperimentConfig { bands: vec![], ..Default::default() },
        ExperimentConfig { states: vec![State::Ccep], ..Default::default() },
        ExperimentConfig { repeats: 0, ..Default::default() },
        ExperimentConfig { sweep: Some(Sweep::F(vec![])), ..Default::default() },
        ExperimentConfig { sweep: Some(Sweep::F(vec![0, 2])), ..Default::default() },
        ExperimentConfig { sweep: Some(Sweep::States(vec![vec![]])), ..Default::default() },
        ExperimentConfig { ccep_subset: Some(vec![]), ..Default::default() },
        ExperimentConfig {
            preprocess: crate::dsp::PreprocessConfig { feat_len: 64, ..Default::default() },
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
    }
    ExperimentConfig::default().validate().unwrap();
}

#[test]
fn fingerprint_ignores_workers_and_locations() {
    let a = ExperimentConfig::default();
    let b = ExperimentConfig { workers: 4, runs_dir: "elsewhere".into(), artifacts: Some("cache".into()), ..a.clone() };
    assert_eq!(fingerprint(&a), fingerprint(&b));
    assert_ne!(fingerprint(&a), fingerprint(&ExperimentConfig { seed: 1, ..a }));
}

#[test]
fn job_seeds_vary_with_repeat_and_patient() {
    let mut seen = std::collections::HashSet::new();
    for r in 0..5 {
        for p in 0..5 {
            let (s, m) = job_seeds(7, r, p);
            assert!(seen.insert(s) && seen.insert(m));
        }
    }
    assert_eq!(job_seeds(7, 1, 0), job_seeds(7, 1, 0));
}

#[test]
fn missing_upstream_artifacts_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { cohort: tmp.path().join("nope"), runs_dir: tmp.path().join("runs"), ..Default::default() };
    assert!(matches!(run_experiment(&cfg), Err(Error::Dependency { stage: "synth", .. })));
    assert!(matches!(
        load_features(&tmp.path().join("features"), "preprocess"),
        Err(Error::Dependency { stage: "preprocess", .. })
    ));
    assert!(matches!(load_graphs(tmp.path(), &[0]), Err(Error::Dependency { stage: "build-graph", .. })));
}

// ---- whole runs on a tiny cohort ----

fn tiny_cohort() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep().join("cohort");
        let spec = CohortSpec {
            num_patients: 2,
            sites_per_patient: SitesSpec::Fixed(20),
            duration_state_s: 10.0,
            ccep_segments: 2,
            ccep_duration_s: 1.0,
            raw_rate_hz: 4000.0,
            seed: 5,
            ..Default::default()
        };
        save_plans(&dir, &spec, &plan_cohort(&spec).unwrap()).unwrap();
        dir
    })
}

fn tiny_config(runs: &Path) -> ExperimentConfig {
    let mut satae = crate::satae::SataeConfig::scaled(16, 4);
    satae.epochs = 2;
    ExperimentConfig {
        cohort: tiny_cohort().to_path_buf(),
        runs_dir: runs.to_path_buf(),
        repeats: 2,
        preprocess: crate::dsp::PreprocessConfig {
            feat_len: 16,
            ccep_rate_hz: 2000.0,
            ..Default::default()
        },
        satae,
        hfgcn: crate::hfgcn::HfgcnConfig { epochs: 8, hidden: 8, knn: 3, ..Default::default() },
        ..Default::default()
    }
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn runs_are_reproducible_and_cacheable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        sweep: Some(Sweep::Fusion(vec![FusionMode::Full, FusionMode::StaticOnly])),
        ..tiny_config(&tmp.path().join("runs"))
    };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.dir, b.dir);
    let metrics = read(&a.dir, "metrics.csv");
    assert_eq!(metrics, read(&b.dir, "metrics.csv"));
    assert_eq!(read(&a.dir, "per_patient.csv"), read(&b.dir, "per_patient.csv"));

    // two workers and a cold then warm artifact cache change nothing
    let cached = ExperimentConfig { workers: 2, artifacts: Some(tmp.path().join("cache")), ..cfg.clone() };
    let cold = run_experiment(&cached).unwrap();
    let warm = run_experiment(&cached).unwrap();
    assert_eq!(metrics, read(&cold.dir, "metrics.csv"));
    assert_eq!(metrics, read(&warm.dir, "metrics.csv"));
    assert!(tmp.path().join("cache/latents_E/satae.ckpt").exists());

    // 2 variants × {hfgcn, logistic}
    assert_eq!(metrics.lines().count(), 1 + 4);
    assert_eq!(metrics.lines().next().unwrap(), METRICS_HEADER);
    assert!(a.dir.join("config.json").exists() && a.dir.join("report.json").exists());
    assert!(a.dir.join("checkpoints/satae_E.ckpt").exists());
    assert!(a.dir.join("checkpoints/full/patient_001_r0.history.csv").exists());
    assert!(!a.dir.join("checkpoints/full/patient_001_r1.history.csv").exists());
}

#[test]
fn aggregates_match_a_recomputation_from_per_patient_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { repeats: 3, checkpoints: CheckpointPolicy::None, ..tiny_config(tmp.path()) };
    let out = run_experiment(&cfg).unwrap();
    assert!(!out.dir.join("checkpoints").exists());
    let text = read(&out.dir, "per_patient.csv");
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3 * 2);
    for agg in &out.rows {
        let mut per_patient = Vec::new();
        for p in 0..2 {
            let mine: Vec<&Vec<&str>> = rows
                .iter()
                .filter(|r| r[0] == agg.variant && r[1] == agg.model && r[2] == p.to_string())
                .collect();
            assert_eq!(mine.len(), 3);
            let m: Vec<f64> = (0..4)
                .map(|k| mine.iter().map(|r| r[4 + k].parse::<f64>().unwrap()).sum::<f64>() / 3.0)
                .collect();
            per_patient.push(m);
        }
        for k in 0..4 {
            let v: Vec<f64> = per_patient.iter().map(|m| m[k]).collect();
            let mean = (v[0] + v[1]) / 2.0;
            let std = ((v[0] - mean).powi(2) + (v[1] - mean).powi(2)).sqrt(); // n − 1 = 1
            assert!((agg.mean[k] - mean).abs() < 1e-12);
            assert!((agg.std[k] - std).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&agg.mean[k]));
        }
        assert_eq!(agg.features, 576 / 8);
    }
}

#[test]
fn report_sorts_by_accuracy_and_flags_missing_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let write_run = |name: &str, accs: &[(&str, f64)]| {
        let dir = tmp.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let mut text = format!("{METRICS_HEADER}\n");
        for (variant, acc) in accs {
            for model in ["hfgcn", "logistic"] {
                text.push_str(&format!("{variant},{model},576,5,5,{acc},0.1,0.5,0.1,0.5,0.1,0.5,0.1,abc\n"));
            }
        }
        std::fs::write(dir.join("metrics.csv"), text).unwrap();
        dir
    };
    let one = write_run("one", &[("full", 0.7)]);
    let two = write_run("two", &[("full", 0.9), ("static_only", 0.6)]);
    let single = report(std::slice::from_ref(&one), false);
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].mean[0], 0.7);

    let rows = report(&[one.clone(), tmp.path().join("missing"), two.clone()], false);
    let accs: Vec<f64> = rows.iter().filter(|r| !r.is_error()).map(|r| r.mean[0]).collect();
    assert_eq!(accs, [0.9, 0.7, 0.6]);
    assert!(rows.last().unwrap().is_error());
    assert_eq!(report(&[one, two], true).len(), 6);
    let csv = report_csv(&rows);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().last().unwrap().contains("not found"));
}
