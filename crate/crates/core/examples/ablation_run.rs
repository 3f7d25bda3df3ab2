//! A complete experiment on a small synthetic cohort: fusion-mode ablation
//! with repeats, a logistic baseline, and a report across the resulting runs.
//!
//! cargo run --release --example ablation_run -- /tmp/ablation

use std::path::PathBuf;

use sozgraph::dsp::PreprocessConfig;
use sozgraph::harness::{report, report_csv, run_experiment, ExperimentConfig, Sweep};
use sozgraph::hfgcn::{FusionMode, HfgcnConfig};
use sozgraph::satae::SataeConfig;
use sozgraph::synth::{plan_cohort, save_plans, CohortSpec, SitesSpec};

fn main() -> sozgraph::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-ablation".into()));
    let spec = CohortSpec {
        num_patients: 3,
        sites_per_patient: SitesSpec::Fixed(32),
        duration_state_s: 10.0,
        ccep_segments: 3,
        ccep_duration_s: 1.0,
        raw_rate_hz: 4000.0,
        seed: 11,
        ..Default::default()
    };
    let cohort = root.join("cohort");
    if !cohort.join("cohort.json").exists() {
        save_plans(&cohort, &spec, &plan_cohort(&spec)?)?;
    }

    let mut satae = SataeConfig::scaled(32, 8);
    satae.epochs = 10;
    let base = ExperimentConfig {
        cohort,
        artifacts: Some(root.join("artifacts")),
        runs_dir: root.join("runs"),
        repeats: 3,
        preprocess: PreprocessConfig { feat_len: 32, ccep_rate_hz: 2000.0, ..Default::default() },
        satae,
        hfgcn: HfgcnConfig { epochs: 60, knn: 5, ..Default::default() },
        ..Default::default()
    };

    let fusion = ExperimentConfig {
        sweep: Some(Sweep::Fusion(FusionMode::ALL.to_vec())),
        ..base.clone()
    };
    let order = ExperimentConfig { sweep: Some(Sweep::F(vec![1, 3, 5])), logistic_baseline: false, ..base };

    let mut dirs = Vec::new();
    for cfg in [fusion, order] {
        let outcome = run_experiment(&cfg)?;
        println!("run {} took {:.1}s", outcome.dir.display(), outcome.wall_clock_s);
        dirs.push(outcome.dir);
    }
    print!("{}", report_csv(&report(&dirs, true)));
    Ok(())
}
