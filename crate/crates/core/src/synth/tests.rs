use std::fs;

use proptest::prelude::*;

use super::*;
use crate::connstats::paired_t_test;
use crate::dsp::{build_baseline, features::ccep_chain, PreprocessConfig};

fn tiny(seed: u64) -> CohortSpec {
    CohortSpec {
        num_patients: 2,
        sites_per_patient: SitesSpec::Fixed(8),
        seed,
        duration_state_s: 0.5,
        ccep_segments: 2,
        ccep_duration_s: 0.5,
        raw_rate_hz: 1000.0,
        ..Default::default()
    }
}

#[test]
fn invalid_specs_name_the_violation() {
    let bad = [
        CohortSpec { soz_fraction: 0.0, ..tiny(0) },
        CohortSpec { soz_fraction: 1.0, ..tiny(0) },
        CohortSpec { soz_fraction: 0.01, sites_per_patient: SitesSpec::Fixed(64), ..tiny(0) },
        CohortSpec { sites_per_patient: SitesSpec::Fixed(2), ..tiny(0) },
        CohortSpec { sites_per_patient: SitesSpec::Range { min: 10, max: 5 }, ..tiny(0) },
        CohortSpec { duration_state_s: 0.0, ..tiny(0) },
        CohortSpec { ccep_duration_s: -1.0, ..tiny(0) },
        CohortSpec { ccep_segments: 0, ..tiny(0) },
        CohortSpec { coupling_strength: 1.5, ..tiny(0) },
    ];
    for spec in bad {
        match generate_cohort(&spec) {
            Err(Error::Config(msg)) => assert!(!msg.is_empty()),
            other => panic!("expected config error for {spec:?}, got {other:?}"),
        }
    }
}

#[test]
fn quarter_of_sixty_four_sites_are_onset_sites() {
    let spec = CohortSpec { num_patients: 3, ..Default::default() };
    for plan in plan_cohort(&spec).unwrap() {
        assert_eq!(plan.soz_labels.iter().filter(|&&l| l == 1).count(), 16);
    }
}

proptest! {
    #[test]
    fn labels_and_blocks_follow_the_rounding_rule(c in 4usize..200, frac in 0.01f64..0.99, seed in 0u64..1000) {
        prop_assume!(frac * c as f64 >= 1.0);
        let spec = CohortSpec { sites_per_patient: SitesSpec::Fixed(c), soz_fraction: frac, seed, ..Default::default() };
        let plan = PatientPlan::new(&spec, 0);
        let n_soz = plan.soz_labels.iter().filter(|&&l| l == 1).count();
        prop_assert_eq!(n_soz, soz_count(frac, c));

        let mut sizes = [0usize; COMMUNITIES];
        for &b in &plan.community_assignment {
            sizes[b] += 1;
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        // onset sites saturate one block before touching another
        let mut soz_per_block = [0usize; COMMUNITIES];
        for (s, &l) in plan.soz_labels.iter().enumerate() {
            if l == 1 {
                soz_per_block[plan.community_assignment[s]] += 1;
            }
        }
        let top = (0..COMMUNITIES).max_by_key(|&b| soz_per_block[b]).unwrap();
        prop_assert_eq!(soz_per_block[top], n_soz.min(sizes[top]));
    }
}

#[test]
fn same_seed_gives_identical_cohorts() {
    let a = generate_cohort(&tiny(7)).unwrap();
    let b = generate_cohort(&tiny(7)).unwrap();
    assert_eq!(a, b);
    let c = generate_cohort(&tiny(8)).unwrap();
    assert_ne!(a[0].ccep[0], c[0].ccep[0]);
}

#[test]
fn recordings_have_declared_shapes() {
    let spec = tiny(1);
    let p = &generate_cohort(&spec).unwrap()[0];
    for s in State::BEHAVIORAL {
        assert_eq!(p.recordings[&s].samples.dim(), (8, 500));
        assert_eq!(p.recordings[&s].state, Some(s));
    }
    assert_eq!(p.ccep.len(), 2);
    assert_eq!(p.baseline_interictal.samples.dim(), (8, 60_000));
    assert_eq!(p.community_assignment.len(), 8);
}

#[test]
fn site_ranges_are_respected() {
    let spec = CohortSpec {
        num_patients: 6,
        sites_per_patient: SitesSpec::Range { min: 10, max: 14 },
        ..tiny(3)
    };
    for plan in plan_cohort(&spec).unwrap() {
        assert!((10..=14).contains(&plan.channels()));
    }
}

#[test]
fn only_stimulated_community_carries_the_response() {
    let coupled = CohortSpec { coupling_strength: 0.8, ..tiny(4) };
    let silent = CohortSpec { coupling_strength: 0.0, ..tiny(4) };
    let plan = PatientPlan::new(&coupled, 0);
    let a = plan.render(&coupled, RecordingId::Ccep(0)).unwrap();
    let b = plan.render(&silent, RecordingId::Ccep(0)).unwrap();
    let block = plan.community_assignment[plan.stim_sites[0]];
    for ch in 0..plan.channels() {
        let same = a.samples.row(ch) == b.samples.row(ch);
        assert_eq!(same, plan.community_assignment[ch] != block, "site {ch}");
    }
}

#[test]
fn onset_sites_are_louder_during_seizures() {
    let spec = CohortSpec {
        sites_per_patient: SitesSpec::Fixed(16),
        duration_state_s: 4.0,
        raw_rate_hz: 2000.0,
        ..tiny(5)
    };
    let plan = PatientPlan::new(&spec, 0);
    let wake = plan.render(&spec, RecordingId::Behavioral(State::Wake)).unwrap();
    let seizure = plan.render(&spec, RecordingId::Behavioral(State::Seizure)).unwrap();
    let n = wake.len();
    let w = crate::dsp::channel_rms(&wake, 0, n);
    let s = crate::dsp::channel_rms(&seizure, 0, n);
    let (mut soz, mut other) = (Vec::new(), Vec::new());
    for ch in 0..16 {
        let ratio = s[ch] / w[ch];
        if plan.soz_labels[ch] == 1 {
            soz.push(ratio);
        } else {
            other.push(ratio);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(soz.iter().all(|&r| r > 1.02), "{soz:?}");
    assert!(other.iter().all(|&r| r < 1.1), "{other:?}");
    assert!(mean(&soz) > mean(&other) + 0.1, "{soz:?} vs {other:?}");
}

#[test]
fn coupling_weakly_increases_evoked_t_statistics() {
    let base_spec = CohortSpec {
        num_patients: 1,
        sites_per_patient: SitesSpec::Fixed(8),
        ccep_segments: 20,
        seed: 11,
        ..Default::default()
    };
    let plan = PatientPlan::new(&base_spec, 0);
    let pc = PreprocessConfig::default();
    let baseline = build_baseline(&ccep_chain(&plan.render(&base_spec, RecordingId::Interictal).unwrap(), &pc).unwrap()).unwrap();
    let mut previous = f64::NEG_INFINITY;
    for strength in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let spec = CohortSpec { coupling_strength: strength, ..base_spec.clone() };
        let (mut sum, mut n) = (0.0, 0);
        for q in 0..20 {
            let seg = ccep_chain(&plan.render(&spec, RecordingId::Ccep(q)).unwrap(), &pc).unwrap();
            let block = plan.community_assignment[plan.stim_sites[q]];
            for ch in (0..8).filter(|&ch| plan.community_assignment[ch] == block) {
                sum += paired_t_test(seg.samples.row(ch), baseline.samples.row(ch)).unwrap().t;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!(mean >= previous, "strength {strength}: {mean} < {previous}");
        previous = mean;
    }
}

/// Kolmogorov–Smirnov distance of sorted samples from U(0, 1).
fn ks_uniform(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max)
}

#[test]
#[ignore = "time-sample t-test on autocorrelated 1/f noise is anticonservative; p-values are not uniform under the null"]
fn null_segments_give_uniform_p_values() {
    let spec = CohortSpec {
        num_patients: 1,
        sites_per_patient: SitesSpec::Fixed(8),
        ccep_segments: 200,
        coupling_strength: 0.0,
        ..Default::default()
    };
    let plan = PatientPlan::new(&spec, 0);
    let pc = PreprocessConfig::default();
    let baseline = build_baseline(&ccep_chain(&plan.render(&spec, RecordingId::Interictal).unwrap(), &pc).unwrap()).unwrap();
    let mut ps = Vec::new();
    for q in 0..200 {
        let seg = ccep_chain(&plan.render(&spec, RecordingId::Ccep(q)).unwrap(), &pc).unwrap();
        for ch in 0..8 {
            ps.push(paired_t_test(seg.samples.row(ch), baseline.samples.row(ch)).unwrap().p);
        }
    }
    ps.sort_by(f64::total_cmp);
    let d = ks_uniform(&ps);
    let critical = 1.628 / (ps.len() as f64).sqrt();
    assert!(d < critical, "KS distance {d} ≥ {critical}");
}

#[test]
fn save_then_load_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny(9);
    let cohort = generate_cohort(&spec).unwrap();
    save_cohort(dir.path(), &spec, &cohort).unwrap();
    let (spec2, loaded) = load_cohort(dir.path()).unwrap();
    assert_eq!(spec2, spec);
    assert_eq!(loaded, cohort);

    // rendering straight to disk gives the same files
    let other = tempfile::tempdir().unwrap();
    save_plans(other.path(), &spec, &plan_cohort(&spec).unwrap()).unwrap();
    assert_eq!(load_cohort(other.path()).unwrap().1, cohort);
}

#[test]
fn empty_cohort_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CohortSpec { num_patients: 0, ..tiny(0) };
    let cohort = generate_cohort(&spec).unwrap();
    assert!(cohort.is_empty());
    save_cohort(dir.path(), &spec, &cohort).unwrap();
    assert!(load_cohort(dir.path()).unwrap().1.is_empty());
}

#[test]
fn damaged_files_fail_without_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny(2);
    save_cohort(dir.path(), &spec, &generate_cohort(&spec).unwrap()).unwrap();

    let bin = dir.path().join("patient_001_ccep_01.f32");
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 6]).unwrap();
    match load_cohort(dir.path()) {
        Err(Error::Parse { offset, .. }) => assert_eq!(offset as usize, bytes.len() - 6),
        other => panic!("expected parse error, got {other:?}"),
    }

    let index = dir.path().join("cohort.json");
    let text = fs::read_to_string(&index).unwrap();
    fs::write(&index, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_cohort(dir.path()), Err(Error::Parse { .. })));

    fs::write(&index, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
    assert!(matches!(load_cohort(dir.path()), Err(Error::Version { found: 2, expected: 1, .. })));

    let missing = dir.path().join("nothing here");
    assert!(matches!(load_cohort(&missing), Err(Error::Dependency { .. })));
}
