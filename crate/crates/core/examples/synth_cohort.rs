//! Generate a small synthetic cohort on disk and inspect one patient.
//!
//! cargo run --release --example synth_cohort -- /tmp/cohort

use sozgraph::dsp::State;
use sozgraph::synth::{plan_cohort, save_plans, CohortReader, CohortSpec, PatientSource, RecordingId, SitesSpec};

fn main() -> sozgraph::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-cohort".into());
    let spec = CohortSpec {
        num_patients: 2,
        sites_per_patient: SitesSpec::Range { min: 16, max: 24 },
        duration_state_s: 10.0,
        ccep_segments: 3,
        ccep_duration_s: 2.0,
        raw_rate_hz: 4000.0,
        seed: 7,
        ..Default::default()
    };
    save_plans(out.as_ref(), &spec, &plan_cohort(&spec)?)?;

    let cohort = CohortReader::open(out.as_ref())?;
    for p in &cohort.patients {
        let soz: Vec<usize> = (0..p.labels().len()).filter(|&i| p.labels()[i] == 1).collect();
        println!(
            "patient {}: {} sites, onset sites {:?}, stimulated sites {:?}",
            p.index(),
            p.labels().len(),
            soz,
            p.entry.stim_sites
        );
    }
    let first = &cohort.patients[0];
    for state in State::BEHAVIORAL {
        let rec = first.recording(RecordingId::Behavioral(state))?;
        let rms = sozgraph::dsp::channel_rms(&rec, 0, rec.len());
        let (mut on, mut off) = (Vec::new(), Vec::new());
        for (i, r) in rms.iter().enumerate() {
            if first.labels()[i] == 1 { on.push(*r) } else { off.push(*r) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!("{:>8}: mean RMS onset {:.3}, other {:.3}", state.name(), mean(&on), mean(&off));
    }
    println!("cohort written to {out}");
    Ok(())
}
