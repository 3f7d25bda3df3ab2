//! Band-power features of one rendered patient: notch, low-pass, band-pass
//! filter bank and Morlet power, pooled to a fixed number of bins.

use sozgraph::dsp::{Band, PreprocessConfig, State};
use sozgraph::harness::preprocess_patient;
use sozgraph::synth::{CohortSpec, PatientPlan, PlannedPatient, SitesSpec};

fn main() -> sozgraph::Result<()> {
    let spec = CohortSpec {
        num_patients: 1,
        sites_per_patient: SitesSpec::Fixed(24),
        duration_state_s: 12.0,
        raw_rate_hz: 4000.0,
        seed: 3,
        ..Default::default()
    };
    let patient = PlannedPatient { spec: &spec, plan: PatientPlan::new(&spec, 0) };
    let pp = PreprocessConfig { feat_len: 32, zscore: false, ..Default::default() };
    let t = preprocess_patient(&patient, &pp)?;
    println!("tensor [site, state, band, bin] = {:?}", t.data.shape());

    let labels = &t.labels;
    for (s, state) in State::BEHAVIORAL.iter().enumerate() {
        let row: Vec<String> = Band::ALL
            .iter()
            .enumerate()
            .map(|(b, band)| {
                let mean = |class: u8| {
                    let sites: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
                    let total: f64 = sites.iter().map(|&i| t.data.slice(ndarray::s![i, s, b, ..]).mean().unwrap()).sum();
                    total / sites.len() as f64
                };
                format!("{} {:.2}", band.name(), mean(1) / mean(0))
            })
            .collect();
        println!("{:>8} onset/other power: {}", state.name(), row.join(", "));
    }
    Ok(())
}
