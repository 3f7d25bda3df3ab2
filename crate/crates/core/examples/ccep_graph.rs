//! Connectivity graph from evoked responses: paired t-test against the
//! interictal baseline, Benjamini-Hochberg masking, Pearson correlation and
//! thresholding, averaged over stimulation segments.

use sozgraph::connstats::GraphConfig;
use sozgraph::dsp::PreprocessConfig;
use sozgraph::harness::build_graph;
use sozgraph::synth::{CohortSpec, PatientPlan, PlannedPatient, SitesSpec};

fn main() -> sozgraph::Result<()> {
    for coupling in [0.0, 0.8] {
        let spec = CohortSpec {
            num_patients: 1,
            sites_per_patient: SitesSpec::Fixed(32),
            ccep_segments: 6,
            coupling_strength: coupling,
            seed: 11,
            ..Default::default()
        };
        let plan = PatientPlan::new(&spec, 0);
        let communities = plan.community_assignment.clone();
        let patient = PlannedPatient { spec: &spec, plan };
        let g = build_graph(&patient, &GraphConfig::default(), &PreprocessConfig::default(), None)?;
        let a = &g.adjacency.a;
        let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..a.nrows() {
            for j in 0..a.nrows() {
                if i == j {
                    continue;
                }
                let edge = f64::from(u8::from(a[[i, j]] != 0.0));
                if communities[i] == communities[j] {
                    intra += edge;
                    n_intra += 1.0;
                } else {
                    inter += edge;
                    n_inter += 1.0;
                }
            }
        }
        println!(
            "coupling {coupling}: density {:.3}, within-community edge rate {:.3}, across {:.3}",
            g.adjacency.density(),
            intra / n_intra,
            inter / n_inter
        );
    }
    Ok(())
}
