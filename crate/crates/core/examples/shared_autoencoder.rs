//! Train one attention-gated autoencoder on the pooled band-power vectors of
//! several patients, then encode each patient into latents.

use sozgraph::dsp::PreprocessConfig;
use sozgraph::harness::{encode_latents, preprocess_patient};
use sozgraph::satae::{train_shared, AttentionPlacement, SataeConfig};
use sozgraph::synth::{plan_cohort, CohortSpec, PlannedPatient, SitesSpec};

fn main() -> sozgraph::Result<()> {
    let spec = CohortSpec {
        num_patients: 3,
        sites_per_patient: SitesSpec::Fixed(16),
        duration_state_s: 10.0,
        raw_rate_hz: 4000.0,
        ..Default::default()
    };
    let pp = PreprocessConfig { feat_len: 32, ..Default::default() };
    let features = plan_cohort(&spec)?
        .into_iter()
        .map(|plan| preprocess_patient(&PlannedPatient { spec: &spec, plan }, &pp))
        .collect::<sozgraph::Result<Vec<_>>>()?;

    for placement in [AttentionPlacement::None, AttentionPlacement::Encoder] {
        let cfg = SataeConfig { attention_placement: placement, epochs: 10, ..SataeConfig::scaled(32, 8) };
        let (model, history) = train_shared(&features, &cfg, 0)?;
        let losses: Vec<String> = history.epoch_loss.iter().step_by(3).map(|l| format!("{l:.4}")).collect();
        println!("attention {placement:?}: reconstruction MSE by epoch {}", losses.join(" → "));
        let latents = encode_latents(&model, &features)?;
        println!("  latents of patient 0: {:?}", latents[0].data.shape());
    }
    Ok(())
}
