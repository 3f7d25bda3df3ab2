//! Synthetic sEEG cohorts with planted seizure-onset sites and planted
//! connectivity communities.
//!
//! Every patient is a [`PatientPlan`]: labels, community blocks and per-site
//! parameters drawn from the patient's own seed. Recordings are rendered from
//! the plan on demand, so a full-length cohort never has to sit in memory at
//! once; [`generate_cohort`] renders everything for small cohorts and tests.

mod signal;
mod store;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{Recording, State};
use crate::error::{Error, Result};

pub use signal::{evoked_response, stimulus_response};
pub use store::{load_cohort, save_cohort, save_plans, CohortReader, PatientEntry, StoredPatient, COHORT_MAGIC, COHORT_VERSION};

/// Number of planted connectivity blocks per patient.
pub const COMMUNITIES: usize = 4;
/// Interictal recording length; the baseline needs exactly this much.
pub const INTERICTAL_S: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SitesSpec {
    Fixed(usize),
    Range { min: usize, max: usize },
}

impl SitesSpec {
    fn min(self) -> usize {
        match self {
            SitesSpec::Fixed(c) => c,
            SitesSpec::Range { min, .. } => min,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub num_patients: usize,
    pub sites_per_patient: SitesSpec,
    pub soz_fraction: f64,
    pub seed: u64,
    pub duration_state_s: f64,
    pub ccep_segments: usize,
    pub ccep_duration_s: f64,
    pub raw_rate_hz: f64,
    pub coupling_strength: f64,
    pub stim_rate_hz: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            num_patients: 5,
            sites_per_patient: SitesSpec::Fixed(64),
            soz_fraction: 0.25,
            seed: 0,
            duration_state_s: 60.0,
            ccep_segments: 8,
            ccep_duration_s: 6.0,
            raw_rate_hz: 10_000.0,
            coupling_strength: 0.8,
            stim_rate_hz: 1.0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if let SitesSpec::Range { min, max } = self.sites_per_patient {
            if min > max {
                return fail(format!("sites_per_patient range {min}..{max} is empty"));
            }
        }
        let c = self.sites_per_patient.min();
        if c < COMMUNITIES {
            return fail(format!("sites_per_patient must be at least {COMMUNITIES}, got {c}"));
        }
        if !(self.soz_fraction > 0.0 && self.soz_fraction < 1.0) {
            return fail(format!("soz_fraction must lie in (0, 1), got {}", self.soz_fraction));
        }
        if soz_count(self.soz_fraction, c) < 1 || self.soz_fraction * (c as f64) < 1.0 {
            return fail(format!(
                "soz_fraction · sites_per_patient must be at least 1, got {} · {c}",
                self.soz_fraction
            ));
        }
        for (name, v) in [
            ("duration_state_s", self.duration_state_s),
            ("ccep_duration_s", self.ccep_duration_s),
            ("raw_rate_hz", self.raw_rate_hz),
            ("stim_rate_hz", self.stim_rate_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.ccep_segments == 0 {
            return fail("ccep_segments must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.coupling_strength) {
            return fail(format!("coupling_strength must lie in [0, 1], got {}", self.coupling_strength));
        }
        Ok(())
    }

    fn samples(&self, seconds: f64) -> usize {
        (seconds * self.raw_rate_hz).round() as usize
    }
}

/// `round(fraction · c)`, halves rounded away from zero.
pub fn soz_count(fraction: f64, c: usize) -> usize {
    (fraction * c as f64).round() as usize
}

/// Identifies one recording of a patient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingId {
    Behavioral(State),
    Ccep(usize),
    Interictal,
}

impl RecordingId {
    pub fn file_tag(self) -> String {
        match self {
            RecordingId::Behavioral(s) => s.name().to_string(),
            RecordingId::Ccep(q) => format!("ccep_{q:02}"),
            RecordingId::Interictal => "interictal".into(),
        }
    }

    pub fn state(self) -> State {
        match self {
            RecordingId::Behavioral(s) => s,
            RecordingId::Ccep(_) => State::Ccep,
            RecordingId::Interictal => State::Interictal,
        }
    }

    /// Distinct random stream per recording; channels are added on top.
    fn stream(self) -> u64 {
        let (kind, k) = match self {
            RecordingId::Behavioral(s) => (1u64, s as u64),
            RecordingId::Ccep(q) => (2, q as u64),
            RecordingId::Interictal => (3, 0),
        };
        (kind << 56) | (k << 24)
    }
}

/// Per-site generative parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    /// Oscillation frequency per band (Hz).
    pub osc_hz: [f64; 6],
    /// Oscillation amplitude per band relative to background RMS.
    pub osc_amp: [f64; 6],
    /// Strength of ictal bursts and spikes; zero for non-onset sites.
    pub ictal_gain: f64,
    /// Evoked-response gain when the site's community is stimulated.
    pub evoked_gain: f64,
}

/// Everything needed to render a patient's recordings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientPlan {
    pub index: usize,
    pub seed: u64,
    pub soz_labels: Vec<u8>,
    pub community_assignment: Vec<usize>,
    /// Stimulated site of each CCEP segment.
    pub stim_sites: Vec<usize>,
    pub sites: Vec<SiteParams>,
}

const BASE_OSC_AMP: [f64; 6] = [0.5, 0.4, 0.35, 0.25, 0.15, 0.08];

impl PatientPlan {
    pub fn new(spec: &CohortSpec, index: usize) -> Self {
        let seed = spec.seed ^ index as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = match spec.sites_per_patient {
            SitesSpec::Fixed(c) => c,
            SitesSpec::Range { min, max } => rng.random_range(min..=max),
        };

        // Equal blocks over a random permutation of the sites.
        let mut order: Vec<usize> = (0..c).collect();
        order.shuffle(&mut rng);
        let mut community = vec![0; c];
        for (pos, &site) in order.iter().enumerate() {
            community[site] = pos * COMMUNITIES / c;
        }

        // Onset sites fill one block first, then spill into the next ones.
        let n_soz = soz_count(spec.soz_fraction, c);
        let first = rng.random_range(0..COMMUNITIES);
        let mut candidates = Vec::with_capacity(c);
        for k in 0..COMMUNITIES {
            let block = (first + k) % COMMUNITIES;
            let mut members: Vec<usize> = (0..c).filter(|&s| community[s] == block).collect();
            members.shuffle(&mut rng);
            candidates.extend(members);
        }
        let mut labels = vec![0u8; c];
        for &s in &candidates[..n_soz] {
            labels[s] = 1;
        }

        let sites = (0..c)
            .map(|s| {
                let mut osc_hz = [0.0; 6];
                let mut osc_amp = [0.0; 6];
                for (b, band) in crate::dsp::Band::ALL.iter().enumerate() {
                    let def = band.def();
                    let w = def.hi_hz - def.lo_hz;
                    osc_hz[b] = rng.random_range(def.lo_hz + 0.15 * w..def.hi_hz - 0.15 * w);
                    osc_amp[b] = BASE_OSC_AMP[b] * rng.random_range(0.7..1.3);
                }
                let ictal_gain = if labels[s] == 1 { rng.random_range(0.4..1.4) } else { 0.0 };
                SiteParams {
                    osc_hz,
                    osc_amp,
                    ictal_gain,
                    evoked_gain: rng.random_range(0.6..1.0),
                }
            })
            .collect();

        // Cycle stimulation through the blocks so every community is probed.
        let stim_sites = (0..spec.ccep_segments)
            .map(|q| {
                let block = (first + q) % COMMUNITIES;
                let members: Vec<usize> = (0..c).filter(|&s| community[s] == block).collect();
                members[rng.random_range(0..members.len())]
            })
            .collect();

        PatientPlan {
            index,
            seed,
            soz_labels: labels,
            community_assignment: community,
            stim_sites,
            sites,
        }
    }

    pub fn channels(&self) -> usize {
        self.soz_labels.len()
    }

    pub fn recording_ids(spec: &CohortSpec) -> Vec<RecordingId> {
        let mut ids: Vec<RecordingId> = State::BEHAVIORAL.iter().map(|&s| RecordingId::Behavioral(s)).collect();
        ids.extend((0..spec.ccep_segments).map(RecordingId::Ccep));
        ids.push(RecordingId::Interictal);
        ids
    }

    /// Renders one recording at the raw rate.
    pub fn render(&self, spec: &CohortSpec, id: RecordingId) -> Result<Recording> {
        let (seconds, evoked) = match id {
            RecordingId::Behavioral(s) if State::BEHAVIORAL.contains(&s) => (spec.duration_state_s, None),
            RecordingId::Behavioral(s) => {
                return Err(Error::domain(format!("{} is not a behavioural state", s.name())));
            }
            RecordingId::Ccep(q) if q < self.stim_sites.len() => (spec.ccep_duration_s, Some(q)),
            RecordingId::Ccep(q) => {
                return Err(Error::domain(format!("patient {} has no CCEP segment {q}", self.index)));
            }
            RecordingId::Interictal => (INTERICTAL_S, None),
        };
        let n = spec.samples(seconds);
        let state = id.state();
        let evoked = evoked.map(|q| (q, stimulus_response(n, spec.raw_rate_hz, spec.stim_rate_hz)));
        let rows: Vec<Vec<f64>> = (0..self.channels())
            .into_par_iter()
            .map(|ch| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(id.stream() | ch as u64);
                let site = &self.sites[ch];
                let mut x = signal::background(&mut rng, n, spec.raw_rate_hz, site, state);
                signal::add_state_events(&mut rng, &mut x, spec.raw_rate_hz, site, state);
                if let Some((q, response)) = &evoked {
                    let stim = self.stim_sites[*q];
                    if self.community_assignment[ch] == self.community_assignment[stim] {
                        let g = spec.coupling_strength * site.evoked_gain * signal::EVOKED_AMPLITUDE;
                        for (v, r) in x.iter_mut().zip(response) {
                            *v += g * r;
                        }
                    }
                }
                // stored as f32, so render at f32 precision for lossless round trips
                x.into_iter().map(|v| v as f32 as f64).collect::<Vec<f64>>()
            })
            .collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let samples = Array2::from_shape_vec((self.channels(), n), flat).expect("rows have length n");
        Recording::new(samples, spec.raw_rate_hz, Some(state))
    }

    pub fn materialize(&self, spec: &CohortSpec) -> Result<SyntheticPatient> {
        let mut recordings = BTreeMap::new();
        for s in State::BEHAVIORAL {
            recordings.insert(s, self.render(spec, RecordingId::Behavioral(s))?);
        }
        let ccep = (0..spec.ccep_segments)
            .map(|q| self.render(spec, RecordingId::Ccep(q)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticPatient {
            index: self.index,
            recordings,
            ccep,
            baseline_interictal: self.render(spec, RecordingId::Interictal)?,
            soz_labels: self.soz_labels.clone(),
            community_assignment: self.community_assignment.clone(),
            stim_sites: self.stim_sites.clone(),
        })
    }
}

/// A fully rendered patient.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPatient {
    pub index: usize,
    pub recordings: BTreeMap<State, Recording>,
    pub ccep: Vec<Recording>,
    pub baseline_interictal: Recording,
    pub soz_labels: Vec<u8>,
    pub community_assignment: Vec<usize>,
    pub stim_sites: Vec<usize>,
}

impl SyntheticPatient {
    pub fn recording(&self, id: RecordingId) -> Option<&Recording> {
        match id {
            RecordingId::Behavioral(s) => self.recordings.get(&s),
            RecordingId::Ccep(q) => self.ccep.get(q),
            RecordingId::Interictal => Some(&self.baseline_interictal),
        }
    }
}

/// Cohort-level plans; cheap, no signal is rendered.
pub fn plan_cohort(spec: &CohortSpec) -> Result<Vec<PatientPlan>> {
    spec.validate()?;
    Ok((0..spec.num_patients).map(|i| PatientPlan::new(spec, i)).collect())
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticPatient>> {
    plan_cohort(spec)?.iter().map(|p| p.materialize(spec)).collect()
}

/// Source of a patient's recordings: rendered on the fly or read from disk.
pub trait PatientSource: Sync {
    fn index(&self) -> usize;
    fn labels(&self) -> &[u8];
    fn ccep_segments(&self) -> usize;
    fn recording(&self, id: RecordingId) -> Result<Recording>;
}

/// A plan paired with its cohort spec.
#[derive(Clone, Debug)]
pub struct PlannedPatient<'a> {
    pub spec: &'a CohortSpec,
    pub plan: PatientPlan,
}

impl PatientSource for PlannedPatient<'_> {
    fn index(&self) -> usize {
        self.plan.index
    }

    fn labels(&self) -> &[u8] {
        &self.plan.soz_labels
    }

    fn ccep_segments(&self) -> usize {
        self.plan.stim_sites.len()
    }

    fn recording(&self, id: RecordingId) -> Result<Recording> {
        self.plan.render(self.spec, id)
    }
}

impl PatientSource for SyntheticPatient {
    fn index(&self) -> usize {
        self.index
    }

    fn labels(&self) -> &[u8] {
        &self.soz_labels
    }

    fn ccep_segments(&self) -> usize {
        self.ccep.len()
    }

    fn recording(&self, id: RecordingId) -> Result<Recording> {
        SyntheticPatient::recording(self, id)
            .cloned()
            .ok_or_else(|| Error::domain(format!("patient {} has no recording {}", self.index, id.file_tag())))
    }
}

#[cfg(test)]
mod tests;
