//! Cohort directory layout:
//!
//! ```text
//! cohort.json                       magic, version, spec, patient index
//! patient_000_wake.f32  (+ .json)   C × T little-endian f32, row-major
//! patient_000_ccep_00.f32 (+ .json)
//! patient_000_interictal.f32 (+ .json)
//! ```

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{CohortSpec, PatientPlan, PatientSource, RecordingId, SyntheticPatient};
use crate::dsp::{Recording, State};
use crate::error::{Error, Result};
use crate::io;

pub const COHORT_MAGIC: &str = "SOZGRAPH-COHORT";
pub const COHORT_VERSION: u32 = 1;
const RECORDING_MAGIC: &str = "SOZGRAPH-REC";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientEntry {
    pub index: usize,
    pub channels: usize,
    pub soz_labels: Vec<u8>,
    pub community_assignment: Vec<usize>,
    pub stim_sites: Vec<usize>,
    pub recordings: Vec<RecordingId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CohortFile {
    magic: String,
    version: u32,
    spec: CohortSpec,
    patients: Vec<PatientEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RecordingSidecar {
    magic: String,
    version: u32,
    patient: usize,
    recording: RecordingId,
    shape: [usize; 2],
    rate_hz: f64,
    state: State,
    labels: Vec<u8>,
    dtype: String,
}

fn recording_paths(dir: &Path, patient: usize, id: RecordingId) -> (PathBuf, PathBuf) {
    let stem = format!("patient_{patient:03}_{}", id.file_tag());
    (dir.join(format!("{stem}.f32")), dir.join(format!("{stem}.json")))
}

fn write_recording(dir: &Path, patient: usize, id: RecordingId, labels: &[u8], rec: &Recording) -> Result<()> {
    let (bin, side) = recording_paths(dir, patient, id);
    io::write_f32(&bin, rec.samples.iter().copied())?;
    io::write_json(
        &side,
        &RecordingSidecar {
            magic: RECORDING_MAGIC.into(),
            version: COHORT_VERSION,
            patient,
            recording: id,
            shape: [rec.channels(), rec.len()],
            rate_hz: rec.rate_hz,
            state: id.state(),
            labels: labels.to_vec(),
            dtype: "f32le".into(),
        },
    )
}

fn check_header(path: &Path, magic: &str, expected_magic: &str, version: u32) -> Result<()> {
    if magic != expected_magic {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {expected_magic:?}"),
        });
    }
    if version != COHORT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: COHORT_VERSION,
        });
    }
    Ok(())
}

fn read_recording(dir: &Path, patient: usize, id: RecordingId) -> Result<Recording> {
    let (bin, side_path) = recording_paths(dir, patient, id);
    let side: RecordingSidecar = io::read_json(&side_path)?;
    check_header(&side_path, &side.magic, RECORDING_MAGIC, side.version)?;
    let [c, t] = side.shape;
    let values = io::read_f32(&bin, c * t)?;
    let samples = Array2::from_shape_vec((c, t), values).expect("length checked");
    Recording::new(samples, side.rate_hz, Some(side.state))
}

fn write_index(dir: &Path, spec: &CohortSpec, patients: Vec<PatientEntry>) -> Result<()> {
    io::write_json(
        &dir.join("cohort.json"),
        &CohortFile {
            magic: COHORT_MAGIC.into(),
            version: COHORT_VERSION,
            spec: spec.clone(),
            patients,
        },
    )
}

/// Writes fully rendered patients.
pub fn save_cohort(dir: &Path, spec: &CohortSpec, patients: &[SyntheticPatient]) -> Result<()> {
    io::create_dir(dir)?;
    let mut entries = Vec::with_capacity(patients.len());
    for p in patients {
        let mut ids = Vec::new();
        for (&s, rec) in &p.recordings {
            ids.push(RecordingId::Behavioral(s));
            write_recording(dir, p.index, RecordingId::Behavioral(s), &p.soz_labels, rec)?;
        }
        for (q, rec) in p.ccep.iter().enumerate() {
            ids.push(RecordingId::Ccep(q));
            write_recording(dir, p.index, RecordingId::Ccep(q), &p.soz_labels, rec)?;
        }
        ids.push(RecordingId::Interictal);
        write_recording(dir, p.index, RecordingId::Interictal, &p.soz_labels, &p.baseline_interictal)?;
        entries.push(PatientEntry {
            index: p.index,
            channels: p.soz_labels.len(),
            soz_labels: p.soz_labels.clone(),
            community_assignment: p.community_assignment.clone(),
            stim_sites: p.stim_sites.clone(),
            recordings: ids,
        });
    }
    write_index(dir, spec, entries)
}

/// Renders and writes plans one recording at a time.
pub fn save_plans(dir: &Path, spec: &CohortSpec, plans: &[PatientPlan]) -> Result<()> {
    io::create_dir(dir)?;
    let ids = PatientPlan::recording_ids(spec);
    let mut entries = Vec::with_capacity(plans.len());
    for plan in plans {
        for &id in &ids {
            let rec = plan.render(spec, id)?;
            write_recording(dir, plan.index, id, &plan.soz_labels, &rec)?;
        }
        entries.push(PatientEntry {
            index: plan.index,
            channels: plan.channels(),
            soz_labels: plan.soz_labels.clone(),
            community_assignment: plan.community_assignment.clone(),
            stim_sites: plan.stim_sites.clone(),
            recordings: ids.clone(),
        });
    }
    write_index(dir, spec, entries)
}

/// Lazily reads a cohort directory.
#[derive(Clone, Debug)]
pub struct CohortReader {
    pub dir: PathBuf,
    pub spec: CohortSpec,
    pub patients: Vec<StoredPatient>,
}

/// One patient of a cohort directory; recordings are read on request.
#[derive(Clone, Debug)]
pub struct StoredPatient {
    pub dir: PathBuf,
    pub entry: PatientEntry,
}

impl CohortReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("cohort.json");
        if !path.exists() {
            return Err(Error::Dependency { stage: "synth", path });
        }
        let file: CohortFile = io::read_json(&path)?;
        check_header(&path, &file.magic, COHORT_MAGIC, file.version)?;
        for p in &file.patients {
            if p.soz_labels.len() != p.channels || p.community_assignment.len() != p.channels {
                return Err(Error::Parse {
                    path: path.clone(),
                    offset: 0,
                    msg: format!("patient {} index disagrees with its channel count", p.index),
                });
            }
        }
        Ok(CohortReader {
            dir: dir.to_path_buf(),
            spec: file.spec,
            patients: file
                .patients
                .into_iter()
                .map(|entry| StoredPatient {
                    dir: dir.to_path_buf(),
                    entry,
                })
                .collect(),
        })
    }
}

impl PatientSource for StoredPatient {
    fn index(&self) -> usize {
        self.entry.index
    }

    fn labels(&self) -> &[u8] {
        &self.entry.soz_labels
    }

    fn ccep_segments(&self) -> usize {
        self.entry.stim_sites.len()
    }

    fn recording(&self, id: RecordingId) -> Result<Recording> {
        let rec = read_recording(&self.dir, self.entry.index, id)?;
        if rec.channels() != self.entry.channels {
            let (_, side) = recording_paths(&self.dir, self.entry.index, id);
            return Err(Error::Parse {
                path: side,
                offset: 0,
                msg: format!("{} channels, cohort index says {}", rec.channels(), self.entry.channels),
            });
        }
        Ok(rec)
    }
}

/// Reads a whole cohort into memory. Any malformed file fails the load.
pub fn load_cohort(dir: &Path) -> Result<(CohortSpec, Vec<SyntheticPatient>)> {
    let reader = CohortReader::open(dir)?;
    let mut out = Vec::with_capacity(reader.patients.len());
    for p in &reader.patients {
        let mut patient = SyntheticPatient {
            index: p.entry.index,
            recordings: Default::default(),
            ccep: Vec::new(),
            baseline_interictal: Recording::new(Array2::zeros((0, 1)), 1.0, None)?,
            soz_labels: p.entry.soz_labels.clone(),
            community_assignment: p.entry.community_assignment.clone(),
            stim_sites: p.entry.stim_sites.clone(),
        };
        for &id in &p.entry.recordings {
            let rec = p.recording(id)?;
            match id {
                RecordingId::Behavioral(s) => {
                    patient.recordings.insert(s, rec);
                }
                RecordingId::Ccep(_) => patient.ccep.push(rec),
                RecordingId::Interictal => patient.baseline_interictal = rec,
            }
        }
        out.push(patient);
    }
    Ok((reader.spec, out))
}
