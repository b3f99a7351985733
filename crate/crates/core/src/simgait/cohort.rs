//! Whole-cohort generation: one profile per subject, a fixed number of
//! recordings per activity and modality, and a manifest.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    gen_trajectory, synth_field, synth_imu, synth_magnetic, Activity, ActivityParams, ImuBias,
    LoadResponse, NoiseSpec, RecordingVariation, SimError, SubjectProfile, TruthTrace,
    DEFAULT_WEIGHT_EFFECT,
};
use crate::logs::{
    write_manifest, write_packets, FieldRecord, LogError, ManifestEntry, Modality, PacketRecord,
};
use crate::magmodel::{DipoleModel, DipoleParams, TrackingRange};
use crate::seeds::{derive_seed, stream, tag};
use crate::Error;

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_subjects: u32,
    pub master_seed: u64,
    pub recordings_per_activity: u32,
    pub duration_s: f64,
    /// Per-receiver packet rate.
    pub rate_hz: f64,
    pub activities: Vec<Activity>,
    pub modalities: Vec<Modality>,
    pub weight_effect: f64,
    pub load_response: LoadResponse,
    pub noise: NoiseSpec,
    pub dipole: DipoleParams,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_subjects: 12,
            master_seed: 7,
            recordings_per_activity: 6,
            duration_s: 10.0,
            rate_hz: 300.0,
            activities: Activity::ALL.to_vec(),
            modalities: Modality::ALL.to_vec(),
            weight_effect: DEFAULT_WEIGHT_EFFECT,
            load_response: LoadResponse::default(),
            noise: NoiseSpec::default(),
            dipole: DipoleParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordingId {
    pub subject_id: u32,
    pub activity: Activity,
    pub index: u32,
}

impl RecordingId {
    fn path(&self) -> [u64; 3] {
        [
            self.subject_id as u64,
            self.activity.label() as u64,
            self.index as u64,
        ]
    }

    pub fn file_name(&self, modality: Modality) -> String {
        format!(
            "{}/s{:02}_{}_r{}.csv",
            modality.code(),
            self.subject_id,
            self.activity,
            self.index
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: RecordingId,
    pub modality: Modality,
    /// Seed of the recording's trajectory stream.
    pub seed: u64,
    pub duration_s: f64,
    pub packets: Vec<PacketRecord>,
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.n_subjects < 1 {
            return bad("n_subjects must be at least 1");
        }
        if self.recordings_per_activity < 1 {
            return bad("recordings_per_activity must be at least 1");
        }
        if self.activities.is_empty() || self.modalities.is_empty() {
            return bad("activities and modalities must not be empty");
        }
        if !(100.0..=1000.0).contains(&self.rate_hz) {
            return bad("rate_hz must lie in [100, 1000]");
        }
        self.noise.validate()?;
        self.activity_params(Activity::WW).validate()?;
        DipoleModel::new(self.dipole, TrackingRange::default())
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn activity_params(&self, activity: Activity) -> ActivityParams {
        ActivityParams {
            activity,
            duration_s: self.duration_s,
            weight_effect: self.weight_effect,
            load_response: self.load_response,
        }
    }

    pub fn profile(&self, subject_id: u32) -> SubjectProfile {
        SubjectProfile::sample(
            subject_id,
            &mut stream(self.master_seed, &[tag::PROFILE, subject_id as u64]),
        )
    }

    /// Recordings in canonical order: subject, activity, index, modality.
    pub fn recording_ids(&self) -> Vec<(RecordingId, Modality)> {
        let mut activities = self.activities.clone();
        activities.sort();
        activities.dedup();
        let mut modalities = self.modalities.clone();
        modalities.sort();
        modalities.dedup();
        let mut out = Vec::new();
        for subject_id in 1..=self.n_subjects {
            for &activity in &activities {
                for index in 0..self.recordings_per_activity {
                    for &m in &modalities {
                        out.push((
                            RecordingId {
                                subject_id,
                                activity,
                                index,
                            },
                            m,
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn trace_seed(&self, id: &RecordingId) -> u64 {
        let p = id.path();
        derive_seed(self.master_seed, &[tag::TRACE, p[0], p[1], p[2]])
    }

    /// Ground truth shared by both modalities of a recording.
    pub fn truth(&self, id: &RecordingId) -> Result<TruthTrace, SimError> {
        let profile = self.profile(id.subject_id);
        let p = id.path();
        let var = RecordingVariation::sample(&mut stream(
            self.master_seed,
            &[tag::TRACE, p[0], p[1], p[2]],
        ));
        gen_trajectory(&profile, &self.activity_params(id.activity), &var)
    }

    pub fn dipole_model(&self) -> Result<DipoleModel, SimError> {
        DipoleModel::new(self.dipole, TrackingRange::default())
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

/// Synthesises one recording of one modality.
pub fn generate_recording(
    cfg: &CohortConfig,
    id: RecordingId,
    modality: Modality,
) -> Result<Recording, SimError> {
    let trace = cfg.truth(&id)?;
    let p = id.path();
    let packets = match modality {
        Modality::Magnetic => {
            let mut rng = stream(cfg.master_seed, &[tag::MAGNETIC, p[0], p[1], p[2]]);
            synth_magnetic(
                &trace,
                &cfg.dipole_model()?,
                &cfg.noise,
                cfg.rate_hz,
                &mut rng,
            )?
        }
        Modality::Imu => {
            let bias = ImuBias::sample(
                &cfg.noise,
                &mut stream(cfg.master_seed, &[tag::IMU_BIAS, p[0]]),
            );
            let mut rng = stream(cfg.master_seed, &[tag::IMU, p[0], p[1], p[2]]);
            synth_imu(&trace, &cfg.noise, &bias, cfg.rate_hz, &mut rng)?
        }
    };
    Ok(Recording {
        id,
        modality,
        seed: cfg.trace_seed(&id),
        duration_s: cfg.duration_s,
        packets,
    })
}

/// Field-space packets for one recording, for exercising the tracker.
pub fn generate_field_log(
    cfg: &CohortConfig,
    id: RecordingId,
) -> Result<Vec<FieldRecord>, SimError> {
    let trace = cfg.truth(&id)?;
    let p = id.path();
    let mut rng = stream(cfg.master_seed, &[tag::FIELD, p[0], p[1], p[2]]);
    synth_field(
        &trace,
        &cfg.dipole_model()?,
        &cfg.noise,
        cfg.rate_hz,
        &mut rng,
    )
}

/// Every recording of the cohort, in canonical order, held in memory.
pub fn generate_recordings(cfg: &CohortConfig) -> Result<Vec<Recording>, SimError> {
    cfg.validate()?;
    cfg.recording_ids()
        .into_iter()
        .map(|(id, m)| generate_recording(cfg, id, m))
        .collect()
}

impl CohortConfig {
    pub fn manifest_entry(&self, id: RecordingId, modality: Modality) -> ManifestEntry {
        ManifestEntry {
            subject_id: id.subject_id,
            activity: Some(id.activity),
            modality,
            recording: id.index,
            path: id.file_name(modality),
            seed: self.trace_seed(&id),
            duration_s: self.duration_s,
        }
    }

    /// Manifest of the whole cohort without generating any data.
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.recording_ids()
            .into_iter()
            .map(|(id, m)| self.manifest_entry(id, m))
            .collect()
    }
}

/// Writes packet logs under `out_dir/<modality>/` plus `out_dir/manifest.csv`
/// and returns the manifest entries.
pub fn gen_cohort(cfg: &CohortConfig, out_dir: &Path) -> Result<Vec<ManifestEntry>, Error> {
    cfg.validate()?;
    let mut entries = Vec::new();
    for (id, modality) in cfg.recording_ids() {
        let rec = generate_recording(cfg, id, modality)?;
        let entry = cfg.manifest_entry(id, modality);
        let path = out_dir.join(&entry.path);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| LogError::io(dir, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| LogError::io(&path, e))?;
        write_packets(BufWriter::new(file), modality, &rec.packets)
            .map_err(|e| with_path(e, &path))?;
        entries.push(entry);
    }
    let path = out_dir.join(MANIFEST_FILE);
    let file = fs::File::create(&path).map_err(|e| LogError::io(&path, e))?;
    write_manifest(BufWriter::new(file), &entries).map_err(|e| with_path(e, &path))?;
    Ok(entries)
}

fn with_path(e: LogError, path: &Path) -> LogError {
    match e {
        LogError::Io { source, .. } => LogError::io(path, source),
        LogError::Csv(c) => LogError::io(path, std::io::Error::other(c.to_string())),
        other => other,
    }
}
