//! Dataset assembly, splitting and the binary container.
//!
//! Container layout (all integers little-endian):
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `GMDS` |
//! | 4 | u32 format version, currently 1 |
//! | 1 | modality: 0 magnetic, 1 imu |
//! | 4 | u32 window length |
//! | 4 | u32 features per sample |
//! | 1 | split mode: 0 by window, 1 by subject |
//! | 12 | u32 train, validation and test percentages |
//! | 8 | u64 shuffle seed |
//! | 8 | u64 number of windows |
//!
//! followed by each window: u8 split (0 train, 1 validation, 2 test), u8
//! label, u32 subject id, u32 recording index, u32 start offset, then
//! `window_len * n_features` f64 values row-major. Windows appear in split
//! order, train first, each split in its shuffled order.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    normalize, process_recording, segment, window_starts, PipelineError, PreprocessConfig, Result,
};
use crate::logs::{LogError, ManifestEntry, Modality, PacketRecord};
use crate::simgait::{generate_recording, CohortConfig, RecordingId};

const MAGIC: &[u8; 4] = b"GMDS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 46;
const WINDOW_HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Windows of all subjects pooled, then shuffled.
    ByWindow,
    /// Whole subjects assigned to each split.
    BySubject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: u32,
    pub val: u32,
    pub test: u32,
    pub shuffle_seed: u64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 80,
            val: 10,
            test: 10,
            shuffle_seed: 0,
            mode: SplitMode::ByWindow,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train + self.val + self.test != 100 || self.train == 0 {
            return Err(PipelineError::InvalidConfig(format!(
                "split {}:{}:{} must sum to 100 with a non-empty training share",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Validation and test sizes for `n` items, rounded down.
    fn sizes(&self, n: usize) -> (usize, usize) {
        (n * self.val as usize / 100, n * self.test as usize / 100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    /// Row-major `[window_len x n_features]`, each column in `[0, 1]`.
    pub data: Vec<f64>,
    pub label: usize,
    pub subject_id: u32,
    pub recording: u32,
    /// First sample of the window within its recording.
    pub offset: u32,
}

impl WindowSample {
    fn key(&self) -> (u32, usize, u32, u32) {
        (self.subject_id, self.label, self.recording, self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub modality: Modality,
    pub window_len: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub split: SplitSpec,
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &WindowSample> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn count_per_label(&self, n_classes: usize) -> Vec<usize> {
        let mut c = vec![0; n_classes];
        for w in self.all() {
            if w.label < n_classes {
                c[w.label] += 1;
            }
        }
        c
    }

    /// Same windows restricted to the given feature columns, in order.
    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        if cols.is_empty() {
            return Err(PipelineError::InvalidConfig(
                "feature subset is empty".into(),
            ));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.meta.n_features) {
            return Err(PipelineError::InvalidConfig(format!(
                "feature column {c} out of range for {} features",
                self.meta.n_features
            )));
        }
        let f = self.meta.n_features;
        let pick = |ws: &[WindowSample]| -> Vec<WindowSample> {
            ws.iter()
                .map(|w| WindowSample {
                    data: w
                        .data
                        .chunks(f)
                        .flat_map(|row| cols.iter().map(move |&c| row[c]))
                        .collect(),
                    ..w.clone()
                })
                .collect()
        };
        Ok(Dataset {
            meta: DatasetMeta {
                n_features: cols.len(),
                ..self.meta
            },
            split: self.split,
            train: pick(&self.train),
            val: pick(&self.val),
            test: pick(&self.test),
        })
    }

    pub fn subjects(&self) -> BTreeSet<u32> {
        self.all().map(|w| w.subject_id).collect()
    }
}

fn split_windows(mut windows: Vec<WindowSample>, spec: &SplitSpec) -> [Vec<WindowSample>; 3] {
    windows.sort_by_key(WindowSample::key);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.shuffle_seed);
    match spec.mode {
        SplitMode::ByWindow => {
            windows.shuffle(&mut rng);
            let (n_val, n_test) = spec.sizes(windows.len());
            let test = windows.split_off(windows.len() - n_test);
            let val = windows.split_off(windows.len() - n_val);
            [windows, val, test]
        }
        SplitMode::BySubject => {
            let mut subjects: Vec<u32> = windows
                .iter()
                .map(|w| w.subject_id)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            subjects.shuffle(&mut rng);
            let (mut n_val, mut n_test) = spec.sizes(subjects.len());
            if subjects.len() >= 3 {
                n_val = n_val.max((spec.val > 0) as usize);
                n_test = n_test.max((spec.test > 0) as usize);
            }
            let n_train = subjects.len() - n_val - n_test;
            let which = |s: u32| {
                let pos = subjects
                    .iter()
                    .position(|&x| x == s)
                    .expect("known subject");
                if pos < n_train {
                    0
                } else if pos < n_train + n_val {
                    1
                } else {
                    2
                }
            };
            windows.shuffle(&mut rng);
            let mut out = [Vec::new(), Vec::new(), Vec::new()];
            for w in windows {
                out[which(w.subject_id)].push(w);
            }
            out
        }
    }
}

/// Runs every manifest entry of `modality` through the pipeline, windows,
/// normalises and splits the result. `load` supplies each entry's packets,
/// from disk or from memory.
pub fn build_dataset<F>(
    manifest: &[ManifestEntry],
    modality: Modality,
    cfg: &PreprocessConfig,
    mut load: F,
) -> crate::Result<Dataset>
where
    F: FnMut(&ManifestEntry) -> crate::Result<Vec<PacketRecord>>,
{
    cfg.validate()?;
    let mut entries: Vec<&ManifestEntry> =
        manifest.iter().filter(|e| e.modality == modality).collect();
    entries.sort_by(|a, b| {
        (a.subject_id, a.activity, a.recording, &a.path).cmp(&(
            b.subject_id,
            b.activity,
            b.recording,
            &b.path,
        ))
    });
    let mut windows = Vec::new();
    let mut n_features = None;
    for e in entries {
        let label = e
            .activity
            .ok_or_else(|| PipelineError::LabelMissing {
                path: e.path.clone(),
            })?
            .label();
        let packets = load(e)?;
        let frames = process_recording(&packets, e.duration_s, cfg)?;
        let f = frames.n_features;
        n_features = Some(f);
        let starts = window_starts(frames.n_samples(), cfg.window_len)?;
        for (data, start) in segment(&frames, cfg.window_len)?.into_iter().zip(starts) {
            let mut data = data;
            normalize(&mut data, f);
            windows.push(WindowSample {
                data,
                label,
                subject_id: e.subject_id,
                recording: e.recording,
                offset: start as u32,
            });
        }
    }
    let n_features = n_features.unwrap_or_else(|| super::feature_names(modality).len());
    let [train, val, test] = split_windows(windows, &cfg.split);
    Ok(Dataset {
        meta: DatasetMeta {
            modality,
            window_len: cfg.window_len,
            n_features,
        },
        split: cfg.split,
        train,
        val,
        test,
    })
}

/// Dataset of one modality generated straight from a simulated cohort,
/// without touching the filesystem.
pub fn build_cohort_dataset(
    cohort: &CohortConfig,
    modality: Modality,
    cfg: &PreprocessConfig,
) -> crate::Result<Dataset> {
    cohort.validate()?;
    build_dataset(&cohort.manifest(), modality, cfg, |e| {
        let activity = e.activity.ok_or_else(|| PipelineError::LabelMissing {
            path: e.path.clone(),
        })?;
        let id = RecordingId {
            subject_id: e.subject_id,
            activity,
            index: e.recording,
        };
        Ok(generate_recording(cohort, id, e.modality)?.packets)
    })
}

pub fn write_dataset(ds: &Dataset) -> Vec<u8> {
    let per = ds.meta.window_len * ds.meta.n_features;
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (WINDOW_HEADER_LEN + per * 8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match ds.meta.modality {
        Modality::Magnetic => 0,
        Modality::Imu => 1,
    });
    out.extend_from_slice(&(ds.meta.window_len as u32).to_le_bytes());
    out.extend_from_slice(&(ds.meta.n_features as u32).to_le_bytes());
    out.push(match ds.split.mode {
        SplitMode::ByWindow => 0,
        SplitMode::BySubject => 1,
    });
    for v in [ds.split.train, ds.split.val, ds.split.test] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&ds.split.shuffle_seed.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for (tag, part) in [(0u8, &ds.train), (1, &ds.val), (2, &ds.test)] {
        for w in part.iter() {
            out.push(tag);
            out.push(w.label as u8);
            out.extend_from_slice(&w.subject_id.to_le_bytes());
            out.extend_from_slice(&w.recording.to_le_bytes());
            out.extend_from_slice(&w.offset.to_le_bytes());
            for v in &w.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                PipelineError::Format(format!("truncated at byte {} (wanted {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn read_dataset(bytes: &[u8]) -> Result<Dataset> {
    let bad = |m: String| PipelineError::Format(m);
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let modality = match c.u8()? {
        0 => Modality::Magnetic,
        1 => Modality::Imu,
        m => return Err(bad(format!("unknown modality tag {m}"))),
    };
    let window_len = c.u32()? as usize;
    let n_features = c.u32()? as usize;
    if window_len == 0 || n_features == 0 {
        return Err(bad("empty window shape".into()));
    }
    let mode = match c.u8()? {
        0 => SplitMode::ByWindow,
        1 => SplitMode::BySubject,
        m => return Err(bad(format!("unknown split mode {m}"))),
    };
    let split = SplitSpec {
        train: c.u32()?,
        val: c.u32()?,
        test: c.u32()?,
        shuffle_seed: c.u64()?,
        mode,
    };
    split.validate().map_err(|e| bad(e.to_string()))?;
    let n = c.u64()?;
    let per = window_len
        .checked_mul(n_features)
        .filter(|p| *p <= usize::MAX / 8 - WINDOW_HEADER_LEN)
        .ok_or_else(|| bad("window shape overflows".into()))?;
    let rec_len = WINDOW_HEADER_LEN + per * 8;
    if (n as u128) * (rec_len as u128) != c.remaining() as u128 {
        return Err(bad(format!(
            "{n} windows of {rec_len} bytes do not match {} remaining bytes",
            c.remaining()
        )));
    }
    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    let mut last_tag = 0;
    for _ in 0..n {
        let tag = c.u8()? as usize;
        if tag > 2 || tag < last_tag {
            return Err(bad(format!("split tag {tag} out of order")));
        }
        last_tag = tag;
        let label = c.u8()? as usize;
        let subject_id = c.u32()?;
        let recording = c.u32()?;
        let offset = c.u32()?;
        let data: Vec<f64> = c
            .take(per * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite sample value".into()));
        }
        parts[tag].push(WindowSample {
            data,
            label,
            subject_id,
            recording,
            offset,
        });
    }
    let [train, val, test] = parts;
    Ok(Dataset {
        meta: DatasetMeta {
            modality,
            window_len,
            n_features,
        },
        split,
        train,
        val,
        test,
    })
}

pub fn write_dataset_file(ds: &Dataset, path: &Path) -> crate::Result<()> {
    fs::write(path, write_dataset(ds)).map_err(|e| LogError::io(path, e))?;
    Ok(())
}

pub fn read_dataset_file(path: &Path) -> crate::Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| LogError::io(path, e))?;
    Ok(read_dataset(&bytes)?)
}
