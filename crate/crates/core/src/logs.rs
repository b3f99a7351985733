//! Packet-log, field-log and manifest CSV formats.
//!
//! Floats are written with 17 significant digits so a read-back is exact.
//! Readers report the 1-based line of the first bad row.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Quaternion, Vec3};
use crate::magmodel::Pose;
use crate::simgait::Activity;

pub const MAGNETIC_HEADER: [&str; 9] = ["t", "rx_id", "x", "y", "z", "qw", "qx", "qy", "qz"];
pub const IMU_HEADER: [&str; 11] = [
    "t", "rx_id", "gx", "gy", "gz", "ax", "ay", "az", "mx", "my", "mz",
];
pub const FIELD_HEADER: [&str; 13] = [
    "t", "rx_id", "bx", "by", "bz", "rx_qw", "rx_qx", "rx_qy", "rx_qz", "tx_qw", "tx_qx", "tx_qy",
    "tx_qz",
];
pub const FIELD_TRUTH_HEADER: [&str; 7] = [
    "true_x", "true_y", "true_z", "true_qw", "true_qx", "true_qy", "true_qz",
];
pub const MANIFEST_HEADER: [&str; 7] = [
    "subject_id",
    "activity",
    "modality",
    "recording",
    "path",
    "seed",
    "duration_s",
];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("unrecognised header {0:?}")]
    Header(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LogError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LogError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, LogError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Magnetic,
    Imu,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Magnetic, Modality::Imu];

    pub fn code(self) -> &'static str {
        match self {
            Modality::Magnetic => "magnetic",
            Modality::Imu => "imu",
        }
    }

    /// Raw channels per foot in a packet.
    pub fn packet_channels(self) -> usize {
        match self {
            Modality::Magnetic => 7,
            Modality::Imu => 9,
        }
    }

    fn header(self) -> &'static [&'static str] {
        match self {
            Modality::Magnetic => &MAGNETIC_HEADER,
            Modality::Imu => &IMU_HEADER,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Modality {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "magnetic" => Ok(Modality::Magnetic),
            "imu" => Ok(Modality::Imu),
            other => Err(format!("unknown modality {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Body angular rate, rad/s.
    pub gyro: Vec3,
    /// Specific force, m/s^2.
    pub accel: Vec3,
    /// Earth field in the body frame, unit magnitude.
    pub magno: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Pose(Pose),
    Imu(ImuSample),
}

impl Payload {
    pub fn modality(&self) -> Modality {
        match self {
            Payload::Pose(_) => Modality::Magnetic,
            Payload::Imu(_) => Modality::Imu,
        }
    }

    /// Channel values in packet-log column order.
    pub fn channels(&self) -> Vec<f64> {
        match self {
            Payload::Pose(p) => {
                let mut v = p.position.to_array().to_vec();
                v.extend(p.orientation.to_array());
                v
            }
            Payload::Imu(s) => {
                let mut v = s.gyro.to_array().to_vec();
                v.extend(s.accel.to_array());
                v.extend(s.magno.to_array());
                v
            }
        }
    }

    pub fn from_channels(modality: Modality, c: &[f64]) -> Option<Self> {
        if c.len() != modality.packet_channels() {
            return None;
        }
        let v = |i: usize| Vec3::new(c[i], c[i + 1], c[i + 2]);
        Some(match modality {
            Modality::Magnetic => Payload::Pose(Pose {
                position: v(0),
                orientation: Quaternion::new(c[3], c[4], c[5], c[6]),
            }),
            Modality::Imu => Payload::Imu(ImuSample {
                gyro: v(0),
                accel: v(3),
                magno: v(6),
            }),
        })
    }
}

/// One packet as received by the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub t: f64,
    /// 1 for the left foot, 2 for the right.
    pub rx_id: u8,
    pub payload: Payload,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: u64, col: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| LogError::Parse {
        line,
        msg: format!("column {col}: {s:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(LogError::Parse {
            line,
            msg: format!("column {col}: non-finite value"),
        });
    }
    Ok(v)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(r)
}

fn check_width(rec: &csv::StringRecord, n: usize) -> Result<()> {
    if rec.len() != n {
        return Err(LogError::Parse {
            line: line_of(rec),
            msg: format!("expected {n} fields, found {}", rec.len()),
        });
    }
    Ok(())
}

fn parse_rx(s: &str, line: u64) -> Result<u8> {
    s.trim().parse().map_err(|_| LogError::Parse {
        line,
        msg: format!("column rx_id: {s:?} is not an integer id"),
    })
}

pub fn write_packets<W: Write>(w: W, modality: Modality, packets: &[PacketRecord]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(modality.header())?;
    for p in packets {
        if p.payload.modality() != modality {
            return Err(LogError::Header(format!(
                "{} packet in a {modality} log",
                p.payload.modality()
            )));
        }
        let mut row = vec![fmt_f64(p.t), p.rx_id.to_string()];
        row.extend(p.payload.channels().into_iter().map(fmt_f64));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| LogError::io("<packet log>", e))?;
    Ok(())
}

/// Reads a packet log, detecting the modality from its header. Rx ids
/// are passed through unchecked; de-interleaving validates them.
pub fn read_packets<R: Read>(r: R) -> Result<(Modality, Vec<PacketRecord>)> {
    let mut rd = reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let modality = Modality::ALL
        .into_iter()
        .find(|m| {
            header
                .iter()
                .map(String::as_str)
                .eq(m.header().iter().copied())
        })
        .ok_or_else(|| LogError::Header(header.join(",")))?;
    let cols = modality.header();
    let mut packets = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        check_width(&rec, cols.len())?;
        let t = parse_f64(&rec[0], line, cols[0])?;
        let rx_id = parse_rx(&rec[1], line)?;
        let vals = (2..cols.len())
            .map(|i| parse_f64(&rec[i], line, cols[i]))
            .collect::<Result<Vec<_>>>()?;
        let payload = Payload::from_channels(modality, &vals).expect("width checked");
        packets.push(PacketRecord { t, rx_id, payload });
    }
    Ok((modality, packets))
}

/// Raw field-space packet, the input of the tracking solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub t: f64,
    pub rx_id: u8,
    /// Field in the receiver frame.
    pub b_rx: Vec3,
    pub q_rx: Quaternion,
    pub q_tx: Quaternion,
    /// True receiver pose in the transmitter frame, when known.
    pub truth: Option<Pose>,
}

pub fn write_field_log<W: Write>(w: W, records: &[FieldRecord]) -> Result<()> {
    let with_truth = records.iter().any(|r| r.truth.is_some());
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let mut header: Vec<&str> = FIELD_HEADER.to_vec();
    if with_truth {
        header.extend(FIELD_TRUTH_HEADER);
    }
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![fmt_f64(r.t), r.rx_id.to_string()];
        let mut vals: Vec<f64> = r.b_rx.to_array().to_vec();
        vals.extend(r.q_rx.to_array());
        vals.extend(r.q_tx.to_array());
        if with_truth {
            let p = r
                .truth
                .ok_or_else(|| LogError::Header("truth columns missing on some rows".into()))?;
            vals.extend(p.position.to_array());
            vals.extend(p.orientation.to_array());
        }
        row.extend(vals.into_iter().map(fmt_f64));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| LogError::io("<field log>", e))?;
    Ok(())
}

pub fn read_field_log<R: Read>(r: R) -> Result<Vec<FieldRecord>> {
    let mut rd = reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let base =
        header.len() >= FIELD_HEADER.len() && header.iter().zip(FIELD_HEADER).all(|(a, b)| a == b);
    let with_truth = header.len() == FIELD_HEADER.len() + FIELD_TRUTH_HEADER.len()
        && header[FIELD_HEADER.len()..]
            .iter()
            .zip(FIELD_TRUTH_HEADER)
            .all(|(a, b)| a == b);
    if !base || !(header.len() == FIELD_HEADER.len() || with_truth) {
        return Err(LogError::Header(header.join(",")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        check_width(&rec, header.len())?;
        let t = parse_f64(&rec[0], line, &header[0])?;
        let rx_id = parse_rx(&rec[1], line)?;
        let v = (2..header.len())
            .map(|i| parse_f64(&rec[i], line, &header[i]))
            .collect::<Result<Vec<_>>>()?;
        out.push(FieldRecord {
            t,
            rx_id,
            b_rx: Vec3::new(v[0], v[1], v[2]),
            q_rx: Quaternion::new(v[3], v[4], v[5], v[6]),
            q_tx: Quaternion::new(v[7], v[8], v[9], v[10]),
            truth: with_truth.then(|| Pose {
                position: Vec3::new(v[11], v[12], v[13]),
                orientation: Quaternion::new(v[14], v[15], v[16], v[17]),
            }),
        });
    }
    Ok(out)
}

/// One recording in a cohort manifest. `activity` is optional on disk so
/// that an unlabelled entry can be reported precisely downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: u32,
    pub activity: Option<Activity>,
    pub modality: Modality,
    pub recording: u32,
    /// Relative to the manifest's directory.
    pub path: String,
    pub seed: u64,
    pub duration_s: f64,
}

pub fn write_manifest<W: Write>(w: W, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(MANIFEST_HEADER)?;
    for e in entries {
        out.write_record([
            e.subject_id.to_string(),
            e.activity.map(|a| a.code().to_string()).unwrap_or_default(),
            e.modality.code().to_string(),
            e.recording.to_string(),
            e.path.clone(),
            e.seed.to_string(),
            fmt_f64(e.duration_s),
        ])?;
    }
    out.flush().map_err(|e| LogError::io("<manifest>", e))?;
    Ok(())
}

pub fn read_manifest<R: Read>(r: R) -> Result<Vec<ManifestEntry>> {
    let mut rd = reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if !header.iter().map(String::as_str).eq(MANIFEST_HEADER) {
        return Err(LogError::Header(header.join(",")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        check_width(&rec, MANIFEST_HEADER.len())?;
        let bad = |col: &str, msg: String| LogError::Parse {
            line,
            msg: format!("column {col}: {msg}"),
        };
        let int = |i: usize| -> Result<u64> {
            rec[i].trim().parse().map_err(|_| {
                bad(
                    MANIFEST_HEADER[i],
                    format!("{:?} is not an integer", &rec[i]),
                )
            })
        };
        let activity = match rec[1].trim() {
            "" => None,
            s => Some(
                s.parse()
                    .map_err(|e: crate::simgait::SimError| bad("activity", e.to_string()))?,
            ),
        };
        let subject_id =
            u32::try_from(int(0)?).map_err(|_| bad("subject_id", "out of range".into()))?;
        let recording =
            u32::try_from(int(3)?).map_err(|_| bad("recording", "out of range".into()))?;
        let duration_s = parse_f64(&rec[6], line, "duration_s")?;
        if duration_s <= 0.0 {
            return Err(bad("duration_s", "must be positive".into()));
        }
        out.push(ManifestEntry {
            subject_id,
            activity,
            modality: rec[2].trim().parse().map_err(|e| bad("modality", e))?,
            recording,
            path: rec[4].to_string(),
            seed: int(5)?,
            duration_s,
        });
    }
    Ok(out)
}
