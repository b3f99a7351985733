//! Packet logs in, labelled normalised windows out.

mod dataset;
mod filter;

pub use dataset::{
    build_cohort_dataset, build_dataset, read_dataset, read_dataset_file, write_dataset,
    write_dataset_file, Dataset, DatasetMeta, SplitMode, SplitSpec, WindowSample,
};
pub use filter::{filtfilt, magnitude_response, sections, CUTOFF_HZ, ELLIPTIC_SOS, FS_HZ};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{quat_to_euler, Quaternion};
use crate::logs::{Modality, PacketRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("packet {index}: unknown rx_id {rx_id}")]
    UnknownRxId { index: usize, rx_id: u8 },
    #[error("gap of {gap_s:.3} s at t = {at:.3} s exceeds {max_gap_s} s")]
    TooSparse { gap_s: f64, at: f64, max_gap_s: f64 },
    #[error("series of {len} samples is shorter than the {window} sample window")]
    SeriesTooShort { len: usize, window: usize },
    #[error("manifest entry {path} has no activity label")]
    LabelMissing { path: String },
    #[error("invalid preprocessing configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed dataset file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Irregularly timed multichannel samples, row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub t: Vec<f64>,
    pub n_channels: usize,
    pub data: Vec<f64>,
    /// First column of every quaternion `(w, x, y, z)` block.
    pub quat_offsets: Vec<usize>,
}

impl Series {
    pub fn new(n_channels: usize, quat_offsets: Vec<usize>) -> Self {
        Self {
            n_channels,
            quat_offsets,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_channels..(i + 1) * self.n_channels]
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n_channels);
        self.t.push(t);
        self.data.extend_from_slice(row);
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.data[i * self.n_channels + c])
            .collect()
    }
}

/// Uniformly sampled frames, row-major `[n_samples x n_features]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub t0: f64,
    pub rate_hz: f64,
    pub n_features: usize,
    pub data: Vec<f64>,
}

impl FrameSeries {
    pub fn n_samples(&self) -> usize {
        self.data.len() / self.n_features.max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_samples())
            .map(|i| self.data[i * self.n_features + c])
            .collect()
    }

    fn set_column(&mut self, c: usize, v: &[f64]) {
        for (i, x) in v.iter().enumerate() {
            self.data[i * self.n_features + c] = *x;
        }
    }
}

/// Column names of the model input for a modality, left foot first.
pub fn feature_names(modality: Modality) -> Vec<String> {
    let per_foot: &[&str] = match modality {
        Modality::Magnetic => &["x", "y", "z", "yaw", "pitch", "roll"],
        Modality::Imu => &[
            "gyro_x", "gyro_y", "gyro_z", "accel_x", "accel_y", "accel_z", "magno_x", "magno_y",
            "magno_z",
        ],
    };
    ["left", "right"]
        .iter()
        .flat_map(|side| per_foot.iter().map(move |c| format!("{side}_{c}")))
        .collect()
}

/// Column indices of the position and orientation features of the
/// magnetic layout.
pub const POSITION_COLUMNS: [usize; 6] = [0, 1, 2, 6, 7, 8];
pub const ORIENTATION_COLUMNS: [usize; 6] = [3, 4, 5, 9, 10, 11];

/// Splits a merged packet stream into left (`rx_id` 1) and right (2)
/// series, rows unchanged.
pub fn deinterleave(packets: &[PacketRecord]) -> Result<(Series, Series)> {
    let modality = packets
        .first()
        .map(|p| p.payload.modality())
        .unwrap_or(Modality::Magnetic);
    let quats = match modality {
        Modality::Magnetic => vec![3],
        Modality::Imu => vec![],
    };
    let width = modality.packet_channels();
    let mut left = Series::new(width, quats.clone());
    let mut right = Series::new(width, quats);
    for (index, p) in packets.iter().enumerate() {
        if p.payload.modality() != modality {
            return Err(PipelineError::InvalidConfig(format!(
                "packet {index}: mixed modalities"
            )));
        }
        let target = match p.rx_id {
            1 => &mut left,
            2 => &mut right,
            rx_id => return Err(PipelineError::UnknownRxId { index, rx_id }),
        };
        target.push(p.t, &p.payload.channels());
    }
    Ok((left, right))
}

fn flip_quaternion_signs(s: &mut Series) {
    for &q in &s.quat_offsets.clone() {
        for i in 1..s.len() {
            let (prev, cur) = s.data.split_at_mut(i * s.n_channels);
            let a = &prev[(i - 1) * s.n_channels + q..(i - 1) * s.n_channels + q + 4];
            let b = &mut cur[q..q + 4];
            if a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() < 0.0 {
                b.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
}

fn renormalise(row: &mut [f64], quat_offsets: &[usize]) {
    for &q in quat_offsets {
        let n = Quaternion::new(row[q], row[q + 1], row[q + 2], row[q + 3]).norm();
        if n > 0.0 {
            row[q..q + 4].iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Interpolates `series` onto `grid` (ascending, inside the series' time
/// span up to clamping at the ends). Quaternion blocks are made
/// sign-continuous, interpolated component-wise and renormalised.
pub fn fill_gaps(series: &Series, grid: &[f64], max_gap_s: f64) -> Result<Series> {
    if series.len() < 2 {
        return Err(PipelineError::TooSparse {
            gap_s: f64::INFINITY,
            at: series.t.first().copied().unwrap_or(0.0),
            max_gap_s,
        });
    }
    let mut src = series.clone();
    flip_quaternion_signs(&mut src);
    let (first, last) = (src.t[0], src.t[src.len() - 1]);
    if let (Some(&g0), Some(&g1)) = (grid.first(), grid.last()) {
        for (gap, at) in [(first - g0, g0), (g1 - last, last)] {
            if gap > max_gap_s {
                return Err(PipelineError::TooSparse {
                    gap_s: gap,
                    at,
                    max_gap_s,
                });
            }
        }
    }
    for w in src.t.windows(2) {
        if w[1] - w[0] > max_gap_s && grid.iter().any(|&g| g > w[0] && g < w[1]) {
            return Err(PipelineError::TooSparse {
                gap_s: w[1] - w[0],
                at: w[0],
                max_gap_s,
            });
        }
    }
    let c = src.n_channels;
    let mut out = Series::new(c, src.quat_offsets.clone());
    let mut row = vec![0.0; c];
    let mut j = 0;
    for &g in grid {
        while j + 2 < src.len() && src.t[j + 1] < g {
            j += 1;
        }
        let (t0, t1) = (src.t[j], src.t[j + 1]);
        let a = if t1 > t0 {
            ((g - t0) / (t1 - t0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (r0, r1) = (src.row(j), src.row(j + 1));
        for k in 0..c {
            row[k] = r0[k] + (r1[k] - r0[k]) * a;
        }
        renormalise(&mut row, &src.quat_offsets);
        out.push(g, &row);
    }
    Ok(out)
}

/// Sorted union of two timestamp lists, restricted to the interval both
/// cover.
pub fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (Some(&a0), Some(&b0), Some(&a1), Some(&b1)) = (a.first(), b.first(), a.last(), b.last())
    else {
        return Vec::new();
    };
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    let mut g: Vec<f64> = a
        .iter()
        .chain(b)
        .copied()
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Left and right channel blocks side by side on a shared time axis.
pub fn join_feet(left: &Series, right: &Series) -> Series {
    assert_eq!(left.t, right.t, "feet must share a time grid");
    let mut quats = left.quat_offsets.clone();
    quats.extend(right.quat_offsets.iter().map(|q| q + left.n_channels));
    let mut out = Series::new(left.n_channels + right.n_channels, quats);
    for i in 0..left.len() {
        let row: Vec<f64> = left.row(i).iter().chain(right.row(i)).copied().collect();
        out.push(left.t[i], &row);
    }
    out
}

fn median(buf: &mut [f64]) -> f64 {
    buf.sort_by(f64::total_cmp);
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        (buf[n / 2 - 1] + buf[n / 2]) / 2.0
    }
}

/// Per-channel sliding median; near the ends the window shrinks
/// symmetrically so it stays centred.
pub fn median_filter(series: &Series, window: usize) -> Result<Series> {
    if window == 0 || window % 2 == 0 {
        return Err(PipelineError::InvalidConfig(format!(
            "median window {window} must be odd"
        )));
    }
    let half = window / 2;
    let n = series.len();
    let c = series.n_channels;
    let mut out = series.clone();
    let mut buf = Vec::with_capacity(window);
    for i in 0..n {
        let h = half.min(i).min(n - 1 - i);
        for k in 0..c {
            buf.clear();
            buf.extend((i - h..=i + h).map(|j| series.data[j * c + k]));
            out.data[i * c + k] = median(&mut buf);
        }
    }
    Ok(out)
}

/// Linear resampling onto `n_out` evenly spaced points spanning the first
/// to the last timestamp.
pub fn resample(series: &Series, n_out: usize) -> Result<FrameSeries> {
    if series.len() < 2 || n_out < 2 {
        return Err(PipelineError::SeriesTooShort {
            len: series.len().min(n_out),
            window: 2,
        });
    }
    let (t0, t1) = (series.t[0], series.t[series.len() - 1]);
    let step = (t1 - t0) / (n_out - 1) as f64;
    let c = series.n_channels;
    let mut data = Vec::with_capacity(n_out * c);
    let mut j = 0;
    for i in 0..n_out {
        let g = if i == n_out - 1 {
            t1
        } else {
            t0 + step * i as f64
        };
        while j + 2 < series.len() && series.t[j + 1] <= g {
            j += 1;
        }
        let (a0, a1) = (series.t[j], series.t[j + 1]);
        let a = if a1 > a0 {
            ((g - a0) / (a1 - a0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (r0, r1) = (series.row(j), series.row(j + 1));
        for k in 0..c {
            data.push(if a == 0.0 {
                r0[k]
            } else {
                r0[k] + (r1[k] - r0[k]) * a
            });
        }
    }
    Ok(FrameSeries {
        t0,
        rate_hz: 1.0 / step,
        n_features: c,
        data,
    })
}

/// Removes `2 pi` jumps between consecutive samples.
pub fn unwrap_angles(v: &mut [f64]) {
    let tau = 2.0 * std::f64::consts::PI;
    let mut offset = 0.0;
    for i in 1..v.len() {
        let raw_prev = v[i - 1] - offset;
        let d = v[i] - raw_prev;
        offset += -tau * (d / tau).round();
        v[i] += offset;
    }
}

/// Replaces each `(x, y, z, qw, qx, qy, qz)` foot block by
/// `(x, y, z, yaw, pitch, roll)` with yaw unwrapped over time.
pub fn quat_channels_to_euler(frames: &FrameSeries, quat_offsets: &[usize]) -> FrameSeries {
    let c = frames.n_features;
    let out_c = c - quat_offsets.len();
    let n = frames.n_samples();
    let mut data = Vec::with_capacity(n * out_c);
    for i in 0..n {
        let r = frames.row(i);
        let mut k = 0;
        while k < c {
            if quat_offsets.contains(&k) {
                let e = quat_to_euler(Quaternion::new(r[k], r[k + 1], r[k + 2], r[k + 3])).angles;
                data.extend([e.yaw, e.pitch, e.roll]);
                k += 4;
            } else {
                data.push(r[k]);
                k += 1;
            }
        }
    }
    let mut out = FrameSeries {
        t0: frames.t0,
        rate_hz: frames.rate_hz,
        n_features: out_c,
        data,
    };
    // yaw columns in the output layout
    for (shift, &q) in quat_offsets.iter().enumerate() {
        let col = q - shift;
        let mut yaw = out.column(col);
        unwrap_angles(&mut yaw);
        out.set_column(col, &yaw);
    }
    out
}

/// Zero-phase low-pass of every column.
pub fn lowpass(frames: &FrameSeries) -> FrameSeries {
    let mut out = frames.clone();
    for c in 0..frames.n_features {
        out.set_column(c, &filtfilt(&frames.column(c)));
    }
    out
}

/// Slide used for a given window length.
pub fn window_slide(window_len: usize) -> Result<usize> {
    match window_len {
        600 => Ok(300),
        500 => Ok(250),
        other => Err(PipelineError::InvalidConfig(format!(
            "window length {other} must be 600 or 500"
        ))),
    }
}

/// Start offsets of the windows cut from `n` samples.
pub fn window_starts(n: usize, window_len: usize) -> Result<Vec<usize>> {
    let slide = window_slide(window_len)?;
    if n < window_len {
        return Err(PipelineError::SeriesTooShort {
            len: n,
            window: window_len,
        });
    }
    Ok((0..=(n - window_len) / slide).map(|k| k * slide).collect())
}

/// Raw windows, each row-major `[window_len x n_features]`.
pub fn segment(frames: &FrameSeries, window_len: usize) -> Result<Vec<Vec<f64>>> {
    let f = frames.n_features;
    Ok(window_starts(frames.n_samples(), window_len)?
        .into_iter()
        .map(|s| frames.data[s * f..(s + window_len) * f].to_vec())
        .collect())
}

/// Per-column min-max scaling to `[0, 1]`; constant columns become zero.
pub fn normalize(window: &mut [f64], n_features: usize) {
    let n = window.len() / n_features;
    for c in 0..n_features {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let v = window[i * n_features + c];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        for i in 0..n {
            let v = &mut window[i * n_features + c];
            *v = if span > 0.0 {
                ((*v - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub window_len: usize,
    pub median_window: usize,
    pub max_gap_s: f64,
    pub rate_hz: f64,
    pub lowpass_magnetic: bool,
    pub lowpass_imu: bool,
    pub split: SplitSpec,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            window_len: 500,
            median_window: 5,
            max_gap_s: 0.25,
            rate_hz: 300.0,
            lowpass_magnetic: true,
            lowpass_imu: false,
            split: SplitSpec::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        window_slide(self.window_len)?;
        if self.median_window % 2 == 0 {
            return Err(PipelineError::InvalidConfig(
                "median_window must be odd".into(),
            ));
        }
        if !(self.max_gap_s > 0.0) {
            return Err(PipelineError::InvalidConfig(
                "max_gap_s must be positive".into(),
            ));
        }
        if self.rate_hz != FS_HZ {
            return Err(PipelineError::InvalidConfig(format!(
                "rate_hz must be {FS_HZ}; the low-pass coefficients are fixed for it"
            )));
        }
        self.split.validate()
    }
}

/// One recording from packets to uniformly sampled model features.
pub fn process_recording(
    packets: &[PacketRecord],
    duration_s: f64,
    cfg: &PreprocessConfig,
) -> Result<FrameSeries> {
    let modality = packets
        .first()
        .map(|p| p.payload.modality())
        .unwrap_or(Modality::Magnetic);
    let (left, right) = deinterleave(packets)?;
    let grid = union_grid(&left.t, &right.t);
    let joined = join_feet(
        &fill_gaps(&left, &grid, cfg.max_gap_s)?,
        &fill_gaps(&right, &grid, cfg.max_gap_s)?,
    );
    let smoothed = median_filter(&joined, cfg.median_window)?;
    let n_out = (duration_s * cfg.rate_hz).round() as usize;
    let frames = resample(&smoothed, n_out)?;
    let frames = match modality {
        Modality::Magnetic => quat_channels_to_euler(&frames, &joined.quat_offsets),
        Modality::Imu => frames,
    };
    let filtered = match modality {
        Modality::Magnetic => cfg.lowpass_magnetic,
        Modality::Imu => cfg.lowpass_imu,
    };
    Ok(if filtered { lowpass(&frames) } else { frames })
}
