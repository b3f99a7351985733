//! Sensor synthesis from a dense truth trace.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{SimError, TruthTrace};
use crate::geom::{quat_mul, rotate_vec, Quaternion, Vec3};
use crate::logs::{FieldRecord, ImuSample, PacketRecord, Payload};
use crate::magmodel::{DipoleModel, HalfSpace, Pose};

/// Gravitational acceleration along the earth `+z` (down) axis.
pub const GRAVITY: f64 = 9.81;
/// Unit geomagnetic field in the north-east-down frame (60 degree dip).
pub const EARTH_FIELD: Vec3 = Vec3::new(0.5, 0.0, 0.866_025_403_784_438_6);

/// Noise and impairment settings for both modalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Timestamp jitter as a fraction of the sample period.
    pub jitter_frac: f64,
    pub p_drop: f64,
    /// Field noise per axis, relative to the field magnitude.
    pub field_rel: f64,
    /// Per-axis rotation-vector noise of reported orientations.
    pub orientation_deg: f64,
    pub accel: f64,
    pub gyro: f64,
    pub magno: f64,
    /// Standard deviations of the per-subject constant offsets.
    pub accel_bias: f64,
    pub gyro_bias: f64,
    pub magno_bias: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            jitter_frac: 0.1,
            p_drop: 0.02,
            field_rel: 2e-3,
            orientation_deg: 0.5,
            accel: 0.05,
            gyro: 0.005,
            magno: 0.005,
            accel_bias: 0.05,
            gyro_bias: 0.002,
            magno_bias: 0.005,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            jitter_frac: 0.0,
            p_drop: 0.0,
            field_rel: 0.0,
            orientation_deg: 0.0,
            accel: 0.0,
            gyro: 0.0,
            magno: 0.0,
            accel_bias: 0.0,
            gyro_bias: 0.0,
            magno_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            self.jitter_frac,
            self.field_rel,
            self.orientation_deg,
            self.accel,
            self.gyro,
            self.magno,
            self.accel_bias,
            self.gyro_bias,
            self.magno_bias,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(SimError::InvalidConfig(
                "noise levels must be finite and non-negative".into(),
            ));
        }
        if self.jitter_frac > 0.4 {
            return Err(SimError::InvalidConfig(
                "jitter_frac must not exceed 0.4".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(SimError::InvalidConfig("p_drop must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Constant per-foot IMU offsets of one subject.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuBias {
    pub gyro: [Vec3; 2],
    pub accel: [Vec3; 2],
    pub magno: [Vec3; 2],
}

fn gauss_vec<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    let mut g = || {
        sigma * {
            let z: f64 = StandardNormal.sample(rng);
            z
        }
    };
    Vec3::new(g(), g(), g())
}

impl ImuBias {
    pub fn sample<R: Rng + ?Sized>(noise: &NoiseSpec, rng: &mut R) -> Self {
        let mut b = ImuBias::default();
        for foot in 0..2 {
            b.gyro[foot] = gauss_vec(rng, noise.gyro_bias);
            b.accel[foot] = gauss_vec(rng, noise.accel_bias);
            b.magno[foot] = gauss_vec(rng, noise.magno_bias);
        }
        b
    }
}

fn check_rate(rate_hz: f64) -> Result<(), SimError> {
    if !(100.0..=1000.0).contains(&rate_hz) {
        return Err(SimError::InvalidConfig(format!(
            "rate {rate_hz} Hz outside [100, 1000]"
        )));
    }
    Ok(())
}

/// Jittered, per-foot sorted sample times covering `[0, duration]`.
fn sample_times<R: Rng + ?Sized>(
    trace: &TruthTrace,
    rate_hz: f64,
    jitter_frac: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = (trace.duration_s * rate_hz).round() as usize;
    let sigma = jitter_frac / rate_hz;
    let (lo, hi) = (trace.t0, trace.end_time());
    let mut times: Vec<f64> = (0..n)
        .map(|k| {
            let jitter = if sigma > 0.0 {
                sigma * {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                }
            } else {
                0.0
            };
            (k as f64 / rate_hz + jitter).clamp(lo, hi)
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times
}

fn merge(mut streams: Vec<PacketRecord>) -> Vec<PacketRecord> {
    // stable, so equal timestamps keep the left foot first
    streams.sort_by(|a, b| a.t.total_cmp(&b.t));
    streams
}

/// Small random rotation with per-axis rotation-vector deviation `sigma`.
fn jitter_rotation<R: Rng + ?Sized>(rng: &mut R, sigma_rad: f64) -> Quaternion {
    let v = gauss_vec(rng, sigma_rad);
    let angle = v.norm();
    if angle == 0.0 {
        Quaternion::IDENTITY
    } else {
        Quaternion::from_axis_angle(v, angle)
    }
}

fn field_noise<R: Rng + ?Sized>(rng: &mut R, b: Vec3, rel: f64) -> Vec3 {
    if rel == 0.0 {
        return b;
    }
    b + gauss_vec(rng, rel * b.norm())
}

/// Tracked foot poses as the transmitter reports them. Field noise is
/// added before inversion; a sample whose noisy field cannot be inverted
/// is lost like a dropped packet.
pub fn synth_magnetic<R: Rng + ?Sized>(
    trace: &TruthTrace,
    model: &DipoleModel,
    noise: &NoiseSpec,
    rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<PacketRecord>, SimError> {
    check_rate(rate_hz)?;
    noise.validate()?;
    let hs = HalfSpace::default();
    let sigma_rot = noise.orientation_deg.to_radians();
    let mut out = Vec::new();
    for foot in 0..2 {
        for t in sample_times(trace, rate_hz, noise.jitter_frac, rng) {
            let truth = trace.foot_pose_at(foot, t);
            let b = model.forward_field(truth.position).map_err(|e| {
                SimError::InvalidConfig(format!("foot outside tracking range at t={t}: {e}"))
            })?;
            let b = field_noise(rng, b, noise.field_rel);
            let q = if sigma_rot > 0.0 {
                quat_mul(truth.orientation, jitter_rotation(rng, sigma_rot))
            } else {
                truth.orientation
            };
            let dropped = noise.p_drop > 0.0 && rng.random::<f64>() < noise.p_drop;
            let Ok(inv) = model.invert_field(b, hs) else {
                continue;
            };
            if dropped {
                continue;
            }
            out.push(PacketRecord {
                t,
                rx_id: foot as u8 + 1,
                payload: Payload::Pose(Pose {
                    position: inv.position,
                    orientation: q,
                }),
            });
        }
    }
    Ok(merge(out))
}

/// Raw field-space packets, as a tracking front end would see them.
pub fn synth_field<R: Rng + ?Sized>(
    trace: &TruthTrace,
    model: &DipoleModel,
    noise: &NoiseSpec,
    rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<FieldRecord>, SimError> {
    check_rate(rate_hz)?;
    noise.validate()?;
    let mut out = Vec::new();
    for foot in 0..2 {
        for t in sample_times(trace, rate_hz, noise.jitter_frac, rng) {
            let truth = trace.foot_pose_at(foot, t);
            let q_tx = trace.waist_orientation_at(t);
            let b_tx = model.forward_field(truth.position).map_err(|e| {
                SimError::InvalidConfig(format!("foot outside tracking range at t={t}: {e}"))
            })?;
            let b_rx = rotate_vec(
                truth.orientation.conjugate(),
                field_noise(rng, b_tx, noise.field_rel),
            );
            let dropped = noise.p_drop > 0.0 && rng.random::<f64>() < noise.p_drop;
            if dropped {
                continue;
            }
            out.push(FieldRecord {
                t,
                rx_id: foot as u8 + 1,
                b_rx,
                q_rx: quat_mul(q_tx, truth.orientation),
                q_tx,
                truth: Some(truth),
            });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Noise-free inertial readings at dense sample `k` (needs `k - 1` and
/// `k + 1`).
fn imu_at(trace: &TruthTrace, foot: usize, k: usize) -> ImuSample {
    let h = 1.0 / trace.rate_hz;
    let (p_prev, q_prev) = trace.foot_earth(foot, k - 1);
    let (p, q) = trace.foot_earth(foot, k);
    let (p_next, q_next) = trace.foot_earth(foot, k + 1);
    let accel_earth = (p_next - p * 2.0 + p_prev) * (1.0 / (h * h));
    let specific = accel_earth - Vec3::new(0.0, 0.0, GRAVITY);
    let q_inv = q.conjugate();
    let align = |o: Quaternion| {
        if o.dot(q) < 0.0 {
            Quaternion::new(-o.w, -o.x, -o.y, -o.z)
        } else {
            o
        }
    };
    let (a, b) = (align(q_prev), align(q_next));
    let dq = Quaternion::new(b.w - a.w, b.x - a.x, b.y - a.y, b.z - a.z);
    let omega = q_inv.mul_raw(dq);
    let s = 2.0 / (2.0 * h);
    ImuSample {
        gyro: Vec3::new(omega.x * s, omega.y * s, omega.z * s),
        accel: rotate_vec(q_inv, specific),
        magno: rotate_vec(q_inv, EARTH_FIELD),
    }
}

fn lerp_sample(a: ImuSample, b: ImuSample, w: f64) -> ImuSample {
    let l = |x: Vec3, y: Vec3| x * (1.0 - w) + y * w;
    ImuSample {
        gyro: l(a.gyro, b.gyro),
        accel: l(a.accel, b.accel),
        magno: l(a.magno, b.magno),
    }
}

/// Foot-mounted gyro, accelerometer and magnetometer packets.
pub fn synth_imu<R: Rng + ?Sized>(
    trace: &TruthTrace,
    noise: &NoiseSpec,
    bias: &ImuBias,
    rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<PacketRecord>, SimError> {
    check_rate(rate_hz)?;
    noise.validate()?;
    if trace.len() < 4 {
        return Err(SimError::InvalidConfig(
            "trace too short for differentiation".into(),
        ));
    }
    let mut out = Vec::new();
    for foot in 0..2 {
        for t in sample_times(trace, rate_hz, noise.jitter_frac, rng) {
            let x = ((t - trace.t0) * trace.rate_hz).clamp(1.0, (trace.len() - 3) as f64);
            let k = x.floor() as usize;
            let clean = lerp_sample(
                imu_at(trace, foot, k),
                imu_at(trace, foot, k + 1),
                x - k as f64,
            );
            let sample = ImuSample {
                gyro: clean.gyro + bias.gyro[foot] + gauss_vec(rng, noise.gyro),
                accel: clean.accel + bias.accel[foot] + gauss_vec(rng, noise.accel),
                magno: clean.magno + bias.magno[foot] + gauss_vec(rng, noise.magno),
            };
            let dropped = noise.p_drop > 0.0 && rng.random::<f64>() < noise.p_drop;
            if dropped {
                continue;
            }
            out.push(PacketRecord {
                t,
                rx_id: foot as u8 + 1,
                payload: Payload::Imu(sample),
            });
        }
    }
    Ok(merge(out))
}
