//! Parametric two-foot gait kinematics.
//!
//! The earth frame is north-east-down with the ground at `z = 0`. Each
//! foot alternates a stance phase (fixed on the ground) with a swing phase
//! that advances one stride along a cycloid and lifts along a raised
//! cosine. The waist moves forward at the mean foot speed, bobs twice per
//! stride and carries the transmitter, so foot positions relative to it
//! trace the familiar sawtooth.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activity, ActivityParams, SimError, SubjectProfile};
use crate::geom::{euler_to_quat, quat_mul, rotate_vec, EulerAngles, Quaternion, Vec3};
use crate::magmodel::Pose;

pub const TRUTH_RATE_HZ: f64 = 1000.0;
/// Extra trace on both ends so jittered sample times stay inside it.
const MARGIN_S: f64 = 0.1;

/// Per-recording randomness: where in the gait cycle the recording
/// starts, which way the subject faces and a small tempo change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordingVariation {
    pub phase: f64,
    pub heading_rad: f64,
    pub tempo_scale: f64,
}

impl Default for RecordingVariation {
    fn default() -> Self {
        Self {
            phase: 0.0,
            heading_rad: 0.0,
            tempo_scale: 1.0,
        }
    }
}

impl RecordingVariation {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            phase: rng.random_range(0.0..1.0),
            heading_rad: rng.random_range(-PI..PI),
            tempo_scale: rng.random_range(0.98..1.02),
        }
    }
}

/// Effective kinematic parameters of one recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub stride_hz: f64,
    /// Distance a foot advances per stride.
    pub stride_m: f64,
    pub lift_m: f64,
    pub stance_fraction: f64,
    pub pitch_amplitude_rad: f64,
    pub width_m: f64,
    pub hip_height_m: f64,
    pub bounce_m: f64,
    pub lean_rad: f64,
}

impl GaitParams {
    pub fn derive(
        profile: &SubjectProfile,
        act: &ActivityParams,
        var: &RecordingVariation,
    ) -> Self {
        let mut g = GaitParams {
            stride_hz: profile.cadence_hz / 2.0 * var.tempo_scale,
            stride_m: 2.0 * profile.step_length_m,
            lift_m: profile.foot_lift_m,
            stance_fraction: profile.stance_fraction,
            pitch_amplitude_rad: profile.pitch_amplitude_rad,
            width_m: profile.stance_width_m,
            hip_height_m: profile.hip_height_m,
            bounce_m: profile.pelvic_bounce_m,
            lean_rad: profile.trunk_lean_rad,
        };
        match act.activity {
            Activity::W => {}
            Activity::WW => {
                let w = act.weight_effect;
                let r = act.load_response;
                g.stride_m *= 1.0 - r.step * w;
                g.lift_m *= 1.0 - r.lift * w;
                g.stride_hz *= 1.0 - r.cadence * w;
                g.stance_fraction = (g.stance_fraction + r.stance * w).min(0.9);
                g.bounce_m *= (1.0 - r.bounce * w).max(0.0);
                g.lean_rad += r.lean * w;
            }
            Activity::J => {
                g.stride_hz *= 2.0;
                g.lift_m *= 2.0;
                g.stride_m *= 1.2;
                g.stance_fraction = 0.35;
                g.pitch_amplitude_rad *= 1.3;
                g.bounce_m *= 1.5;
            }
            Activity::M => {
                g.stride_m = 0.0;
                g.pitch_amplitude_rad *= 0.3;
            }
        }
        g
    }

    pub fn forward_speed(&self) -> f64 {
        self.stride_m * self.stride_hz
    }
}

/// Dense ground truth sampled at [`TRUTH_RATE_HZ`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrace {
    pub t0: f64,
    pub rate_hz: f64,
    /// Waist position in the earth frame.
    pub waist_position: Vec<Vec3>,
    /// Transmitter-to-earth orientation.
    pub waist_orientation: Vec<Quaternion>,
    /// Left (index 0) and right foot poses relative to the transmitter.
    pub feet: [Vec<Pose>; 2],
    pub duration_s: f64,
}

fn cycloid(u: f64) -> f64 {
    u - (TAU * u).sin() / TAU
}

struct FootState {
    along: f64,
    lift: f64,
    pitch: f64,
    roll: f64,
}

fn foot_state(g: &GaitParams, cycles: f64, offset: f64) -> FootState {
    let n = cycles.floor();
    let phase = cycles - n;
    let d = g.stance_fraction;
    // stance of cycle n sits at n strides; swing carries it to n + 1
    let centre = -g.stride_m * (offset - d / 2.0);
    if phase < d {
        FootState {
            along: g.stride_m * n + centre,
            lift: 0.0,
            pitch: 0.0,
            roll: 0.0,
        }
    } else {
        let u = (phase - d) / (1.0 - d);
        FootState {
            along: g.stride_m * (n + cycloid(u)) + centre,
            lift: g.lift_m * 0.5 * (1.0 - (TAU * u).cos()),
            pitch: g.pitch_amplitude_rad * (TAU * u).sin(),
            roll: 0.05 * (TAU * u).sin(),
        }
    }
}

impl TruthTrace {
    pub fn len(&self) -> usize {
        self.waist_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waist_position.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate_hz
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    fn bracket(&self, t: f64) -> (usize, f64) {
        let x = ((t - self.t0) * self.rate_hz).clamp(0.0, (self.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.len() - 2);
        (k, x - k as f64)
    }

    /// Foot pose relative to the transmitter at time `t`, linearly
    /// interpolated (quaternions component-wise, renormalised).
    pub fn foot_pose_at(&self, foot: usize, t: f64) -> Pose {
        let (k, a) = self.bracket(t);
        let (p0, p1) = (self.feet[foot][k], self.feet[foot][k + 1]);
        Pose {
            position: p0.position * (1.0 - a) + p1.position * a,
            orientation: lerp_quat(p0.orientation, p1.orientation, a),
        }
    }

    pub fn waist_orientation_at(&self, t: f64) -> Quaternion {
        let (k, a) = self.bracket(t);
        lerp_quat(self.waist_orientation[k], self.waist_orientation[k + 1], a)
    }

    /// Foot position and orientation in the earth frame at sample `k`.
    pub fn foot_earth(&self, foot: usize, k: usize) -> (Vec3, Quaternion) {
        let q_tx = self.waist_orientation[k];
        let rel = self.feet[foot][k];
        (
            self.waist_position[k] + rotate_vec(q_tx, rel.position),
            quat_mul(q_tx, rel.orientation),
        )
    }
}

pub(crate) fn lerp_quat(a: Quaternion, b: Quaternion, t: f64) -> Quaternion {
    let b = if a.dot(b) < 0.0 {
        Quaternion::new(-b.w, -b.x, -b.y, -b.z)
    } else {
        b
    };
    Quaternion::new(
        a.w + (b.w - a.w) * t,
        a.x + (b.x - a.x) * t,
        a.y + (b.y - a.y) * t,
        a.z + (b.z - a.z) * t,
    )
    .normalize()
}

fn yaw_quat(yaw: f64) -> Quaternion {
    euler_to_quat(EulerAngles {
        yaw,
        pitch: 0.0,
        roll: 0.0,
    })
}

/// Dense two-foot trajectory for one recording.
pub fn gen_trajectory(
    profile: &SubjectProfile,
    act: &ActivityParams,
    var: &RecordingVariation,
) -> Result<TruthTrace, SimError> {
    profile.validate()?;
    act.validate()?;
    let g = GaitParams::derive(profile, act, var);
    let t0 = -MARGIN_S;
    let n = ((act.duration_s + 2.0 * MARGIN_S) * TRUTH_RATE_HZ).round() as usize + 1;
    let heading = yaw_quat(var.heading_rad);
    let speed = g.forward_speed();

    let mut waist_position = Vec::with_capacity(n);
    let mut waist_orientation = Vec::with_capacity(n);
    let mut feet = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for k in 0..n {
        let t = t0 + k as f64 / TRUTH_RATE_HZ;
        let cycles = g.stride_hz * t + var.phase;
        let left_phase = cycles - cycles.floor();
        let d = g.stance_fraction;

        let waist_track = Vec3::new(
            speed * t,
            0.01 * (TAU * left_phase).sin(),
            -g.hip_height_m - g.bounce_m * (TAU * (2.0 * left_phase - d)).cos(),
        );
        let q_tx = quat_mul(
            heading,
            euler_to_quat(EulerAngles {
                yaw: 0.05 * (TAU * left_phase).sin(),
                pitch: -g.lean_rad + 0.01 * (2.0 * TAU * left_phase).sin(),
                roll: 0.03 * (TAU * left_phase).sin(),
            }),
        );
        let p_waist = rotate_vec(heading, waist_track);

        for (foot, (offset, side)) in [(0.0, -1.0), (0.5, 1.0)].into_iter().enumerate() {
            let s = foot_state(&g, cycles + offset, offset + var.phase);
            let foot_track = Vec3::new(s.along, side * g.width_m / 2.0, -s.lift);
            let p_foot = rotate_vec(heading, foot_track);
            let q_foot = quat_mul(
                heading,
                euler_to_quat(EulerAngles {
                    yaw: side * 0.08,
                    pitch: s.pitch,
                    roll: side * s.roll,
                }),
            );
            let q_tx_inv = q_tx.conjugate();
            feet[foot].push(Pose {
                position: rotate_vec(q_tx_inv, p_foot - p_waist),
                orientation: quat_mul(q_tx_inv, q_foot),
            });
        }
        waist_position.push(p_waist);
        waist_orientation.push(q_tx);
    }
    Ok(TruthTrace {
        t0,
        rate_hz: TRUTH_RATE_HZ,
        waist_position,
        waist_orientation,
        feet,
        duration_s: act.duration_s,
    })
}
