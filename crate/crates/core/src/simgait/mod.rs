//! Synthetic gait cohort: per-subject foot trajectories for the four
//! activities and the two sensor modalities derived from them.

mod cohort;
mod sensors;
mod trajectory;

pub use cohort::{
    gen_cohort, generate_field_log, generate_recording, generate_recordings, CohortConfig,
    Recording, RecordingId, MANIFEST_FILE,
};
pub use sensors::{
    synth_field, synth_imu, synth_magnetic, ImuBias, NoiseSpec, EARTH_FIELD, GRAVITY,
};
pub use trajectory::{gen_trajectory, GaitParams, RecordingVariation, TruthTrace, TRUTH_RATE_HZ};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid subject profile: {0}")]
    InvalidProfile(String),
    #[error("invalid activity parameters: {0}")]
    InvalidActivity(String),
    #[error("invalid simulator configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
}

/// Activity classes with their integer labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Activity {
    /// Jogging, label 0.
    J,
    /// Marching on the spot, label 1.
    M,
    /// Walking, label 2.
    W,
    /// Walking with a loaded backpack, label 3.
    WW,
}

impl Activity {
    pub const ALL: [Activity; 4] = [Activity::J, Activity::M, Activity::W, Activity::WW];

    pub fn label(self) -> usize {
        match self {
            Activity::J => 0,
            Activity::M => 1,
            Activity::W => 2,
            Activity::WW => 3,
        }
    }

    pub fn from_label(label: usize) -> Option<Self> {
        Self::ALL.get(label).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Activity::J => "J",
            Activity::M => "M",
            Activity::W => "W",
            Activity::WW => "WW",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Activity {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "J" => Ok(Activity::J),
            "M" => Ok(Activity::M),
            "W" => Ok(Activity::W),
            "WW" => Ok(Activity::WW),
            other => Err(SimError::UnknownActivity(other.to_string())),
        }
    }
}

/// Anthropometric and gait-style parameters of one simulated subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: u32,
    /// Steps per second (both feet).
    pub cadence_hz: f64,
    /// Half the distance one foot advances per stride.
    pub step_length_m: f64,
    pub foot_lift_m: f64,
    /// Fraction of the stride a foot spends on the ground when walking.
    pub stance_fraction: f64,
    pub pitch_amplitude_rad: f64,
    /// Lateral distance between the feet.
    pub stance_width_m: f64,
    /// Waist-to-ground height.
    pub hip_height_m: f64,
    /// Vertical waist oscillation amplitude.
    pub pelvic_bounce_m: f64,
    /// Forward trunk lean of the waist-worn transmitter.
    pub trunk_lean_rad: f64,
    pub noise_seed: u64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(SimError::InvalidProfile(format!(
                    "subject {}: {what}",
                    self.subject_id
                )))
            }
        };
        check(
            (0.5..=4.0).contains(&self.cadence_hz),
            "cadence_hz must lie in [0.5, 4]",
        )?;
        check(
            (0.0..=1.2).contains(&self.step_length_m),
            "step_length_m must lie in [0, 1.2]",
        )?;
        check(
            (0.01..=0.5).contains(&self.foot_lift_m),
            "foot_lift_m must lie in [0.01, 0.5]",
        )?;
        check(
            (0.3..=0.8).contains(&self.stance_fraction),
            "stance_fraction must lie in [0.3, 0.8]",
        )?;
        check(
            (0.3..=1.3).contains(&self.hip_height_m),
            "hip_height_m must lie in [0.3, 1.3]",
        )?;
        check(
            self.pitch_amplitude_rad.abs() < 1.2 && self.trunk_lean_rad.abs() < 0.5,
            "angles out of range",
        )?;
        check(
            self.stance_width_m >= 0.0 && self.pelvic_bounce_m >= 0.0,
            "width and bounce must be non-negative",
        )
    }

    /// Draws a plausible adult subject.
    pub fn sample<R: Rng + ?Sized>(subject_id: u32, rng: &mut R) -> Self {
        Self {
            subject_id,
            cadence_hz: rng.random_range(1.6..2.0),
            step_length_m: rng.random_range(0.55..0.75),
            foot_lift_m: rng.random_range(0.08..0.14),
            stance_fraction: rng.random_range(0.59..0.61),
            pitch_amplitude_rad: rng.random_range(0.35..0.55),
            stance_width_m: rng.random_range(0.16..0.24),
            hip_height_m: rng.random_range(0.85..1.0),
            pelvic_bounce_m: rng.random_range(0.035..0.045),
            trunk_lean_rad: rng.random_range(0.0..0.03),
            noise_seed: rng.random(),
        }
    }
}

/// How a subject's gait responds to carrying the backpack. Each entry is
/// multiplied by `weight_effect`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadResponse {
    /// Fractional step-length reduction.
    pub step: f64,
    /// Fractional foot-lift reduction.
    pub lift: f64,
    /// Fractional cadence reduction.
    pub cadence: f64,
    /// Additive stance-fraction increase.
    pub stance: f64,
    /// Fractional reduction of pelvic bounce.
    pub bounce: f64,
    /// Additive forward trunk lean, radians.
    pub lean: f64,
}

impl Default for LoadResponse {
    fn default() -> Self {
        Self {
            step: 1.0,
            lift: 1.0,
            cadence: 0.3,
            stance: 0.3,
            bounce: 3.0,
            lean: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityParams {
    pub activity: Activity,
    pub duration_s: f64,
    /// Only used for [`Activity::WW`].
    pub weight_effect: f64,
    pub load_response: LoadResponse,
}

pub const DEFAULT_WEIGHT_EFFECT: f64 = 0.07;

impl ActivityParams {
    pub fn new(activity: Activity, duration_s: f64) -> Self {
        Self {
            activity,
            duration_s,
            weight_effect: DEFAULT_WEIGHT_EFFECT,
            load_response: LoadResponse::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(SimError::InvalidActivity(format!(
                "duration {} must be positive",
                self.duration_s
            )));
        }
        if !(0.0..=1.0).contains(&self.weight_effect) {
            return Err(SimError::InvalidActivity(format!(
                "weight_effect {} must lie in [0, 1]",
                self.weight_effect
            )));
        }
        Ok(())
    }
}
