//! Point-dipole field of the transmitter coil and its closed-form
//! inversion.
//!
//! The transmitter sits at the origin of its own frame with its moment
//! along +z. For a receiver at `p = (x, y, z)`, `r = |p|`:
//!
//! ```text
//! Bx = 3 M x z / (4 pi r^5)
//! By = 3 M y z / (4 pi r^5)
//! Bz = 2 M (2 z^2 - x^2 - y^2) / (4 pi r^5)
//! ```
//!
//! The field is even in `p`, so every measurement has two solutions
//! `+-p`; a [`HalfSpace`] picks one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{relative_orientation, rotate_vec, Quaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagError {
    #[error("position norm {norm} m is below the model's minimum range {r_min} m")]
    DegeneratePosition { norm: f64, r_min: f64 },
    #[error("field magnitude {magnitude} outside the tracking envelope [{min}, {max}]")]
    OutOfRange { magnitude: f64, min: f64, max: f64 },
    #[error("invalid dipole configuration: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipoleParams {
    pub moment: f64,
}

impl Default for DipoleParams {
    fn default() -> Self {
        Self { moment: 1.0 }
    }
}

/// Radial envelope in which positions are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingRange {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for TrackingRange {
    fn default() -> Self {
        Self {
            r_min: 0.05,
            r_max: 1.5,
        }
    }
}

/// Side of the transmitter the receiver is known to be on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    normal: Vec3,
}

impl Default for HalfSpace {
    fn default() -> Self {
        Self {
            normal: Vec3::new(0.0, 0.0, 1.0),
        }
    }
}

impl HalfSpace {
    pub fn new(normal: Vec3) -> Result<Self, MagError> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(MagError::InvalidParams(
                "half-space normal must be non-zero".into(),
            ));
        }
        Ok(Self {
            normal: normal * (1.0 / n),
        })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.dot(self.normal) >= 0.0
    }
}

/// Field sample from one receiver with both module orientations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub t: f64,
    /// Field in the receiver frame.
    pub b_rx: Vec3,
    /// Receiver-to-earth orientation.
    pub q_rx: Quaternion,
    /// Transmitter-to-earth orientation.
    pub q_tx: Quaternion,
}

/// Receiver pose in the transmitter frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub position: Vec3,
    /// The field had no transverse component, so the azimuth is
    /// unobservable; the point returned lies in the x-z plane.
    pub azimuth_ambiguous: bool,
    pub polish_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    pub pose: Pose,
    pub azimuth_ambiguous: bool,
}

/// Dipole field at `p` with no range checks.
pub fn dipole_field(p: Vec3, moment: f64) -> Vec3 {
    let r2 = p.dot(p);
    let r = r2.sqrt();
    let k = moment / (4.0 * PI * r2 * r2 * r);
    Vec3::new(
        3.0 * k * p.x * p.z,
        3.0 * k * p.y * p.z,
        2.0 * k * (2.0 * p.z * p.z - p.x * p.x - p.y * p.y),
    )
}

/// `d field / d p` as rows `[dB/dx, dB/dy, dB/dz]` per field component.
fn dipole_jacobian(p: Vec3, moment: f64) -> [[f64; 3]; 3] {
    let k = moment / (4.0 * PI);
    let (x, y, z) = (p.x, p.y, p.z);
    let r2 = p.dot(p);
    let r5 = r2 * r2 * r2.sqrt();
    let r7 = r5 * r2;
    let q = 2.0 * z * z - x * x - y * y;
    [
        [
            3.0 * k * z * (1.0 / r5 - 5.0 * x * x / r7),
            -15.0 * k * x * y * z / r7,
            3.0 * k * x * (1.0 / r5 - 5.0 * z * z / r7),
        ],
        [
            -15.0 * k * x * y * z / r7,
            3.0 * k * z * (1.0 / r5 - 5.0 * y * y / r7),
            3.0 * k * y * (1.0 / r5 - 5.0 * z * z / r7),
        ],
        [
            2.0 * k * (-2.0 * x / r5 - 5.0 * q * x / r7),
            2.0 * k * (-2.0 * y / r5 - 5.0 * q * y / r7),
            2.0 * k * (4.0 * z / r5 - 5.0 * q * z / r7),
        ],
    ]
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Rotates the receiver-frame field into the transmitter frame.
pub fn resolve_frame(m: &Measurement) -> Vec3 {
    rotate_vec(relative_orientation(m.q_tx, m.q_rx), m.b_rx)
}

const MAX_POLISH: usize = 5;

/// Dipole model bound to a moment and a tracking envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleModel {
    params: DipoleParams,
    range: TrackingRange,
}

impl Default for DipoleModel {
    fn default() -> Self {
        Self {
            params: DipoleParams::default(),
            range: TrackingRange::default(),
        }
    }
}

impl DipoleModel {
    pub fn new(params: DipoleParams, range: TrackingRange) -> Result<Self, MagError> {
        if !(params.moment > 0.0) || !params.moment.is_finite() {
            return Err(MagError::InvalidParams(format!(
                "moment {} must be positive",
                params.moment
            )));
        }
        if !(range.r_min > 0.0) || !(range.r_max > range.r_min) || !range.r_max.is_finite() {
            return Err(MagError::InvalidParams(format!(
                "range [{}, {}] must satisfy 0 < r_min < r_max",
                range.r_min, range.r_max
            )));
        }
        Ok(Self { params, range })
    }

    pub fn params(&self) -> DipoleParams {
        self.params
    }

    pub fn range(&self) -> TrackingRange {
        self.range
    }

    /// Field magnitudes reachable inside the tracking range.
    ///
    /// With `c = z / r`, `|B| = M sqrt(27c^4 - 15c^2 + 4) / (4 pi r^3)`; the
    /// polynomial ranges over `[23/12, 16]` for `c^2` in `[0, 1]`.
    pub fn field_bounds(&self) -> (f64, f64) {
        let k = self.params.moment / (4.0 * PI);
        let lo = k * (23.0f64 / 12.0).sqrt() / self.range.r_max.powi(3);
        let hi = k * 4.0 / self.range.r_min.powi(3);
        (lo, hi)
    }

    pub fn forward_field(&self, p: Vec3) -> Result<Vec3, MagError> {
        let norm = p.norm();
        if !(norm >= self.range.r_min) {
            return Err(MagError::DegeneratePosition {
                norm,
                r_min: self.range.r_min,
            });
        }
        Ok(dipole_field(p, self.params.moment))
    }

    /// Recovers the position producing `b_tx` on the side selected by `hs`.
    pub fn invert_field(&self, b_tx: Vec3, hs: HalfSpace) -> Result<Inversion, MagError> {
        let (lo, hi) = self.field_bounds();
        let bn = b_tx.norm();
        // relative slack so boundary points survive rounding
        if !(bn >= lo * (1.0 - 1e-12) && bn <= hi * (1.0 + 1e-12)) {
            return Err(MagError::OutOfRange {
                magnitude: bn,
                min: lo,
                max: hi,
            });
        }
        let m = self.params.moment;

        // cos^2 of the polar angle from g = Bz/|B| = 2(3s - 1)/sqrt(27s^2 - 15s + 4),
        // i.e. the root in [0, 1] of (36 - 27g^2)s^2 - (24 - 15g^2)s + 4(1 - g^2) = 0
        // whose sign of (3s - 1) agrees with g.
        let g = (b_tx.z / bn).clamp(-1.0, 1.0);
        let g2 = g * g;
        let transverse2 = b_tx.x * b_tx.x + b_tx.y * b_tx.y;
        let one_minus_g2 = transverse2 / (bn * bn);
        let root = (32.0 - 23.0 * g2).max(0.0).sqrt();
        let s = if g >= 0.0 {
            (24.0 - 15.0 * g2 + 3.0 * g * root) / (72.0 - 54.0 * g2)
        } else {
            // smaller root via the product of roots, free of cancellation near g = -1
            8.0 * one_minus_g2 / (24.0 - 15.0 * g2 + 3.0 * g.abs() * root)
        }
        .clamp(0.0, 1.0);
        let cos_polar = s.sqrt();
        let sin_polar = (1.0 - s).max(0.0).sqrt();

        let r = (m * (27.0 * s * s - 15.0 * s + 4.0).sqrt() / (4.0 * PI * bn)).cbrt();

        // Bx, By share the factor 3Mz/(4 pi r^5), which is non-negative on the
        // z >= 0 branch built here, so atan2 needs no pi correction.
        let azimuth_ambiguous = b_tx.x == 0.0 && b_tx.y == 0.0;
        let azimuth = if azimuth_ambiguous {
            0.0
        } else {
            b_tx.y.atan2(b_tx.x)
        };
        let rho = r * sin_polar;
        let mut p = Vec3::new(rho * azimuth.cos(), rho * azimuth.sin(), r * cos_polar);

        let mut iterations = 0;
        if !azimuth_ambiguous {
            let mut resid = b_tx - dipole_field(p, m);
            for _ in 0..MAX_POLISH {
                if resid.norm() <= 1e-15 * bn {
                    break;
                }
                let Some(step) = solve3(dipole_jacobian(p, m), resid.to_array()) else {
                    break;
                };
                let step = Vec3::from_array(step);
                let mut accepted = false;
                let mut scale = 1.0;
                for _ in 0..4 {
                    let trial = p + step * scale;
                    let trial_resid = b_tx - dipole_field(trial, m);
                    if trial_resid.norm() < resid.norm() {
                        p = trial;
                        resid = trial_resid;
                        accepted = true;
                        break;
                    }
                    scale *= 0.5;
                }
                iterations += 1;
                if !accepted {
                    break;
                }
            }
        }

        if !hs.contains(p) {
            p = -p;
        }
        Ok(Inversion {
            position: p,
            azimuth_ambiguous,
            polish_iterations: iterations,
        })
    }

    /// Full tracking step: rotate the field into the transmitter frame,
    /// invert it, and attach the relative orientation.
    pub fn track(&self, m: &Measurement, hs: HalfSpace) -> Result<Fix, MagError> {
        let inv = self.invert_field(resolve_frame(m), hs)?;
        Ok(Fix {
            pose: Pose {
                position: inv.position,
                orientation: relative_orientation(m.q_tx, m.q_rx),
            },
            azimuth_ambiguous: inv.azimuth_ambiguous,
        })
    }
}
