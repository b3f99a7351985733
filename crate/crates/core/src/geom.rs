//! Vectors, unit quaternions and yaw-pitch-roll angles.
//!
//! Quaternions are Hamilton (`w + xi + yj + zk`) and act on vectors as
//! active rotations, `v' = q v q*`. Euler angles follow the intrinsic
//! Z-Y-X sequence: `q = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub(crate) fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (angle / 2.0).sin_cos();
        Quaternion::new(c, a.x * s, a.y * s, a.z * s).normalize()
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Unit quaternion with `w >= 0`.
    pub fn normalize(self) -> Self {
        let n = self.norm();
        let s = if self.w < 0.0 { -1.0 / n } else { 1.0 / n };
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product without renormalisation.
    pub(crate) fn mul_raw(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Rotation angle in `[0, pi]` between two orientations. Uses atan2 of
    /// the difference rotation so small angles keep full precision.
    pub fn angle_to(self, o: Quaternion) -> f64 {
        let d = self.conjugate().mul_raw(o);
        2.0 * (d.x * d.x + d.y * d.y + d.z * d.z).sqrt().atan2(d.w.abs())
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, b: Quaternion) -> Quaternion {
        quat_mul(self, b)
    }
}

/// Hamilton product of two unit quaternions, renormalised.
pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a.mul_raw(b).normalize()
}

/// Applies the rotation `q` to `v`.
pub fn rotate_vec(q: Quaternion, v: Vec3) -> Vec3 {
    // v + 2 w (u x v) + 2 u x (u x v), with u the vector part
    let u = Vec3::new(q.x, q.y, q.z);
    let t = u.cross(v) * 2.0;
    v + t * q.w + u.cross(t)
}

/// Rotation taking Rx-frame vectors into the Tx frame, given both
/// module-to-earth orientations: `conj(q_tx) * q_rx`.
pub fn relative_orientation(q_tx: Quaternion, q_rx: Quaternion) -> Quaternion {
    quat_mul(q_tx.conjugate(), q_rx)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Result of converting a quaternion to Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConversion {
    pub angles: EulerAngles,
    /// Pitch within 1e-6 of +-pi/2; roll was set to zero and the whole
    /// heading folded into yaw.
    pub gimbal_lock: bool,
}

const GIMBAL_EPS: f64 = 1e-6;

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

pub fn quat_to_euler(q: Quaternion) -> EulerConversion {
    let q = q.normalize();
    let sin_pitch = (2.0 * (q.w * q.y - q.z * q.x)).clamp(-1.0, 1.0);
    let pitch = sin_pitch.asin();
    if FRAC_PI_2 - pitch.abs() < GIMBAL_EPS {
        // with roll = 0, q = Rz(yaw) Ry(+-pi/2) has (w, z) proportional to
        // (cos(yaw/2), sin(yaw/2))
        let yaw = 2.0 * q.z.atan2(q.w);
        let pitch = FRAC_PI_2.copysign(pitch);
        return EulerConversion {
            angles: EulerAngles {
                yaw: wrap_angle(yaw),
                pitch,
                roll: 0.0,
            },
            gimbal_lock: true,
        };
    }
    let yaw = (2.0 * (q.w * q.z + q.x * q.y)).atan2(1.0 - 2.0 * (q.y * q.y + q.z * q.z));
    let roll = (2.0 * (q.w * q.x + q.y * q.z)).atan2(1.0 - 2.0 * (q.x * q.x + q.y * q.y));
    EulerConversion {
        angles: EulerAngles {
            yaw: wrap_angle(yaw),
            pitch,
            roll: wrap_angle(roll),
        },
        gimbal_lock: false,
    }
}

pub fn euler_to_quat(e: EulerAngles) -> Quaternion {
    let (sy, cy) = (e.yaw / 2.0).sin_cos();
    let (sp, cp) = (e.pitch / 2.0).sin_cos();
    let (sr, cr) = (e.roll / 2.0).sin_cos();
    Quaternion::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
    .normalize()
}
