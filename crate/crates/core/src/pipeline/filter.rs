//! Fixed elliptic low-pass (fs = 300 Hz, fc = 15 Hz) applied forward and
//! backward.
//!
//! Design: order 4, 0.2 dB passband ripple, 41 dB stopband attenuation,
//! as second-order sections `[b0, b1, b2, a0, a1, a2]`. The raw design has
//! its DC gain at the bottom of the ripple band; [`sections`] rescales it
//! to exactly one so a constant passes unchanged.

pub const FS_HZ: f64 = 300.0;
pub const CUTOFF_HZ: f64 = 15.0;

pub const ELLIPTIC_SOS: [[f64; 6]; 2] = [
    [
        0.011261580240416645,
        -0.007533151189559475,
        0.011261580240416647,
        1.0,
        -1.6462672093636486,
        0.6959969543766618,
    ],
    [
        1.0,
        -1.6474907458182522,
        1.0,
        1.0,
        -1.7858091055373795,
        0.8945408090764776,
    ],
];

fn section_dc_gain(s: &[f64; 6]) -> f64 {
    (s[0] + s[1] + s[2]) / (s[3] + s[4] + s[5])
}

/// Sections with `a0 = 1` and unity overall DC gain.
pub fn sections() -> [[f64; 6]; 2] {
    let mut sos = ELLIPTIC_SOS;
    for s in sos.iter_mut() {
        let a0 = s[3];
        for v in s.iter_mut() {
            *v /= a0;
        }
    }
    let dc: f64 = sos.iter().map(section_dc_gain).product();
    for v in &mut sos[0][..3] {
        *v /= dc;
    }
    sos
}

/// Single-pass gain at `freq_hz`.
pub fn magnitude_response(freq_hz: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / FS_HZ;
    let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
    sections()
        .iter()
        .map(|s| {
            let num =
                ((s[0] + s[1] * c1 + s[2] * c2).powi(2) + (s[1] * s1 + s[2] * s2).powi(2)).sqrt();
            let den =
                ((1.0 + s[4] * c1 + s[5] * c2).powi(2) + (s[4] * s1 + s[5] * s2).powi(2)).sqrt();
            num / den
        })
        .product()
}

/// Causal cascade, transposed direct form II, starting from the steady
/// state of a constant input equal to `x[0]`.
fn sosfilt_steady(sos: &[[f64; 6]; 2], x: &mut [f64]) {
    let Some(&x0) = x.first() else { return };
    let mut level = x0;
    for s in sos {
        let g = section_dc_gain(s);
        let mut z2 = (s[2] - s[5] * g) * level;
        let mut z1 = (s[1] + s[2] - (s[4] + s[5]) * g) * level;
        for v in x.iter_mut() {
            let xin = *v;
            let y = s[0] * xin + z1;
            z1 = s[1] * xin - s[4] * y + z2;
            z2 = s[2] * xin - s[5] * y;
            *v = y;
        }
        level *= g;
    }
}

/// Padding length of the odd extension around the signal.
const PADLEN: usize = 15;

/// Zero-phase filtering with odd-extension padding at both ends.
pub fn filtfilt(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = PADLEN.min(n - 1);
    let sos = sections();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    sosfilt_steady(&sos, &mut ext);
    ext.reverse();
    sosfilt_steady(&sos, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}
