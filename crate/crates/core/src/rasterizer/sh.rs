//! Real spherical harmonics up to degree 3, with the basis gradient needed
//! to backpropagate through the view direction.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scene::SH_COEFFS;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of active basis functions at `degree`.
pub fn basis_len(degree: usize) -> usize {
    (degree.min(3) + 1).pow(2)
}

/// Basis values at unit direction `d`; entries past the active degree are 0.
pub fn basis(d: &Vector3<f64>, degree: usize) -> [f64; SH_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    let mut b = [0.0; SH_COEFFS];
    b[0] = SH_C0;
    if degree >= 1 {
        b[1] = -SH_C1 * y;
        b[2] = SH_C1 * z;
        b[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = SH_C2[0] * x * y;
        b[5] = SH_C2[1] * y * z;
        b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        b[7] = SH_C2[3] * x * z;
        b[8] = SH_C2[4] * (xx - yy);
        if degree >= 3 {
            b[9] = SH_C3[0] * y * (3.0 * xx - yy);
            b[10] = SH_C3[1] * x * y * z;
            b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
            b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
            b[14] = SH_C3[5] * z * (xx - yy);
            b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
        }
    }
    b
}

/// Partial derivatives of each basis function w.r.t. `(x, y, z)`, treating
/// the direction components as independent.
pub fn basis_gradient(d: &Vector3<f64>, degree: usize) -> [[f64; 3]; SH_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    let mut g = [[0.0; 3]; SH_COEFFS];
    if degree >= 1 {
        g[1] = [0.0, -SH_C1, 0.0];
        g[2] = [0.0, 0.0, SH_C1];
        g[3] = [-SH_C1, 0.0, 0.0];
    }
    if degree >= 2 {
        let c = SH_C2;
        g[4] = [c[0] * y, c[0] * x, 0.0];
        g[5] = [0.0, c[1] * z, c[1] * y];
        g[6] = [-2.0 * c[2] * x, -2.0 * c[2] * y, 4.0 * c[2] * z];
        g[7] = [c[3] * z, 0.0, c[3] * x];
        g[8] = [2.0 * c[4] * x, -2.0 * c[4] * y, 0.0];
    }
    if degree >= 3 {
        let c = SH_C3;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        g[9] = [c[0] * 6.0 * x * y, c[0] * (3.0 * xx - 3.0 * yy), 0.0];
        g[10] = [c[1] * y * z, c[1] * x * z, c[1] * x * y];
        g[11] = [
            -2.0 * c[2] * x * y,
            c[2] * (4.0 * zz - xx - 3.0 * yy),
            8.0 * c[2] * y * z,
        ];
        g[12] = [
            -6.0 * c[3] * x * z,
            -6.0 * c[3] * y * z,
            c[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
        ];
        g[13] = [
            c[4] * (4.0 * zz - 3.0 * xx - yy),
            -2.0 * c[4] * x * y,
            8.0 * c[4] * x * z,
        ];
        g[14] = [2.0 * c[5] * x * z, -2.0 * c[5] * y * z, c[5] * (xx - yy)];
        g[15] = [c[6] * (3.0 * xx - 3.0 * yy), -6.0 * c[6] * x * y, 0.0];
    }
    g
}

/// Pre-clamp color `Σ c_k Y_k(d) + 0.5` per channel.
pub fn raw_color(coeffs: &[[f64; 3]; SH_COEFFS], basis: &[f64; SH_COEFFS], degree: usize) -> [f64; 3] {
    let mut rgb = [0.5; 3];
    for k in 0..basis_len(degree) {
        for c in 0..3 {
            rgb[c] += coeffs[k][c] * basis[k];
        }
    }
    rgb
}

/// View-dependent RGB for a unit direction, offset by +0.5 and clamped at 0.
pub fn sh_eval(coeffs: &[[f64; 3]; SH_COEFFS], dir: &Vector3<f64>, active_degree: usize) -> Result<[f64; 3]> {
    if active_degree > 3 {
        return Err(Error::Domain(format!("SH degree {active_degree} exceeds 3")));
    }
    if !((dir.norm() - 1.0).abs() <= 1e-6) {
        return Err(Error::Domain("SH direction must be a unit vector".into()));
    }
    let b = basis(dir, active_degree);
    Ok(raw_color(coeffs, &b, active_degree).map(|v| v.max(0.0)))
}
