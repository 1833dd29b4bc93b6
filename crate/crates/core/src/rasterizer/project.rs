//! Perspective EWA projection of 3D Gaussians and its reverse pass.
//!
//! Σ = R S² Rᵀ,  Σ_cam = W Σ Wᵀ,  Σ₂D = J Σ_cam Jᵀ + 0.3·I
//! where W is the world-to-camera rotation and J the Jacobian of the
//! perspective map at the camera-space mean.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::geometry::{Camera, PixelCoord, EPS_Z};
use crate::scene::{MaterializedGaussian, SH_COEFFS};

use super::sh;

/// Screen-space low-pass dilation added to every 2D covariance (pixel²).
pub const LOW_PASS: f64 = 0.3;

/// Bounding radius in standard deviations.
pub const RADIUS_SIGMAS: f64 = 3.0;

/// A Gaussian's screen-space footprint.
#[derive(Clone, Debug, PartialEq)]
pub struct SplatProjection {
    pub mean2d: PixelCoord,
    /// Dilated 2D covariance (pixel²).
    pub cov2d: Matrix2<f64>,
    pub camera_depth: f64,
    pub radius_px: f64,
    pub(crate) conic: Matrix2<f64>,
    pub(crate) cam_point: Vector3<f64>,
    pub(crate) jacobian: Matrix2x3<f64>,
    pub(crate) cov_cam: Matrix3<f64>,
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_rotation(q: &[f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Pull back `∂L/∂R` onto the (unit) quaternion components.
pub fn rotation_grad_to_quat(q: &[f64; 4], g: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = *q;
    let gw = 2.0
        * (-z * g[(0, 1)] + y * g[(0, 2)] + z * g[(1, 0)] - x * g[(1, 2)] - y * g[(2, 0)]
            + x * g[(2, 1)]);
    let gx = 2.0
        * (y * g[(0, 1)] + z * g[(0, 2)] + y * g[(1, 0)] - 2.0 * x * g[(1, 1)] - w * g[(1, 2)]
            + z * g[(2, 0)]
            + w * g[(2, 1)]
            - 2.0 * x * g[(2, 2)]);
    let gy = 2.0
        * (-2.0 * y * g[(0, 0)] + x * g[(0, 1)] + w * g[(0, 2)] + x * g[(1, 0)] + z * g[(1, 2)]
            - w * g[(2, 0)]
            + z * g[(2, 1)]
            - 2.0 * y * g[(2, 2)]);
    let gz = 2.0
        * (-2.0 * z * g[(0, 0)] - w * g[(0, 1)] + x * g[(0, 2)] + w * g[(1, 0)]
            - 2.0 * z * g[(1, 1)]
            + y * g[(1, 2)]
            + x * g[(2, 0)]
            + y * g[(2, 1)]);
    [gw, gx, gy, gz]
}

/// World-space covariance `R diag(s²) Rᵀ`.
pub fn covariance_3d(scale: &Vector3<f64>, q: &[f64; 4]) -> Matrix3<f64> {
    let l = quat_to_rotation(q) * Matrix3::from_diagonal(scale);
    l * l.transpose()
}

fn perspective_jacobian(cam: &Camera, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        cam.fx * iz,
        0.0,
        -cam.fx * p.x * iz2,
        0.0,
        cam.fy * iz,
        -cam.fy * p.y * iz2,
    )
}

fn largest_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let mid = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    mid + (half * half + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt()
}

/// Undilated 2D covariance `J W Σ Wᵀ Jᵀ`, or `None` behind the camera.
pub fn screen_covariance(g: &MaterializedGaussian, cam: &Camera) -> Option<(Matrix2<f64>, Vector3<f64>)> {
    let w = cam.world_to_cam_rotation();
    let p = w * (g.mean - cam.center());
    if !(p.z > EPS_Z) {
        return None;
    }
    let j = perspective_jacobian(cam, &p);
    let cov_cam = w * covariance_3d(&g.scale, &g.rotation) * w.transpose();
    Some((j * cov_cam * j.transpose(), p))
}

/// 3σ radius of the undilated screen footprint; used by scale clipping.
pub fn pre_dilation_radius(g: &MaterializedGaussian, cam: &Camera) -> Option<f64> {
    screen_covariance(g, cam).map(|(c, _)| RADIUS_SIGMAS * largest_eigenvalue(&c).max(0.0).sqrt())
}

/// Project a Gaussian, or `None` if it is culled (behind the near plane or
/// its bounding box misses the image).
pub fn project_gaussian(g: &MaterializedGaussian, cam: &Camera) -> Option<SplatProjection> {
    let w = cam.world_to_cam_rotation();
    let p = w * (g.mean - cam.center());
    if !(p.z > EPS_Z) {
        return None;
    }
    let jacobian = perspective_jacobian(cam, &p);
    let cov_cam = w * covariance_3d(&g.scale, &g.rotation) * w.transpose();
    let mut cov2d = jacobian * cov_cam * jacobian.transpose();
    // symmetrize against rounding before dilation
    let off = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
    cov2d[(0, 1)] = off;
    cov2d[(1, 0)] = off;
    cov2d[(0, 0)] += LOW_PASS;
    cov2d[(1, 1)] += LOW_PASS;
    let det = cov2d[(0, 0)] * cov2d[(1, 1)] - off * off;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let conic = Matrix2::new(cov2d[(1, 1)], -off, -off, cov2d[(0, 0)]) / det;
    let radius_px = RADIUS_SIGMAS * largest_eigenvalue(&cov2d).sqrt();
    let mean2d = PixelCoord::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
    if !(mean2d.is_finite() && radius_px.is_finite()) {
        return None;
    }
    if mean2d.u + radius_px < 0.0
        || mean2d.u - radius_px > cam.width as f64
        || mean2d.v + radius_px < 0.0
        || mean2d.v - radius_px > cam.height as f64
    {
        return None;
    }
    Some(SplatProjection {
        mean2d,
        cov2d,
        camera_depth: p.z,
        radius_px,
        conic,
        cam_point: p,
        jacobian,
        cov_cam,
    })
}

/// View-dependent color of a Gaussian seen from `cam`, with the data needed
/// to backpropagate through it.
#[derive(Clone, Debug)]
pub(crate) struct ShadedColor {
    pub rgb: [f64; 3],
    /// Channel was clamped at zero.
    pub clamped: [bool; 3],
    pub dir: Vector3<f64>,
    pub dist: f64,
    pub basis: [f64; SH_COEFFS],
}

pub(crate) fn shade(g: &MaterializedGaussian, cam: &Camera, degree: usize) -> ShadedColor {
    let v = g.mean - cam.center();
    let dist = v.norm();
    let dir = if dist > 0.0 { v / dist } else { Vector3::z() };
    let basis = sh::basis(&dir, degree);
    let raw = sh::raw_color(&g.sh, &basis, degree);
    ShadedColor {
        rgb: raw.map(|c| c.max(0.0)),
        clamped: raw.map(|c| c < 0.0),
        dir,
        dist,
        basis,
    }
}

/// Adjoints of one Gaussian w.r.t. its activated attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGrad {
    /// ∂L/∂mean (world), all paths combined.
    pub mean: Vector3<f64>,
    /// ∂L/∂scale (not log-scale).
    pub scale: Vector3<f64>,
    /// ∂L/∂(unit quaternion).
    pub rotation: [f64; 4],
    /// ∂L/∂opacity (activated).
    pub opacity: f64,
    pub sh: [[f64; 3]; SH_COEFFS],
    /// ∂L/∂(camera-space mean), before mapping to world space.
    pub cam_point: Vector3<f64>,
    /// ∂L/∂(mean − camera center) through the SH view direction.
    pub view_vec: Vector3<f64>,
    /// ∂L/∂Σ_cam, the camera-frame 3D covariance.
    pub cov_cam: Matrix3<f64>,
}

impl GaussianGrad {
    pub fn zero() -> Self {
        Self {
            mean: Vector3::zeros(),
            scale: Vector3::zeros(),
            rotation: [0.0; 4],
            opacity: 0.0,
            sh: [[0.0; 3]; SH_COEFFS],
            cam_point: Vector3::zeros(),
            view_vec: Vector3::zeros(),
            cov_cam: Matrix3::zeros(),
        }
    }
}

/// Screen-space adjoints accumulated over all pixels a Gaussian touched.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct SplatAdjoint {
    pub mean2d: Vector2<f64>,
    /// ∂L/∂conic as a full (symmetric) 2×2 matrix.
    pub conic: Matrix2<f64>,
    pub opacity: f64,
    pub color: [f64; 3],
    pub depth: f64,
}

impl SplatAdjoint {
    pub fn add(&mut self, o: &SplatAdjoint) {
        self.mean2d += o.mean2d;
        self.conic += o.conic;
        self.opacity += o.opacity;
        for c in 0..3 {
            self.color[c] += o.color[c];
        }
        self.depth += o.depth;
    }
}

/// Reverse of projection and shading for one Gaussian.
pub(crate) fn backward_gaussian(
    g: &MaterializedGaussian,
    cam: &Camera,
    proj: &SplatProjection,
    shaded: &ShadedColor,
    degree: usize,
    adj: &SplatAdjoint,
) -> GaussianGrad {
    let mut out = GaussianGrad::zero();
    out.opacity = adj.opacity;

    // color → SH coefficients and view direction
    let mut g_dir = Vector3::zeros();
    let basis_grad = sh::basis_gradient(&shaded.dir, degree);
    for c in 0..3 {
        if shaded.clamped[c] || adj.color[c] == 0.0 {
            continue;
        }
        for k in 0..sh::basis_len(degree) {
            out.sh[k][c] = adj.color[c] * shaded.basis[k];
            for a in 0..3 {
                g_dir[a] += adj.color[c] * g.sh[k][c] * basis_grad[k][a];
            }
        }
    }
    if shaded.dist > 0.0 {
        out.view_vec = (g_dir - shaded.dir * shaded.dir.dot(&g_dir)) / shaded.dist;
    }

    // conic → Σ₂D → (Σ_cam, J)
    let q = &proj.conic;
    let g_cov2d = -(q * adj.conic * q);
    let j = &proj.jacobian;
    let g_cov_cam = j.transpose() * g_cov2d * j;
    out.cov_cam = g_cov_cam;
    let g_j = 2.0 * g_cov2d * j * proj.cov_cam;

    // camera-space mean: screen position, Jacobian, direct depth
    let p = &proj.cam_point;
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let mut g_p = j.transpose() * adj.mean2d;
    g_p.x += g_j[(0, 2)] * (-cam.fx * iz2);
    g_p.y += g_j[(1, 2)] * (-cam.fy * iz2);
    g_p.z += g_j[(0, 0)] * (-cam.fx * iz2)
        + g_j[(0, 2)] * (2.0 * cam.fx * p.x * iz3)
        + g_j[(1, 1)] * (-cam.fy * iz2)
        + g_j[(1, 2)] * (2.0 * cam.fy * p.y * iz3);
    g_p.z += adj.depth;
    out.cam_point = g_p;

    let w = cam.world_to_cam_rotation();
    out.mean = w.transpose() * g_p + out.view_vec;

    // Σ_cam = W Σ Wᵀ, Σ = L Lᵀ with L = R S
    let g_sigma = w.transpose() * g_cov_cam * w;
    let g_sigma = 0.5 * (g_sigma + g_sigma.transpose());
    let r = quat_to_rotation(&g.rotation);
    let l = r * Matrix3::from_diagonal(&g.scale);
    let g_l = 2.0 * g_sigma * l;
    let mut g_r = Matrix3::zeros();
    for col in 0..3 {
        let s = g.scale[col];
        let mut acc = 0.0;
        for row in 0..3 {
            g_r[(row, col)] = g_l[(row, col)] * s;
            acc += g_l[(row, col)] * r[(row, col)];
        }
        out.scale[col] = acc;
    }
    out.rotation = rotation_grad_to_quat(&g.rotation, &g_r);
    out
}
