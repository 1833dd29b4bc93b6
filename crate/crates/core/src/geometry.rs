//! Pinhole camera model, rigid transforms and the per-pixel viable frustum.
//!
//! Conventions: camera space is right-handed with +z forward, +x right and
//! +y down (image `v` grows downward). Integer pixel `(i, j)` (column, row)
//! has its center at continuous coordinate `(i + 0.5, j + 0.5)`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Default near-plane threshold below which a point counts as behind the
/// camera.
pub const EPS_Z: f64 = 1e-8;

pub type WorldPoint = Vector3<f64>;

/// Continuous image coordinate in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Center of integer pixel `(i, j)`.
    pub fn center_of(i: usize, j: usize) -> Self {
        Self {
            u: i as f64 + 0.5,
            v: j as f64 + 0.5,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Camera at `eye` looking at `target`, with `up` giving the world up
    /// direction (image `v` runs against it).
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::Domain("look_at target coincides with eye".into()));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-12 {
            return Err(Error::Domain("look_at up vector is parallel to view".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Pose::new(rotation, eye)
    }

    /// Orthonormality error `‖RᵀR − I‖∞`.
    pub fn orthonormality_error(&self) -> f64 {
        let e = self.rotation.transpose() * self.rotation - Matrix3::identity();
        e.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::Domain("pose has non-finite entries".into()));
        }
        let err = self.orthonormality_error();
        if err > 1e-9 {
            return Err(Error::Domain(format!(
                "rotation is not orthonormal (error {err:e})"
            )));
        }
        if self.rotation.determinant() <= 0.0 {
            return Err(Error::Domain("rotation has negative determinant".into()));
        }
        Ok(())
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential map from an axis-angle vector to a rotation.
pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = skew(omega);
    let (a, b) = if theta2 < 1e-12 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Right Jacobian of the SO(3) exponential: `Exp(ω + dω) ≈ Exp(ω) Exp(Jr(ω) dω)`.
pub fn so3_right_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = skew(omega);
    let (a, b) = if theta2 < 1e-12 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() - k * a + k * k * b
}

/// Rotation angle of `R` in radians.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

/// Pinhole camera: intrinsics, image size, and camera-to-world pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub cam_to_world: Pose,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        cam_to_world: Pose,
    ) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            cam_to_world,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Domain("focal lengths must be positive".into()));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::Domain("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Domain("image dimensions must be at least 1".into()));
        }
        self.cam_to_world.validate()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.cam_to_world.translation
    }

    /// World-to-camera rotation `W = Rᵀ`.
    pub fn world_to_cam_rotation(&self) -> Matrix3<f64> {
        self.cam_to_world.rotation.transpose()
    }

    pub fn world_to_camera(&self, x: &WorldPoint) -> Vector3<f64> {
        self.cam_to_world.rotation.transpose() * (x - self.cam_to_world.translation)
    }

    /// Same camera rendered at a different resolution; intrinsics scale with
    /// the image so the field of view is unchanged.
    pub fn resized(&self, width: usize, height: usize) -> Camera {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Camera {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            cam_to_world: self.cam_to_world,
        }
    }

    /// Camera-frame point for pixel coordinate `p` at z-depth `depth`.
    pub fn backproject(&self, p: PixelCoord, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (p.u - self.cx) / self.fx * depth,
            (p.v - self.cy) / self.fy * depth,
            depth,
        )
    }
}

/// Inverse projection: pixel coordinate plus z-depth to a world point.
pub fn unproject(p: PixelCoord, depth: f64, cam: &Camera) -> Result<WorldPoint> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::Domain(format!("depth must be positive, got {depth}")));
    }
    if !p.is_finite() {
        return Err(Error::Domain("pixel coordinate is not finite".into()));
    }
    Ok(cam.cam_to_world.apply(&cam.backproject(p, depth)))
}

/// Project a world point; returns the pixel coordinate and camera z-depth.
pub fn project(x: &WorldPoint, cam: &Camera) -> Result<(PixelCoord, f64)> {
    project_with_eps(x, cam, EPS_Z)
}

pub fn project_with_eps(x: &WorldPoint, cam: &Camera, eps_z: f64) -> Result<(PixelCoord, f64)> {
    let xc = cam.world_to_camera(x);
    if !(xc.z > eps_z) {
        return Err(Error::BehindCamera { z: xc.z });
    }
    Ok((
        PixelCoord::new(cam.fx * xc.x / xc.z + cam.cx, cam.fy * xc.y / xc.z + cam.cy),
        xc.z,
    ))
}

/// Viable-frustum membership: does `x` project into the unit square of
/// pixel `(i, j)` from in front of the camera?
pub fn frustum_contains(pixel: (usize, usize), x: &WorldPoint, cam: &Camera) -> bool {
    let (i, j) = pixel;
    match project(x, cam) {
        Ok((p, depth)) => {
            depth > 0.0
                && p.u >= i as f64
                && p.u < (i + 1) as f64
                && p.v >= j as f64
                && p.v < (j + 1) as f64
        }
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_camera(f: f64) -> Camera {
        Camera::new(f, f, 0.0, 0.0, 64, 64, Pose::identity()).unwrap()
    }

    fn random_camera(rng: &mut ChaCha8Rng) -> Camera {
        let omega = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let t = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let w = rng.random_range(8..128);
        let h = rng.random_range(8..128);
        Camera::new(
            rng.random_range(20.0..200.0),
            rng.random_range(20.0..200.0),
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
            w,
            h,
            Pose::new(so3_exp(&omega), t).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn principal_ray_unprojects_on_axis() {
        let x = unproject(PixelCoord::new(0.0, 0.0), 2.0, &unit_camera(1.0)).unwrap();
        assert_eq!(x, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn unproject_matches_pinhole_formula() {
        let x = unproject(PixelCoord::new(3.0, 4.0), 2.0, &unit_camera(2.0)).unwrap();
        assert_eq!(x, Vector3::new(3.0, 4.0, 2.0));
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let cam = unit_camera(1.0);
        assert!(matches!(
            unproject(PixelCoord::new(0.0, 0.0), 0.0, &cam),
            Err(Error::Domain(_))
        ));
        assert!(unproject(PixelCoord::new(0.0, 0.0), -1.0, &cam).is_err());
    }

    #[test]
    fn project_examples() {
        let (p, d) = project(&Vector3::new(0.0, 0.0, 2.0), &unit_camera(1.0)).unwrap();
        assert_eq!((p.u, p.v, d), (0.0, 0.0, 2.0));

        let cam = Camera::new(100.0, 100.0, 32.0, 32.0, 64, 64, Pose::identity()).unwrap();
        let (p, d) = project(&Vector3::new(0.01, -0.02, 1.0), &cam).unwrap();
        assert!((p.u - 33.0).abs() < 1e-12 && (p.v - 30.0).abs() < 1e-12);
        assert_eq!(d, 1.0);

        assert!(matches!(
            project(&Vector3::new(0.0, 0.0, -1.0), &cam),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn frustum_examples() {
        let cam = Camera::new(50.0, 60.0, 16.0, 12.0, 32, 24, Pose::identity()).unwrap();
        let center = PixelCoord::center_of(5, 7);
        let x = unproject(center, 3.0, &cam).unwrap();
        assert!(frustum_contains((5, 7), &x, &cam));

        let shifted = PixelCoord::new(center.u + 0.6, center.v);
        let x = unproject(shifted, 3.0, &cam).unwrap();
        assert!(!frustum_contains((5, 7), &x, &cam));
        assert!(frustum_contains((6, 7), &x, &cam));

        let behind = Vector3::new(0.0, 0.0, -2.0);
        assert!(!frustum_contains((5, 7), &behind, &cam));
    }

    #[test]
    fn round_trip_on_random_cameras() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let cam = random_camera(&mut rng);
            let p = PixelCoord::new(
                rng.random_range(0.0..cam.width as f64),
                rng.random_range(0.0..cam.height as f64),
            );
            let d = rng.random_range(0.1..20.0);
            let (q, z) = project(&unproject(p, d, &cam).unwrap(), &cam).unwrap();
            assert!((q.u - p.u).abs() <= 1e-9 && (q.v - p.v).abs() <= 1e-9);
            assert!((z - d).abs() <= 1e-9);
        }
    }

    #[test]
    fn compose_and_invert_keep_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = Pose::identity();
        for _ in 0..200 {
            let omega = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let p = Pose::new(so3_exp(&omega), Vector3::new(1.0, 2.0, 3.0)).unwrap();
            assert!(p.inverse().orthonormality_error() <= 1e-12);
            assert!(p.compose(&p.inverse()).orthonormality_error() <= 1e-12);
            acc = p.compose(&p.inverse()).compose(&acc);
        }
        assert!(acc.orthonormality_error() <= 1e-12);
    }

    #[test]
    fn look_at_points_forward() {
        let pose = Pose::look_at(
            Vector3::new(0.0, 1.0, 5.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let cam = Camera::new(10.0, 10.0, 0.0, 0.0, 4, 4, pose).unwrap();
        let xc = cam.world_to_camera(&Vector3::new(0.0, 2.0, 0.0));
        assert!(xc.z > 0.0);
        // world up maps to image up, i.e. negative camera y
        assert!(xc.y < 0.0);
    }

    #[test]
    fn right_jacobian_matches_finite_differences() {
        let omega = Vector3::new(0.3, -0.7, 0.2);
        let jr = so3_right_jacobian(&omega);
        let r = so3_exp(&omega);
        let h = 1e-6;
        for k in 0..3 {
            let mut dw = Vector3::zeros();
            dw[k] = h;
            let rp = so3_exp(&(omega + dw));
            let rm = so3_exp(&(omega - dw));
            // log of Rᵀ R(ω ± h e_k), small-angle
            let d = r.transpose() * (rp - rm) / (2.0 * h);
            let fd = Vector3::new(d[(2, 1)], d[(0, 2)], d[(1, 0)]);
            assert!((fd - jr.column(k)).norm() < 1e-8);
        }
    }
}
