//! Test-view pose alignment: with the scene frozen, refine a camera pose by
//! minimizing the photometric loss against an observed image.
//!
//! The pose is parametrized around the initial guess `(R0, C0)` as
//! `R = R0·Exp(ω)` and `C = C0 + s·R0·τ`, where `s` is a translation scale
//! (the distance of `C0` from the origin by default) so both blocks have
//! comparable learning rates.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle, so3_exp, so3_right_jacobian, Camera, Pose};
use crate::image::RgbImage;
use crate::losses::photometric_with_grad;
use crate::rasterizer::project::covariance_3d;
use crate::rasterizer::{render_with_backward, DepthMode, RenderSettings, RenderUpstream};
use crate::scene::{materialize_scene, MaterializedGaussian, Scene};

use super::adam::{adam_step, AdamState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub iterations: usize,
    pub lr_rotation: f64,
    pub lr_translation: f64,
    /// Learning rates decay geometrically to this fraction by the last step.
    pub final_lr_fraction: f64,
    pub dssim_weight: f64,
    pub sh_degree: usize,
    /// Overrides the translation scale `s`.
    pub translation_scale: Option<f64>,
    pub parallel: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            lr_rotation: 1e-3,
            lr_translation: 1e-3,
            final_lr_fraction: 0.05,
            dssim_weight: 0.2,
            sh_degree: 3,
            translation_scale: None,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AlignResult {
    /// Camera at the lowest loss seen.
    pub camera: Camera,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub history: Vec<f64>,
}

/// Camera obtained from `base` by the local pose update `(ω, τ)`.
pub fn perturbed_camera(base: &Camera, omega: &Vector3<f64>, tau: &Vector3<f64>, scale: f64) -> Camera {
    let r0 = base.cam_to_world.rotation;
    let mut cam = *base;
    cam.cam_to_world = Pose {
        rotation: r0 * so3_exp(omega),
        translation: base.cam_to_world.translation + scale * (r0 * tau),
    };
    cam
}

/// Photometric loss of the view through `base ⊕ (ω, τ)` and its gradient
/// w.r.t. `(ω, τ)`.
pub fn pose_loss_with_grad(
    gaussians: &[MaterializedGaussian],
    base: &Camera,
    omega: &Vector3<f64>,
    tau: &Vector3<f64>,
    scale: f64,
    target: &RgbImage,
    cfg: &AlignConfig,
) -> Result<(f64, Vector3<f64>, Vector3<f64>)> {
    let cam = perturbed_camera(base, omega, tau, scale);
    let settings = RenderSettings {
        sh_degree: cfg.sh_degree,
        depth_mode: DepthMode::Normalized,
        parallel: cfg.parallel,
    };
    let (_, photo, grads) = render_with_backward(gaussians, &cam, &settings, |out| {
        let photo = photometric_with_grad(&out.color, target, cfg.dssim_weight)?;
        let mut upstream = RenderUpstream::zeros(cam.width, cam.height);
        upstream.color = photo.grad.clone();
        Ok((photo, upstream))
    })?;

    let w = cam.world_to_cam_rotation();
    let center = cam.center();
    let mut g_center = Vector3::zeros();
    let mut g_delta = Vector3::zeros();
    for (g, dg) in gaussians.iter().zip(&grads) {
        g_center -= dg.mean;
        if dg.cam_point == Vector3::zeros() && dg.cov_cam == Matrix3::zeros() {
            continue;
        }
        let xc = w * (g.mean - center);
        g_delta += dg.cam_point.cross(&xc);
        // Σ_cam = W Σ Wᵀ with W ← (I − [δ]×)·W
        let sc = w * covariance_3d(&g.scale, &g.rotation) * w.transpose();
        let gt = dg.cov_cam.transpose();
        let m = gt * sc - sc * gt;
        g_delta += Vector3::new(m[(1, 2)] - m[(2, 1)], m[(2, 0)] - m[(0, 2)], m[(0, 1)] - m[(1, 0)]);
    }
    let g_omega = so3_right_jacobian(omega).transpose() * g_delta;
    let g_tau = scale * (base.cam_to_world.rotation.transpose() * g_center);
    Ok((photo.value(cfg.dssim_weight), g_omega, g_tau))
}

/// Align `init` to `target` with Adam on the local pose parameters.
pub fn align_test_view(scene: &Scene, target: &RgbImage, init: &Camera, cfg: &AlignConfig) -> Result<AlignResult> {
    init.validate()?;
    if target.width != init.width || target.height != init.height {
        return Err(Error::contract("target size differs from the camera"));
    }
    if !(cfg.lr_rotation > 0.0 && cfg.lr_translation > 0.0 && cfg.final_lr_fraction > 0.0) {
        return Err(Error::contract("alignment learning rates must be positive"));
    }
    let gaussians = materialize_scene(scene);
    let scale = cfg
        .translation_scale
        .unwrap_or_else(|| init.cam_to_world.translation.norm().max(1.0));
    let mut omega = [0.0; 3];
    let mut tau = [0.0; 3];
    let mut s_omega = AdamState::new(3);
    let mut s_tau = AdamState::new(3);
    let mut best = (f64::INFINITY, 0, *init);
    let mut history = Vec::with_capacity(cfg.iterations);
    let decay = cfg.final_lr_fraction.ln() / (cfg.iterations.max(2) - 1) as f64;

    for t in 0..cfg.iterations {
        let (o, ta) = (Vector3::from(omega), Vector3::from(tau));
        let (loss, g_omega, g_tau) = pose_loss_with_grad(&gaussians, init, &o, &ta, scale, target, cfg)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                iteration: t,
                snapshot: format!("pose update ω={o:?} τ={ta:?}"),
            });
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, t, perturbed_camera(init, &o, &ta, scale));
        }
        let f = (decay * t as f64).exp();
        adam_step(&mut omega, g_omega.as_slice(), &mut s_omega, cfg.lr_rotation * f)?;
        adam_step(&mut tau, g_tau.as_slice(), &mut s_tau, cfg.lr_translation * f)?;
    }
    Ok(AlignResult {
        camera: best.2,
        best_loss: best.0,
        best_iteration: best.1,
        history,
    })
}

/// Angle of the relative rotation between two camera poses, in degrees.
pub fn rotation_error_deg(a: &Camera, b: &Camera) -> f64 {
    let r = a.cam_to_world.rotation.transpose() * b.cam_to_world.rotation;
    rotation_angle(&r).to_degrees()
}

/// Camera-center distance relative to the norm of `reference`'s center.
pub fn translation_error_rel(estimate: &Camera, reference: &Camera) -> f64 {
    let c = reference.center();
    (estimate.center() - c).norm() / c.norm().max(1e-12)
}
