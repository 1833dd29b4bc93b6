//! Finite-difference check of the analytic gradient of the full objective
//! with respect to every raw parameter.
//!
//! The objective is piecewise smooth: splat footprints are truncated, colors
//! clamp at zero and the visibility mask is thresholded. A central
//! difference whose stencil straddles one of those seams is detected by the
//! asymmetry of its one-sided differences and retried with another step.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Camera, Pose};
use crate::image::RgbImage;
use crate::losses::LossWeights;
use crate::rasterizer::{DepthMode, RenderSettings};
use crate::scene::{logit, materialize_scene, ParamClass, Scene, SceneView, ViewParameters, SH_COEFFS};
use crate::training::objective::{objective_value_with, objective_with_grad, ViewObjective};
use crate::scene::GradientBuffers;

/// A small scene with one target image per view.
#[derive(Clone, Debug)]
pub struct GradProblem {
    pub scene: Scene,
    pub targets: Vec<RgbImage>,
    pub render: RenderSettings,
    pub weights: LossWeights,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckConfig {
    /// Relative step: `h = step·max(1, |θ|)`.
    pub step: f64,
    /// Magnitudes below this are compared absolutely.
    pub magnitude_floor: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            magnitude_floor: 1e-4,
            tolerance: 1e-5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub view: usize,
    pub class: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<ParamCheck>,
    pub failures: Vec<ParamCheck>,
    pub pass: bool,
}

fn camera_at(size: usize, eye: Vector3<f64>) -> Result<Camera> {
    let f = size as f64;
    let pose = Pose::look_at(eye, Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0))?;
    Camera::new(f, f, 0.5 * f, 0.5 * f, size, size, pose)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Two overlapping square views with random Gaussians (at most
/// `max_gaussians` in total) and random targets. Opacities stay moderate so
/// the transmittance cutoff is not reached.
pub fn random_problem(seed: u64, image_size: usize, max_gaussians: usize) -> Result<GradProblem> {
    if image_size < 4 || max_gaussians < 2 {
        return Err(Error::contract("gradient-check scene too small"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_view = max_gaussians / 2;
    let stride = (1..=image_size)
        .find(|s| image_size.div_ceil(*s).pow(2) <= per_view)
        .expect("stride = size yields one cell");
    let eyes = [Vector3::new(0.0, 0.0, -2.5), Vector3::new(0.4, 0.1, -2.4)];
    let mut views = Vec::new();
    let mut targets = Vec::new();
    for eye in eyes {
        let camera = camera_at(image_size, eye)?;
        let mut p = ViewParameters::zeros(image_size, image_size, stride)?;
        for n in 0..p.len() {
            let d: f64 = rng.random_range(2.0..3.0);
            p.log_depth[n] = d.ln();
            p.raw_offset[2 * n] = 0.8 * normal(&mut rng);
            p.raw_offset[2 * n + 1] = 0.8 * normal(&mut rng);
            let sigma_px: f64 = rng.random_range(1.0..2.5);
            let base = (sigma_px * d / camera.fx).ln();
            for k in 0..3 {
                p.log_scale[3 * n + k] = base + rng.random_range(-0.3..0.3);
            }
            let norm: f64 = rng.random_range(0.5..1.5);
            let q: Vec<f64> = (0..4).map(|_| normal(&mut rng)).collect();
            let ql = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            for k in 0..4 {
                p.rotation[4 * n + k] = norm * q[k] / ql;
            }
            p.opacity_logit[n] = logit(rng.random_range(0.12..0.73));
            for k in 0..SH_COEFFS {
                let sd = if k == 0 { 0.5 } else { 0.2 };
                for c in 0..3 {
                    p.sh_coeffs[(n * SH_COEFFS + k) * 3 + c] = sd * normal(&mut rng);
                }
            }
        }
        views.push(SceneView { camera, params: p });
        let data = (0..3 * image_size * image_size).map(|_| rng.random::<f64>()).collect();
        targets.push(RgbImage::from_vec(image_size, image_size, data)?);
    }
    Ok(GradProblem {
        scene: Scene::new(views)?,
        targets,
        render: RenderSettings {
            sh_degree: 3,
            depth_mode: DepthMode::Normalized,
            parallel: false,
        },
        weights: LossWeights {
            dssim: 0.2,
            visibility: 1.0,
            alpha_threshold: 0.5,
        },
    })
}

impl GradProblem {
    fn objective<'a>(&'a self, view: usize) -> ViewObjective<'a> {
        ViewObjective {
            view,
            camera: &self.scene.views[view].camera,
            target: &self.targets[view],
            render: self.render,
            weights: self.weights,
        }
    }

    /// Sum of the per-view objectives.
    pub fn loss(&self, scene: &Scene) -> Result<f64> {
        let gaussians = materialize_scene(scene);
        let mut total = 0.0;
        for v in 0..scene.views.len() {
            total += objective_value_with(scene, &gaussians, &self.objective(v))?.total;
        }
        Ok(total)
    }

    pub fn gradient(&self) -> Result<(f64, GradientBuffers)> {
        let mut grads = GradientBuffers::zeros_like(&self.scene);
        let mut total = 0.0;
        for v in 0..self.scene.views.len() {
            total += objective_with_grad(&self.scene, &self.objective(v), &mut grads)?.total;
        }
        Ok((total, grads))
    }
}

fn perturbed(scene: &Scene, view: usize, class: ParamClass, index: usize, value: f64) -> Scene {
    let mut s = scene.clone();
    s.views[view].params.class_mut(class).expect("class present")[index] = value;
    s
}

/// Central difference with seam detection.
fn numeric_derivative(problem: &GradProblem, view: usize, class: ParamClass, index: usize, base: f64, f0: f64, h0: f64) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for factor in [1.0, 1.0 / 7.0, 3.3, 1.0 / 40.0] {
        let h = h0 * factor;
        let fp = problem.loss(&perturbed(&problem.scene, view, class, index, base + h))?;
        let fm = problem.loss(&perturbed(&problem.scene, view, class, index, base - h))?;
        let estimate = (fp - fm) / (2.0 * h);
        let asymmetry = (fp - 2.0 * f0 + fm).abs();
        if asymmetry <= 0.1 * (fp - fm).abs() + 1e-12 {
            return Ok(estimate);
        }
        if best.is_none_or(|(a, _)| asymmetry < a) {
            best = Some((asymmetry, estimate));
        }
    }
    Ok(best.expect("at least one step tried").1)
}

/// Compare analytic and numeric derivatives for every parameter.
pub fn check_gradients(problem: &GradProblem, cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let (_, grads) = problem.gradient()?;
    // the centre value comes from the same code path as the stencil points
    let f0 = problem.loss(&problem.scene)?;
    let mut report = GradcheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        failures: Vec::new(),
        pass: true,
    };
    for (v, view) in problem.scene.views.iter().enumerate() {
        for class in ParamClass::ALL {
            let Some(values) = view.params.class(class) else {
                continue;
            };
            let analytic_all = grads.views[v].class(class).expect("mirrors the scene");
            for (i, &theta) in values.iter().enumerate() {
                let h = cfg.step * theta.abs().max(1.0);
                let numeric = numeric_derivative(problem, v, class, i, theta, f0, h)?;
                let analytic = analytic_all[i];
                let denom = analytic.abs().max(numeric.abs()).max(cfg.magnitude_floor);
                let rel_error = (analytic - numeric).abs() / denom;
                let check = ParamCheck {
                    view: v,
                    class: class.name(),
                    index: i,
                    analytic,
                    numeric,
                    rel_error,
                };
                report.checked += 1;
                if rel_error > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = report.max_rel_error.max(rel_error);
                    report.worst = Some(check.clone());
                }
                if !(rel_error <= cfg.tolerance) {
                    report.pass = false;
                    report.failures.push(check);
                }
            }
        }
    }
    Ok(report)
}
