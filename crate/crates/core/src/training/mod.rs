//! Optimization loop: round-robin over training views, Adam per parameter
//! class, coarse-to-fine resolution, SH warm-up, decaying visibility weight
//! and per-step scale clipping.

pub mod adam;
pub mod align;
pub mod config;
pub mod objective;

pub use adam::{adam_step, AdamState};
pub use align::{align_test_view, perturbed_camera, pose_loss_with_grad, rotation_error_deg, translation_error_rel, AlignConfig, AlignResult};
pub use config::TrainConfig;
pub use objective::{objective_value, objective_with_grad, ViewObjective};

use crate::error::{Error, Result};
use crate::geometry::{Camera, EPS_Z};
use crate::image::RgbImage;
use crate::losses::{render_resolution_at, sh_degree_with_step, vis_weight, LossBreakdown, LossWeights};
use crate::rasterizer::project::{pre_dilation_radius, project_gaussian};
use crate::rasterizer::RenderSettings;
use crate::scene::{materialize_cell, GradientBuffers, MaterializedGaussian, ParamClass, Scene};

/// Receives one record per iteration.
pub trait ProgressSink {
    fn record(&mut self, iteration: usize, view: usize, loss: &LossBreakdown);
}

impl<F: FnMut(usize, usize, &LossBreakdown)> ProgressSink for F {
    fn record(&mut self, iteration: usize, view: usize, loss: &LossBreakdown) {
        self(iteration, view, loss)
    }
}

/// One line of a training log.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LossBreakdownRecord {
    pub iteration: usize,
    pub view: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

/// Discards progress.
pub struct Quiet;

impl ProgressSink for Quiet {
    fn record(&mut self, _: usize, _: usize, _: &LossBreakdown) {}
}

/// Optimizer state for every view and parameter class.
#[derive(Clone, Debug)]
pub struct SceneOptimizer {
    states: Vec<Vec<Option<AdamState>>>,
}

impl SceneOptimizer {
    pub fn new(scene: &Scene) -> Self {
        let states = scene
            .views
            .iter()
            .map(|v| {
                ParamClass::ALL
                    .iter()
                    .map(|&c| v.params.class(c).map(|p| AdamState::new(p.len())))
                    .collect()
            })
            .collect();
        Self { states }
    }

    /// Apply one update to every trainable class.
    pub fn step(&mut self, scene: &mut Scene, grads: &GradientBuffers, cfg: &TrainConfig) -> Result<()> {
        for (v, view) in scene.views.iter_mut().enumerate() {
            for (k, &class) in ParamClass::ALL.iter().enumerate() {
                if !cfg.trainable(class) {
                    continue;
                }
                let (Some(params), Some(g), Some(state)) = (
                    view.params.class_mut(class),
                    grads.views[v].class(class),
                    self.states[v][k].as_mut(),
                ) else {
                    continue;
                };
                adam_step(params, g, state, cfg.learning_rate(class))?;
            }
        }
        Ok(())
    }
}

/// Shrink every Gaussian whose pre-dilation screen radius exceeds `max_px`
/// in any camera that does not cull it, uniformly on all three axes.
/// Returns the number of Gaussians clipped. Idempotent.
pub fn scale_clip(scene: &mut Scene, cameras: &[Camera], max_px: f64) -> usize {
    let limit = max_px * (1.0 + 1e-12);
    let frames: Vec<_> = cameras.iter().map(|c| (c.world_to_cam_rotation(), c.center())).collect();
    let mut clipped = 0;
    for (view, sv) in scene.views.iter_mut().enumerate() {
        let vp = &mut sv.params;
        for n in 0..vp.len() {
            let mean = vp.mean(&sv.camera, n);
            let s_max = vp.log_scale[3 * n..3 * n + 3].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).exp();
            let mut exact: Option<MaterializedGaussian> = None;
            let mut worst = 0.0f64;
            for (c, (w, center)) in cameras.iter().zip(&frames) {
                let p = w * (mean - center);
                if !(p.z > EPS_Z) {
                    continue;
                }
                // 3σ radius ≤ 3·s_max·‖J‖_F: skip the exact test when that is small
                let (iz, iz2) = (1.0 / p.z, 1.0 / (p.z * p.z));
                let j_frob =
                    ((c.fx * iz).powi(2) + (c.fx * p.x * iz2).powi(2) + (c.fy * iz).powi(2) + (c.fy * p.y * iz2).powi(2)).sqrt();
                if 3.0 * s_max * j_frob * (1.0 + 1e-9) <= limit {
                    continue;
                }
                let g = exact.get_or_insert_with(|| materialize_cell(vp, &sv.camera, view, n));
                if project_gaussian(g, c).is_some() {
                    if let Some(r) = pre_dilation_radius(g, c) {
                        worst = worst.max(r);
                    }
                }
            }
            if worst > limit {
                let shrink = (max_px / worst).ln();
                for k in 0..3 {
                    vp.log_scale[3 * n + k] += shrink;
                }
                clipped += 1;
            }
        }
    }
    clipped
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub scene: Scene,
    pub history: Vec<LossBreakdown>,
}

/// Settings in effect at iteration `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationSchedule {
    pub view: usize,
    pub sh_degree: usize,
    pub resolution: (usize, usize),
    pub vis_weight: f64,
}

pub fn schedule_at(t: usize, scene: &Scene, cfg: &TrainConfig) -> Result<IterationSchedule> {
    let view = t % scene.views.len();
    let cam = &scene.views[view].camera;
    let vis = if cfg.uses_visibility() {
        vis_weight(t, cfg.iterations, cfg.vis_lambda0)?
    } else {
        0.0
    };
    Ok(IterationSchedule {
        view,
        sh_degree: sh_degree_with_step(t, cfg.sh_step),
        resolution: render_resolution_at(t, (cam.width, cam.height), cfg.stage_iters, cfg.stage_long_side),
        vis_weight: vis,
    })
}

/// Refine `scene` against one target image per view.
///
/// With `naive_free_position` the scene is first converted to free world
/// positions (if it is not already) and trained without the visibility term.
pub fn train(mut scene: Scene, targets: &[RgbImage], cfg: &TrainConfig, sink: &mut dyn ProgressSink) -> Result<TrainOutcome> {
    cfg.validate()?;
    if targets.len() != scene.views.len() {
        return Err(Error::contract(format!(
            "{} targets for {} views",
            targets.len(),
            scene.views.len()
        )));
    }
    for (v, t) in scene.views.iter().zip(targets) {
        if t.width != v.camera.width || t.height != v.camera.height {
            return Err(Error::contract("target size differs from its camera"));
        }
    }
    if cfg.naive_free_position {
        for v in &mut scene.views {
            if v.params.free_means.is_none() {
                let cam = v.camera;
                v.params.to_free_positions(&cam);
            }
        }
    } else if scene.uses_free_positions() {
        return Err(Error::contract("scene has free positions but naive_free_position is off"));
    }

    let cameras = scene.cameras();
    let mut optimizer = SceneOptimizer::new(&scene);
    let mut resized: Vec<Option<RgbImage>> = vec![None; targets.len()];
    let mut history = Vec::with_capacity(cfg.iterations);

    for t in 0..cfg.iterations {
        let s = schedule_at(t, &scene, cfg)?;
        let native = &targets[s.view];
        let target = if s.resolution == (native.width, native.height) {
            native
        } else {
            let slot = &mut resized[s.view];
            if slot.as_ref().map(|r| (r.width, r.height)) != Some(s.resolution) {
                *slot = Some(native.resample(s.resolution.0, s.resolution.1));
            }
            slot.as_ref().expect("filled above")
        };
        let camera = cameras[s.view].resized(s.resolution.0, s.resolution.1);
        let obj = ViewObjective {
            view: s.view,
            camera: &camera,
            target,
            render: RenderSettings {
                sh_degree: s.sh_degree,
                depth_mode: cfg.depth_mode,
                parallel: cfg.parallel,
            },
            weights: LossWeights {
                dssim: cfg.dssim_weight,
                visibility: s.vis_weight,
                alpha_threshold: cfg.alpha_threshold,
            },
        };
        let mut grads = GradientBuffers::zeros_like(&scene);
        let loss = objective_with_grad(&scene, &obj, &mut grads)?;
        if !loss.total.is_finite() || !grads.all_finite() {
            return Err(Error::NonFinite {
                iteration: t,
                snapshot: format!(
                    "view {} at {}x{}, sh degree {}, loss {:?}, max |grad| {:e}",
                    s.view,
                    s.resolution.0,
                    s.resolution.1,
                    s.sh_degree,
                    loss,
                    grads.max_abs()
                ),
            });
        }
        optimizer.step(&mut scene, &grads, cfg)?;
        scale_clip(&mut scene, &cameras, cfg.scale_clip_px);
        sink.record(t, s.view, &loss);
        history.push(loss);
    }
    Ok(TrainOutcome { scene, history })
}
