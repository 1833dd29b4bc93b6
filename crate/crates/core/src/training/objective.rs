//! One-view objective: materialize, render, score, and pull adjoints back
//! to the raw parameters.

use crate::error::Result;
use crate::geometry::Camera;
use crate::image::RgbImage;
use crate::losses::{view_loss, view_loss_value, LossBreakdown, LossWeights};
use crate::rasterizer::{render, render_with_backward, RenderSettings};
use crate::scene::{backprop_to_parameters, materialize_scene, GradientBuffers, MaterializedGaussian, Scene};

/// Everything needed to score one view besides the scene itself.
#[derive(Clone, Debug)]
pub struct ViewObjective<'a> {
    /// Index of the scene view whose per-view depth enters the visibility term.
    pub view: usize,
    /// Camera to render through; may be a resized copy of the view's camera.
    pub camera: &'a Camera,
    pub target: &'a RgbImage,
    pub render: RenderSettings,
    pub weights: LossWeights,
}

/// Loss only.
pub fn objective_value(scene: &Scene, obj: &ViewObjective<'_>) -> Result<LossBreakdown> {
    let gaussians = materialize_scene(scene);
    objective_value_with(scene, &gaussians, obj)
}

pub(crate) fn objective_value_with(
    scene: &Scene,
    gaussians: &[MaterializedGaussian],
    obj: &ViewObjective<'_>,
) -> Result<LossBreakdown> {
    let out = render(gaussians, obj.camera, &obj.render)?;
    let per_view = scene.views[obj.view].params.depth_map();
    view_loss_value(&out, obj.target, &per_view, &obj.weights)
}

/// Loss and its gradient w.r.t. every raw parameter, accumulated into `grads`.
pub fn objective_with_grad(scene: &Scene, obj: &ViewObjective<'_>, grads: &mut GradientBuffers) -> Result<LossBreakdown> {
    let gaussians = materialize_scene(scene);
    objective_with_grad_using(scene, &gaussians, obj, grads)
}

pub(crate) fn objective_with_grad_using(
    scene: &Scene,
    gaussians: &[MaterializedGaussian],
    obj: &ViewObjective<'_>,
    grads: &mut GradientBuffers,
) -> Result<LossBreakdown> {
    let vp = &scene.views[obj.view].params;
    let per_view = vp.depth_map();
    let (_, (breakdown, grad_per_view_depth), g) = render_with_backward(gaussians, obj.camera, &obj.render, |out| {
        let loss = view_loss(out, obj.target, &per_view, &obj.weights)?;
        Ok(((loss.breakdown, loss.grad_per_view_depth), loss.upstream))
    })?;
    backprop_to_parameters(scene, gaussians, &g, grads)?;
    // D = exp(ℓ) enters the visibility term directly
    if obj.weights.visibility > 0.0 {
        let buf = &mut grads.views[obj.view];
        for (n, gd) in grad_per_view_depth.data.iter().enumerate() {
            buf.log_depth[n] += gd * per_view.data[n];
        }
    }
    Ok(breakdown)
}
