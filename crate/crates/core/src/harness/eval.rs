//! Scene evaluation against a dataset: image quality of renders and depth
//! quality of the per-view geometry.
//!
//! Two depth signals are scored. `pdc` and `depth_rmse` use each training
//! view's geometry depth (the source-camera z of its own Gaussians, on the
//! stride grid) against ground truth sampled at the same pixels.
//! `rendered_pdc` uses the alpha-composited depth render instead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{RgbImage, ScalarMap};
use crate::metrics::{depth_rmse, pdc, psnr, ssim};
use crate::rasterizer::{render, RenderSettings};
use crate::scene::{materialize_scene, MaterializedGaussian, Scene, ViewParameters};

use super::dataset::{Dataset, DatasetView};

#[derive(Clone, Debug, Serialize)]
pub struct ViewReport {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    pub pdc: Option<f64>,
    pub depth_rmse: Option<f64>,
    pub rendered_pdc: Option<f64>,
    pub per_patch: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    /// Mean over test views when there are any, else over training views.
    pub psnr: f64,
    pub ssim: f64,
    /// Mean geometry PDC over training views with ground truth.
    pub pdc: Option<f64>,
    pub depth_rmse: Option<f64>,
    pub rendered_pdc: Option<f64>,
    pub patch_size: usize,
    /// Per-patch PDC grid of the first training view.
    pub per_patch: Option<Vec<Vec<f64>>>,
    pub views: Vec<ViewReport>,
    pub test_views: Vec<ViewReport>,
    pub config_echo: serde_json::Value,
}

/// Ground truth sampled at the anchor pixel of every stride cell.
pub fn sample_on_grid(gt: &ScalarMap, params: &ViewParameters) -> ScalarMap {
    let mut out = ScalarMap::zeros(params.grid_width(), params.grid_height());
    for n in 0..params.len() {
        let (x, y) = params.cell_pixel(n);
        out.data[n] = gt.get(x, y);
    }
    out
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn score_render(
    gaussians: &[MaterializedGaussian],
    view: &DatasetView,
    settings: &RenderSettings,
    patch: usize,
) -> Result<(ViewReport, RgbImage)> {
    let out = render(gaussians, &view.camera, settings)?;
    let rendered_pdc = match &view.gt_depth {
        Some(gt) if gt.width >= patch && gt.height >= patch => Some(pdc(&out.depth, gt, patch)?.0),
        _ => None,
    };
    Ok((
        ViewReport {
            name: view.name.clone(),
            psnr: psnr(&out.color, &view.image)?,
            ssim: ssim(&out.color, &view.image)?,
            pdc: None,
            depth_rmse: None,
            rendered_pdc,
            per_patch: None,
        },
        out.color,
    ))
}

pub fn evaluate(
    scene: &Scene,
    dataset: &Dataset,
    settings: &RenderSettings,
    patch: usize,
    config_echo: serde_json::Value,
) -> Result<EvalReport> {
    if scene.views.len() != dataset.views.len() {
        return Err(Error::contract(format!(
            "scene has {} views, dataset {}",
            scene.views.len(),
            dataset.views.len()
        )));
    }
    let gaussians = materialize_scene(scene);
    let mut views = Vec::new();
    for (sv, dv) in scene.views.iter().zip(&dataset.views) {
        let (mut report, _) = score_render(&gaussians, dv, settings, patch)?;
        if let Some(gt) = &dv.gt_depth {
            let geometry = sv.params.geometry_depth(&sv.camera);
            let reference = sample_on_grid(gt, &sv.params);
            report.depth_rmse = Some(depth_rmse(&geometry, &reference, None)?);
            if geometry.width >= patch && geometry.height >= patch {
                let (m, grid) = pdc(&geometry, &reference, patch)?;
                report.pdc = Some(m);
                report.per_patch = Some(grid);
            }
        }
        views.push(report);
    }
    let test_views = dataset
        .test_views
        .iter()
        .map(|v| score_render(&gaussians, v, settings, patch).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let image_source = if test_views.is_empty() { &views } else { &test_views };
    Ok(EvalReport {
        psnr: mean(image_source.iter().map(|v| v.psnr)).unwrap_or(f64::NAN),
        ssim: mean(image_source.iter().map(|v| v.ssim)).unwrap_or(f64::NAN),
        pdc: mean(views.iter().filter_map(|v| v.pdc)),
        depth_rmse: mean(views.iter().filter_map(|v| v.depth_rmse)),
        rendered_pdc: mean(views.iter().chain(&test_views).filter_map(|v| v.rendered_pdc)),
        patch_size: patch,
        per_patch: views.first().and_then(|v| v.per_patch.clone()),
        views,
        test_views,
        config_echo,
    })
}
