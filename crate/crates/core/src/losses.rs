//! Photometric and visibility objectives, and the training schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{RgbImage, ScalarMap};
use crate::rasterizer::{RenderOutput, RenderUpstream};
use crate::ssim;

/// Per-iteration loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1: f64,
    pub dssim: f64,
    pub visibility: f64,
    pub total: f64,
    pub vis_weight_used: f64,
    pub masked_pixel_count: usize,
}

/// Weights that combine the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// D-SSIM weight λ_s; L1 gets `1 − λ_s`.
    pub dssim: f64,
    /// Visibility weight for this iteration (already scheduled).
    pub visibility: f64,
    /// Pixels with rendered alpha at or above this enter the visibility term.
    pub alpha_threshold: f64,
}

/// Mean of `(D̂ − D)²` over pixels with `alpha ≥ threshold`; 0 when no pixel
/// qualifies.
pub fn visibility_loss(
    rendered_depth: &ScalarMap,
    per_view_depth: &ScalarMap,
    alpha: &ScalarMap,
    alpha_threshold: f64,
) -> Result<f64> {
    visibility_loss_with_grad(rendered_depth, per_view_depth, alpha, alpha_threshold).map(|r| r.loss)
}

pub struct VisibilityTerm {
    pub loss: f64,
    pub masked: usize,
    /// ∂L/∂D̂
    pub grad_rendered: ScalarMap,
    /// ∂L/∂D
    pub grad_per_view: ScalarMap,
}

pub fn visibility_loss_with_grad(
    rendered_depth: &ScalarMap,
    per_view_depth: &ScalarMap,
    alpha: &ScalarMap,
    alpha_threshold: f64,
) -> Result<VisibilityTerm> {
    if !rendered_depth.same_shape(per_view_depth) || !rendered_depth.same_shape(alpha) {
        return Err(Error::contract("visibility loss inputs differ in shape"));
    }
    let (w, h) = (rendered_depth.width, rendered_depth.height);
    let mask: Vec<bool> = alpha.data.iter().map(|&a| a >= alpha_threshold).collect();
    let masked = mask.iter().filter(|&&m| m).count();
    let mut term = VisibilityTerm {
        loss: 0.0,
        masked,
        grad_rendered: ScalarMap::zeros(w, h),
        grad_per_view: ScalarMap::zeros(w, h),
    };
    if masked == 0 {
        return Ok(term);
    }
    let inv = 1.0 / masked as f64;
    for (p, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let diff = rendered_depth.data[p] - per_view_depth.data[p];
        term.loss += diff * diff;
        term.grad_rendered.data[p] = 2.0 * diff * inv;
        term.grad_per_view.data[p] = -2.0 * diff * inv;
    }
    term.loss *= inv;
    Ok(term)
}

/// `(L1, D-SSIM)` of a render against its target; D-SSIM = (1 − SSIM)/2.
pub fn photometric_loss(rendered: &RgbImage, target: &RgbImage) -> Result<(f64, f64)> {
    if !rendered.same_shape(target) {
        return Err(Error::contract("photometric loss inputs differ in shape"));
    }
    let l1 = rendered
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / rendered.data.len() as f64;
    let s = ssim::ssim(rendered, target)?;
    Ok((l1, 0.5 * (1.0 - s)))
}

/// Photometric part of the objective with its color adjoint.
pub struct PhotometricTerm {
    pub l1: f64,
    pub dssim: f64,
    /// ∂[(1 − λ_s)·L1 + λ_s·D-SSIM]/∂color.
    pub grad: RgbImage,
}

impl PhotometricTerm {
    pub fn value(&self, dssim_weight: f64) -> f64 {
        (1.0 - dssim_weight) * self.l1 + dssim_weight * self.dssim
    }
}

pub fn photometric_with_grad(rendered: &RgbImage, target: &RgbImage, dssim_weight: f64) -> Result<PhotometricTerm> {
    if !rendered.same_shape(target) {
        return Err(Error::contract("render and target differ in shape"));
    }
    let n = target.data.len() as f64;
    let l1 = rendered
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    let (s, g_ssim) = ssim::ssim_with_grad(rendered, target)?;
    let mut grad = RgbImage::zeros(target.width, target.height);
    let l1_w = 1.0 - dssim_weight;
    for (p, g) in grad.data.iter_mut().enumerate() {
        let diff = rendered.data[p] - target.data[p];
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g = l1_w * sign / n - 0.5 * dssim_weight * g_ssim[p];
    }
    Ok(PhotometricTerm {
        l1,
        dssim: 0.5 * (1.0 - s),
        grad,
    })
}

/// Linearly decaying visibility weight `λ0·(1 − t/T)`.
pub fn vis_weight(t: usize, total: usize, lambda0: f64) -> Result<f64> {
    if t > total {
        return Err(Error::contract(format!("iteration {t} exceeds total {total}")));
    }
    if total == 0 {
        return Ok(lambda0);
    }
    Ok(lambda0 * (1.0 - t as f64 / total as f64))
}

/// Active SH degree: one more band every 100 iterations, capped at 3.
pub fn sh_degree_at(t: usize) -> usize {
    sh_degree_with_step(t, 100)
}

pub fn sh_degree_with_step(t: usize, step: usize) -> usize {
    (t / step.max(1)).min(3)
}

/// Render resolution for iteration `t`: during the first `stage_iters`
/// iterations the long side is capped at `stage_long_side`.
pub fn render_resolution_at(
    t: usize,
    native: (usize, usize),
    stage_iters: usize,
    stage_long_side: usize,
) -> (usize, usize) {
    let (w, h) = native;
    let long = w.max(h);
    if t >= stage_iters || long <= stage_long_side {
        return native;
    }
    let s = stage_long_side as f64 / long as f64;
    let scale = |v: usize| ((v as f64 * s).round() as usize).max(1);
    (scale(w), scale(h))
}

/// Alpha-weighted `k×k` block mean of depth (0 where a block has no alpha)
/// and plain block mean of alpha.
pub fn depth_downsample(depth: &ScalarMap, alpha: &ScalarMap, k: usize) -> Result<(ScalarMap, ScalarMap)> {
    if !depth.same_shape(alpha) {
        return Err(Error::contract("depth and alpha differ in shape"));
    }
    if k == 0 || depth.width % k != 0 || depth.height % k != 0 {
        return Err(Error::contract(format!(
            "factor {k} does not divide {}x{}",
            depth.width, depth.height
        )));
    }
    let (w, h) = (depth.width / k, depth.height / k);
    let mut d_out = ScalarMap::zeros(w, h);
    let mut a_out = ScalarMap::zeros(w, h);
    for by in 0..h {
        for bx in 0..w {
            let (mut wsum, mut dsum) = (0.0, 0.0);
            for y in by * k..(by + 1) * k {
                for x in bx * k..(bx + 1) * k {
                    let a = alpha.get(x, y);
                    wsum += a;
                    dsum += a * depth.get(x, y);
                }
            }
            d_out.set(bx, by, if wsum > 0.0 { dsum / wsum } else { 0.0 });
            a_out.set(bx, by, wsum / (k * k) as f64);
        }
    }
    Ok((d_out, a_out))
}

/// Pull back block-level depth adjoints onto the full-resolution depth and
/// alpha maps. Block alpha only gates the mask, so it carries no adjoint.
fn depth_downsample_backward(
    depth: &ScalarMap,
    alpha: &ScalarMap,
    k: usize,
    block_depth: &ScalarMap,
    g_block: &ScalarMap,
    g_depth: &mut ScalarMap,
    g_alpha: &mut ScalarMap,
) {
    for by in 0..block_depth.height {
        for bx in 0..block_depth.width {
            let g = g_block.get(bx, by);
            if g == 0.0 {
                continue;
            }
            let mut wsum = 0.0;
            for y in by * k..(by + 1) * k {
                for x in bx * k..(bx + 1) * k {
                    wsum += alpha.get(x, y);
                }
            }
            if !(wsum > 0.0) {
                continue;
            }
            let mean = block_depth.get(bx, by);
            for y in by * k..(by + 1) * k {
                for x in bx * k..(bx + 1) * k {
                    let a = alpha.get(x, y);
                    let p = y * depth.width + x;
                    g_depth.data[p] += g * a / wsum;
                    g_alpha.data[p] += g * (depth.get(x, y) - mean) / wsum;
                }
            }
        }
    }
}

/// Loss of one rendered view plus adjoints for the render outputs and the
/// per-view depth map.
pub struct ViewLoss {
    pub breakdown: LossBreakdown,
    pub upstream: RenderUpstream,
    /// ∂L/∂D on the per-view grid.
    pub grad_per_view_depth: ScalarMap,
}

/// How the rendered depth is brought onto the per-view depth grid.
enum DepthMatch {
    Blocks(usize),
    Nearest,
}

fn depth_match(render: (usize, usize), grid: (usize, usize)) -> DepthMatch {
    let (rw, rh) = render;
    let (gw, gh) = grid;
    if rw >= gw && rw % gw == 0 && rh % gh == 0 && rw / gw == rh / gh {
        DepthMatch::Blocks(rw / gw)
    } else {
        DepthMatch::Nearest
    }
}

/// Full objective `(1 − λ_s)·L1 + λ_s·D-SSIM + λ_vis·L_vis` for one view.
///
/// When the render is an integer multiple of the per-view depth grid, the
/// rendered depth is block-downsampled onto that grid; otherwise the
/// per-view depth is sampled at the render's pixel centers.
pub fn view_loss(
    render: &RenderOutput,
    target: &RgbImage,
    per_view_depth: &ScalarMap,
    weights: &LossWeights,
) -> Result<ViewLoss> {
    if !render.color.same_shape(target) {
        return Err(Error::contract("render and target differ in shape"));
    }
    let (w, h) = (target.width, target.height);
    let photo = photometric_with_grad(&render.color, target, weights.dssim)?;
    let (l1, dssim) = (photo.l1, photo.dssim);
    let mut upstream = RenderUpstream::zeros(w, h);
    upstream.color = photo.grad;

    let mut grad_per_view_depth = ScalarMap::zeros(per_view_depth.width, per_view_depth.height);
    let (mut visibility, mut masked) = (0.0, 0);
    if weights.visibility > 0.0 {
        let lam = weights.visibility;
        match depth_match((w, h), (per_view_depth.width, per_view_depth.height)) {
            DepthMatch::Blocks(1) => {
                let term = visibility_loss_with_grad(&render.depth, per_view_depth, &render.alpha, weights.alpha_threshold)?;
                visibility = term.loss;
                masked = term.masked;
                for (u, g) in upstream.depth.data.iter_mut().zip(&term.grad_rendered.data) {
                    *u += lam * g;
                }
                for (u, g) in grad_per_view_depth.data.iter_mut().zip(&term.grad_per_view.data) {
                    *u += lam * g;
                }
            }
            DepthMatch::Blocks(k) => {
                let (bd, ba) = depth_downsample(&render.depth, &render.alpha, k)?;
                let term = visibility_loss_with_grad(&bd, per_view_depth, &ba, weights.alpha_threshold)?;
                visibility = term.loss;
                masked = term.masked;
                let mut g_block = term.grad_rendered;
                g_block.data.iter_mut().for_each(|g| *g *= lam);
                depth_downsample_backward(
                    &render.depth,
                    &render.alpha,
                    k,
                    &bd,
                    &g_block,
                    &mut upstream.depth,
                    &mut upstream.alpha,
                );
                for (u, g) in grad_per_view_depth.data.iter_mut().zip(&term.grad_per_view.data) {
                    *u += lam * g;
                }
            }
            DepthMatch::Nearest => {
                let (gw, gh) = (per_view_depth.width, per_view_depth.height);
                let cell = |x: usize, y: usize| {
                    let gx = (((x as f64 + 0.5) * gw as f64 / w as f64) as usize).min(gw - 1);
                    let gy = (((y as f64 + 0.5) * gh as f64 / h as f64) as usize).min(gh - 1);
                    gy * gw + gx
                };
                let mut sampled = ScalarMap::zeros(w, h);
                for y in 0..h {
                    for x in 0..w {
                        sampled.set(x, y, per_view_depth.data[cell(x, y)]);
                    }
                }
                let term = visibility_loss_with_grad(&render.depth, &sampled, &render.alpha, weights.alpha_threshold)?;
                visibility = term.loss;
                masked = term.masked;
                for y in 0..h {
                    for x in 0..w {
                        let p = y * w + x;
                        upstream.depth.data[p] += lam * term.grad_rendered.data[p];
                        grad_per_view_depth.data[cell(x, y)] += lam * term.grad_per_view.data[p];
                    }
                }
            }
        }
    }

    let total = (1.0 - weights.dssim) * l1 + weights.dssim * dssim + weights.visibility * visibility;
    Ok(ViewLoss {
        breakdown: LossBreakdown {
            l1,
            dssim,
            visibility,
            total,
            vis_weight_used: weights.visibility,
            masked_pixel_count: masked,
        },
        upstream,
        grad_per_view_depth,
    })
}

/// Value of [`view_loss`] without any adjoints; the same breakdown at
/// roughly a third of the cost.
pub fn view_loss_value(
    render: &RenderOutput,
    target: &RgbImage,
    per_view_depth: &ScalarMap,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    if !render.color.same_shape(target) {
        return Err(Error::contract("render and target differ in shape"));
    }
    let (w, h) = (target.width, target.height);
    let (l1, dssim) = photometric_loss(&render.color, target)?;
    let (mut visibility, mut masked) = (0.0, 0);
    if weights.visibility > 0.0 {
        let (depth, reference, alpha) = match depth_match((w, h), (per_view_depth.width, per_view_depth.height)) {
            DepthMatch::Blocks(1) => (render.depth.clone(), per_view_depth.clone(), render.alpha.clone()),
            DepthMatch::Blocks(k) => {
                let (bd, ba) = depth_downsample(&render.depth, &render.alpha, k)?;
                (bd, per_view_depth.clone(), ba)
            }
            DepthMatch::Nearest => {
                let (gw, gh) = (per_view_depth.width, per_view_depth.height);
                let mut sampled = ScalarMap::zeros(w, h);
                for y in 0..h {
                    for x in 0..w {
                        let gx = (((x as f64 + 0.5) * gw as f64 / w as f64) as usize).min(gw - 1);
                        let gy = (((y as f64 + 0.5) * gh as f64 / h as f64) as usize).min(gh - 1);
                        sampled.set(x, y, per_view_depth.data[gy * gw + gx]);
                    }
                }
                (render.depth.clone(), sampled, render.alpha.clone())
            }
        };
        masked = alpha.data.iter().filter(|&&a| a >= weights.alpha_threshold).count();
        visibility = visibility_loss(&depth, &reference, &alpha, weights.alpha_threshold)?;
    }
    let total = (1.0 - weights.dssim) * l1 + weights.dssim * dssim + weights.visibility * visibility;
    Ok(LossBreakdown {
        l1,
        dssim,
        visibility,
        total,
        vis_weight_used: weights.visibility,
        masked_pixel_count: masked,
    })
}
