//! Deterministic CPU splatting renderer with a hand-written reverse pass.
//!
//! Per pixel, the Gaussians whose 3σ box covers the pixel center are
//! composited front to back in `(camera depth, global index)` order with
//! weights `w_k = α_k ∏_{j<k}(1 − α_j)`. Compositing stops once the
//! transmittance drops below [`TRANSMITTANCE_CUTOFF`]; the reverse pass
//! replays the same decisions.
//!
//! Work is split into 16×16 tiles. Tiles may run in parallel, but every
//! pixel is an ordered serial reduction and per-Gaussian adjoints are summed
//! tile by tile in canonical order, so results do not depend on threading.

pub mod project;
pub mod sh;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::image::{RgbImage, ScalarMap};
use crate::scene::MaterializedGaussian;

pub use project::{project_gaussian, GaussianGrad, SplatProjection};
use project::{ShadedColor, SplatAdjoint};

pub const ALPHA_MAX: f64 = 0.999;
pub const TRANSMITTANCE_CUTOFF: f64 = 1e-4;
/// Floor on accumulated weight when normalizing depth.
pub const DEPTH_WEIGHT_FLOOR: f64 = 1e-10;
pub const TILE: usize = 16;

/// How the per-pixel depth is composited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// `Σ w z / max(Σ w, 1e-10)`: an opaque surface renders its exact depth.
    #[default]
    Normalized,
    /// `Σ w z`.
    Accumulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    /// Active SH degree, 0..=3.
    pub sh_degree: usize,
    pub depth_mode: DepthMode,
    pub parallel: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            sh_degree: 3,
            depth_mode: DepthMode::Normalized,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub color: RgbImage,
    pub depth: ScalarMap,
    pub alpha: ScalarMap,
}

/// Adjoints of a scalar loss w.r.t. every [`RenderOutput`] channel.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderUpstream {
    pub color: RgbImage,
    pub depth: ScalarMap,
    pub alpha: ScalarMap,
}

impl RenderUpstream {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            color: RgbImage::zeros(width, height),
            depth: ScalarMap::zeros(width, height),
            alpha: ScalarMap::zeros(width, height),
        }
    }
}

struct Splat {
    proj: SplatProjection,
    shaded: ShadedColor,
    opacity: f64,
}

struct Prepared {
    splats: Vec<Option<Splat>>,
    /// Per tile, Gaussian indices in compositing order.
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
}

fn prepare(gaussians: &[MaterializedGaussian], cam: &Camera, settings: &RenderSettings) -> Prepared {
    let project_one = |g: &MaterializedGaussian| {
        project_gaussian(g, cam).map(|proj| Splat {
            shaded: project::shade(g, cam, settings.sh_degree),
            proj,
            opacity: g.opacity,
        })
    };
    let splats: Vec<Option<Splat>> = if settings.parallel {
        gaussians.par_iter().map(project_one).collect()
    } else {
        gaussians.iter().map(project_one).collect()
    };

    let mut order: Vec<u32> = (0..splats.len() as u32)
        .filter(|&i| splats[i as usize].is_some())
        .collect();
    order.sort_by(|&a, &b| {
        let za = splats[a as usize].as_ref().map_or(0.0, |s| s.proj.camera_depth);
        let zb = splats[b as usize].as_ref().map_or(0.0, |s| s.proj.camera_depth);
        za.total_cmp(&zb).then(a.cmp(&b))
    });

    let tiles_x = cam.width.div_ceil(TILE);
    let tiles_y = cam.height.div_ceil(TILE);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for &i in &order {
        let s = splats[i as usize].as_ref().expect("ordered splats are visible");
        // widened by one pixel, matching `tile_candidates`
        let Some((x0, y0, x1, y1)) = pixel_box(&s.proj, cam) else {
            continue;
        };
        let (x0, y0) = (x0.saturating_sub(1), y0.saturating_sub(1));
        let (x1, y1) = ((x1 + 1).min(cam.width - 1), (y1 + 1).min(cam.height - 1));
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                tiles[ty * tiles_x + tx].push(i);
            }
        }
    }
    Prepared {
        splats,
        tiles,
        tiles_x,
    }
}

#[derive(Clone, Copy, Debug)]
struct Contribution {
    /// Position in the tile list.
    local: u32,
    alpha: f64,
    gauss: f64,
    clamped: bool,
    transmittance: f64,
    dx: f64,
    dy: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct PixelResult {
    rgb: [f64; 3],
    weighted_depth: f64,
    alpha: f64,
}

/// The per-pixel fields of a splat, stored contiguously per tile.
#[derive(Clone, Copy, Debug)]
struct PackedSplat {
    u: f64,
    v: f64,
    radius: f64,
    conic: [f64; 3],
    opacity: f64,
    rgb: [f64; 3],
    depth: f64,
}

impl PackedSplat {
    fn new(s: &Splat) -> Self {
        let p = &s.proj;
        PackedSplat {
            u: p.mean2d.u,
            v: p.mean2d.v,
            radius: p.radius_px,
            conic: [p.conic[(0, 0)], p.conic[(0, 1)], p.conic[(1, 1)]],
            opacity: s.opacity,
            rgb: s.shaded.rgb,
            depth: p.camera_depth,
        }
    }
}

/// One tile's splats plus, per pixel, the candidates that may cover it.
struct TileWork {
    packed: Vec<PackedSplat>,
    offsets: Vec<usize>,
    entries: Vec<u32>,
}

impl TileWork {
    fn candidates(&self, k: usize) -> &[u32] {
        &self.entries[self.offsets[k]..self.offsets[k + 1]]
    }
}

fn composite_pixel(
    work: &TileWork,
    candidates: &[u32],
    x: usize,
    y: usize,
    mut record: Option<&mut Vec<Contribution>>,
) -> PixelResult {
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let mut out = PixelResult::default();
    let mut t = 1.0;
    for &local in candidates {
        let s = &work.packed[local as usize];
        let dx = px - s.u;
        let dy = py - s.v;
        if dx.abs() > s.radius || dy.abs() > s.radius {
            continue;
        }
        let q = &s.conic;
        let power = -0.5 * (q[0] * dx * dx + 2.0 * q[1] * dx * dy + q[2] * dy * dy);
        let gauss = power.exp();
        let raw = s.opacity * gauss;
        let (alpha, clamped) = if raw > ALPHA_MAX {
            (ALPHA_MAX, true)
        } else {
            (raw, false)
        };
        let w = alpha * t;
        for c in 0..3 {
            out.rgb[c] += w * s.rgb[c];
        }
        out.weighted_depth += w * s.depth;
        out.alpha += w;
        if let Some(rec) = record.as_deref_mut() {
            rec.push(Contribution {
                local,
                alpha,
                gauss,
                clamped,
                transmittance: t,
                dx,
                dy,
            });
        }
        t *= 1.0 - alpha;
        if t < TRANSMITTANCE_CUTOFF {
            break;
        }
    }
    out
}

fn finish_depth(r: &PixelResult, mode: DepthMode) -> f64 {
    match mode {
        DepthMode::Normalized => r.weighted_depth / r.alpha.max(DEPTH_WEIGHT_FLOOR),
        DepthMode::Accumulated => r.weighted_depth,
    }
}

fn tile_pixels(cam: &Camera, tiles_x: usize, t: usize) -> impl Iterator<Item = (usize, usize)> {
    let (tx, ty) = (t % tiles_x, t / tiles_x);
    let xs = tx * TILE..((tx + 1) * TILE).min(cam.width);
    let ys = ty * TILE..((ty + 1) * TILE).min(cam.height);
    ys.flat_map(move |y| xs.clone().map(move |x| (x, y)))
}

/// Pixel-center box `[x0, x1] × [y0, y1]` of a splat, clipped to the image;
/// `None` if empty.
fn pixel_box(p: &SplatProjection, cam: &Camera) -> Option<(usize, usize, usize, usize)> {
    let (u, v, r) = (p.mean2d.u, p.mean2d.v, p.radius_px);
    // pixel centers x + 0.5 within [u − r, u + r]
    let x0 = ((u - r - 0.5).ceil().max(0.0)) as usize;
    let y0 = ((v - r - 0.5).ceil().max(0.0)) as usize;
    let x1 = (u + r - 0.5).floor();
    let y1 = (v + r - 0.5).floor();
    if x1 < 0.0 || y1 < 0.0 {
        return None;
    }
    let x1 = (x1 as usize).min(cam.width - 1);
    let y1 = (y1 as usize).min(cam.height - 1);
    (x0 <= x1 && y0 <= y1).then_some((x0, y0, x1, y1))
}

/// Packed splats of tile `t` and, per pixel (row-major within the tile),
/// the tile-list positions whose box may cover it, in compositing order. The box is widened by one pixel so that
/// rounding can only add candidates; the exact test happens in
/// [`composite_pixel`].
fn tile_work(prep: &Prepared, cam: &Camera, t: usize) -> TileWork {
    let (tx, ty) = (t % prep.tiles_x, t / prep.tiles_x);
    let (ox, oy) = (tx * TILE, ty * TILE);
    let (tw, th) = (TILE.min(cam.width - ox), TILE.min(cam.height - oy));
    let boxes: Vec<Option<(usize, usize, usize, usize)>> = prep.tiles[t]
        .iter()
        .map(|&i| {
            let s = prep.splats[i as usize].as_ref().expect("tile entries are visible");
            let (x0, y0, x1, y1) = pixel_box(&s.proj, cam)?;
            let (x0, y0) = (x0.saturating_sub(1).max(ox), y0.saturating_sub(1).max(oy));
            let (x1, y1) = ((x1 + 1).min(ox + tw - 1), (y1 + 1).min(oy + th - 1));
            (x0 <= x1 && y0 <= y1).then_some((x0 - ox, y0 - oy, x1 - ox, y1 - oy))
        })
        .collect();
    let mut offsets = vec![0usize; tw * th + 1];
    for &(x0, y0, x1, y1) in boxes.iter().flatten() {
        for y in y0..=y1 {
            for x in x0..=x1 {
                offsets[y * tw + x + 1] += 1;
            }
        }
    }
    for k in 1..offsets.len() {
        offsets[k] += offsets[k - 1];
    }
    let mut fill = offsets.clone();
    let mut entries = vec![0u32; offsets[tw * th]];
    for (local, b) in boxes.iter().enumerate() {
        let Some((x0, y0, x1, y1)) = *b else { continue };
        for y in y0..=y1 {
            for x in x0..=x1 {
                let slot = &mut fill[y * tw + x];
                entries[*slot] = local as u32;
                *slot += 1;
            }
        }
    }
    let packed = prep.tiles[t]
        .iter()
        .map(|&i| PackedSplat::new(prep.splats[i as usize].as_ref().expect("tile entries are visible")))
        .collect();
    TileWork {
        packed,
        offsets,
        entries,
    }
}

fn check_inputs(gaussians: &[MaterializedGaussian], settings: &RenderSettings) -> Result<()> {
    if settings.sh_degree > 3 {
        return Err(Error::Domain(format!("SH degree {} exceeds 3", settings.sh_degree)));
    }
    if gaussians.len() > u32::MAX as usize {
        return Err(Error::contract("too many Gaussians"));
    }
    Ok(())
}

/// Render color, depth and alpha of `gaussians` through `cam` at the
/// camera's resolution.
pub fn render(gaussians: &[MaterializedGaussian], cam: &Camera, settings: &RenderSettings) -> Result<RenderOutput> {
    check_inputs(gaussians, settings)?;
    let prep = prepare(gaussians, cam, settings);
    Ok(forward_prepared(&prep, cam, settings, false).0)
}

/// Forward and reverse pass sharing one projection: `adjoint` turns the
/// render into a value of its own plus the adjoints of the render outputs.
/// Equivalent to [`render`] followed by [`render_backward`].
pub fn render_with_backward<T>(
    gaussians: &[MaterializedGaussian],
    cam: &Camera,
    settings: &RenderSettings,
    adjoint: impl FnOnce(&RenderOutput) -> Result<(T, RenderUpstream)>,
) -> Result<(RenderOutput, T, Vec<GaussianGrad>)> {
    check_inputs(gaussians, settings)?;
    let prep = prepare(gaussians, cam, settings);
    let (out, records) = forward_prepared(&prep, cam, settings, true);
    let (value, upstream) = adjoint(&out)?;
    check_upstream(cam, &upstream)?;
    let grads = backward_prepared(gaussians, &prep, &records, cam, settings, &upstream);
    Ok((out, value, grads))
}

fn check_upstream(cam: &Camera, upstream: &RenderUpstream) -> Result<()> {
    if upstream.color.width != cam.width
        || upstream.color.height != cam.height
        || !upstream.depth.same_shape(&upstream.alpha)
        || upstream.depth.width != cam.width
        || upstream.depth.height != cam.height
    {
        return Err(Error::contract("upstream adjoints do not match the render size"));
    }
    Ok(())
}

/// What the reverse pass needs from one tile of the forward pass.
struct TileRecord {
    work: TileWork,
    /// Per pixel, the compositing result and the range of its contributions.
    pixels: Vec<(PixelResult, usize, usize)>,
    contributions: Vec<Contribution>,
}

fn composite_tile(prep: &Prepared, cam: &Camera, t: usize, keep: bool) -> (Vec<((usize, usize), PixelResult)>, Option<TileRecord>) {
    let work = tile_work(prep, cam, t);
    let mut contributions = Vec::new();
    let mut pixels = Vec::new();
    let results = tile_pixels(cam, prep.tiles_x, t)
        .enumerate()
        .map(|(k, (x, y))| {
            let start = contributions.len();
            let rec = keep.then_some(&mut contributions);
            let r = composite_pixel(&work, work.candidates(k), x, y, rec);
            if keep {
                pixels.push((r, start, contributions.len()));
            }
            ((x, y), r)
        })
        .collect();
    let record = keep.then(|| TileRecord {
        work,
        pixels,
        contributions,
    });
    (results, record)
}

/// Composite every tile; with `keep`, also return the per-tile records the
/// reverse pass replays.
fn forward_prepared(prep: &Prepared, cam: &Camera, settings: &RenderSettings, keep: bool) -> (RenderOutput, Vec<TileRecord>) {
    let tile_count = prep.tiles.len();
    let run_tile = |t: usize| composite_tile(prep, cam, t, keep);
    let tiles: Vec<_> = if settings.parallel {
        (0..tile_count).into_par_iter().map(run_tile).collect()
    } else {
        (0..tile_count).map(run_tile).collect()
    };

    let mut out = RenderOutput {
        color: RgbImage::zeros(cam.width, cam.height),
        depth: ScalarMap::zeros(cam.width, cam.height),
        alpha: ScalarMap::zeros(cam.width, cam.height),
    };
    let mut records = Vec::new();
    for (results, record) in tiles {
        for ((x, y), r) in results {
            out.color.set(x, y, r.rgb);
            out.depth.set(x, y, finish_depth(&r, settings.depth_mode));
            out.alpha.set(x, y, r.alpha);
        }
        records.extend(record);
    }
    (out, records)
}

/// Reverse pass of [`render`]: adjoints of every Gaussian's activated
/// attributes given adjoints of the render outputs. Culled Gaussians
/// receive zero gradient.
pub fn render_backward(
    gaussians: &[MaterializedGaussian],
    cam: &Camera,
    settings: &RenderSettings,
    upstream: &RenderUpstream,
) -> Result<Vec<GaussianGrad>> {
    check_inputs(gaussians, settings)?;
    check_upstream(cam, upstream)?;
    let prep = prepare(gaussians, cam, settings);
    let (_, records) = forward_prepared(&prep, cam, settings, true);
    Ok(backward_prepared(gaussians, &prep, &records, cam, settings, upstream))
}

fn backward_prepared(
    gaussians: &[MaterializedGaussian],
    prep: &Prepared,
    records: &[TileRecord],
    cam: &Camera,
    settings: &RenderSettings,
    upstream: &RenderUpstream,
) -> Vec<GaussianGrad> {
    let mode = settings.depth_mode;

    // Per tile, adjoints indexed by tile-list position.
    let run_tile = |t: usize| -> Vec<Option<SplatAdjoint>> {
        let rec = &records[t];
        let work = &rec.work;
        let mut partials: Vec<Option<SplatAdjoint>> = vec![None; prep.tiles[t].len()];
        for ((x, y), &(r, start, end)) in tile_pixels(cam, prep.tiles_x, t).zip(&rec.pixels) {
            let contribs = &rec.contributions[start..end];
            if contribs.is_empty() {
                continue;
            }
            let g_rgb = upstream.color.get(x, y);
            let g_depth = upstream.depth.get(x, y);
            let mut g_alpha = upstream.alpha.get(x, y);
            let g_wz = match mode {
                DepthMode::Normalized => {
                    if r.alpha > DEPTH_WEIGHT_FLOOR {
                        g_alpha -= g_depth * r.weighted_depth / (r.alpha * r.alpha);
                        g_depth / r.alpha
                    } else {
                        g_depth / DEPTH_WEIGHT_FLOOR
                    }
                }
                DepthMode::Accumulated => g_depth,
            };

            // suffix = Σ_{j>k} w_j s_j with s_j = g_rgb·c_j + g_wz·z_j + g_alpha
            let mut suffix = 0.0;
            for c in contribs.iter().rev() {
                let s = &work.packed[c.local as usize];
                let rgb = &s.rgb;
                let z = s.depth;
                let sk = g_rgb[0] * rgb[0] + g_rgb[1] * rgb[1] + g_rgb[2] * rgb[2] + g_wz * z + g_alpha;
                let w = c.alpha * c.transmittance;
                let g_a = c.transmittance * sk - suffix / (1.0 - c.alpha);
                suffix += w * sk;

                let mut adj = SplatAdjoint {
                    color: [w * g_rgb[0], w * g_rgb[1], w * g_rgb[2]],
                    depth: w * g_wz,
                    ..Default::default()
                };
                if !c.clamped {
                    adj.opacity = g_a * c.gauss;
                    let g_power = g_a * c.alpha;
                    let q = &s.conic;
                    adj.mean2d = g_power * Vector2::new(q[0] * c.dx + q[1] * c.dy, q[1] * c.dx + q[2] * c.dy);
                    adj.conic = Matrix2::new(
                        c.dx * c.dx,
                        c.dx * c.dy,
                        c.dx * c.dy,
                        c.dy * c.dy,
                    ) * (-0.5 * g_power);
                }
                partials[c.local as usize].get_or_insert_with(SplatAdjoint::default).add(&adj);
            }
        }
        partials
    };

    let tile_count = prep.tiles.len();
    let per_tile: Vec<Vec<Option<SplatAdjoint>>> = if settings.parallel {
        (0..tile_count).into_par_iter().map(run_tile).collect()
    } else {
        (0..tile_count).map(run_tile).collect()
    };
    let mut adjoints = vec![SplatAdjoint::default(); gaussians.len()];
    let mut touched = vec![false; gaussians.len()];
    for (t, partials) in per_tile.iter().enumerate() {
        for (local, adj) in partials.iter().enumerate() {
            if let Some(adj) = adj {
                let i = prep.tiles[t][local] as usize;
                adjoints[i].add(adj);
                touched[i] = true;
            }
        }
    }

    let backward_one = |i: usize| -> GaussianGrad {
        match (&prep.splats[i], touched[i]) {
            (Some(s), true) => project::backward_gaussian(
                &gaussians[i],
                cam,
                &s.proj,
                &s.shaded,
                settings.sh_degree,
                &adjoints[i],
            ),
            _ => GaussianGrad::zero(),
        }
    };
    if settings.parallel {
        (0..gaussians.len()).into_par_iter().map(backward_one).collect()
    } else {
        (0..gaussians.len()).map(backward_one).collect()
    }
}
