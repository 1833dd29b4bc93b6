//! Procedural scenes with exact ground truth: analytic ray casting of a few
//! textured primitives gives true z-depth maps, and a controlled
//! perturbation of those maps stands in for a monocular depth estimate.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, PixelCoord, Pose};
use crate::image::{RgbImage, ScalarMap};

use super::dataset::{Dataset, DatasetView};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Ground plane plus a back wall.
    TwoPlanes,
    /// A sphere resting on the ground in front of a back wall.
    SphereOnPlane,
    /// Inside of a box: floor, ceiling, side and back walls.
    BoxRoom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    Checker,
    Stripes,
    Noise,
}

/// Description of a synthetic dataset. Every field has a default, so `{}`
/// is a valid spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SceneKind,
    pub texture: Texture,
    pub train_views: usize,
    pub test_views: usize,
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    /// Cameras sit on a horizontal arc spanning `±arc_deg` around the target.
    pub arc_deg: f64,
    pub radius: f64,
    pub camera_height: f64,
    /// Look-at point; each scene kind has its own default.
    pub target: Option<[f64; 3]>,
    /// Relative iid noise on the input depth: `D·(1 + σ·N(0, 1))`.
    pub depth_noise: f64,
    /// Relative texture-correlated error: `D·(1 + a·(2·τ − 1))`, where
    /// `τ ∈ [0, 1]` is the surface texture value seen at the pixel.
    pub bump_amplitude: f64,
    /// Texture period in world units.
    pub texture_period: f64,
    /// Supersampling factor per axis for the color images.
    pub supersample: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SceneKind::TwoPlanes,
            texture: Texture::Checker,
            train_views: 6,
            test_views: 2,
            width: 64,
            height: 64,
            fov_deg: 60.0,
            arc_deg: 25.0,
            radius: 4.0,
            camera_height: 1.6,
            target: None,
            depth_noise: 0.02,
            bump_amplitude: 0.0,
            texture_period: 0.5,
            supersample: 2,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Spec(m.to_string()));
        if self.train_views < 2 {
            return bad("need at least two training views");
        }
        if self.width < 16 || self.height < 16 {
            return bad("images must be at least 16x16");
        }
        if !(self.fov_deg > 1.0 && self.fov_deg < 170.0) {
            return bad("fov_deg must lie in (1, 170)");
        }
        if !(self.arc_deg >= 0.0 && self.arc_deg < 80.0) {
            return bad("arc_deg must lie in [0, 80)");
        }
        if !(self.radius > 0.5) || !self.camera_height.is_finite() {
            return bad("radius must exceed 0.5");
        }
        if !(self.depth_noise >= 0.0 && self.depth_noise < 0.5) || !(self.bump_amplitude >= 0.0 && self.bump_amplitude < 0.5) {
            return bad("depth perturbations must lie in [0, 0.5)");
        }
        if !(self.texture_period > 0.0) || self.supersample == 0 {
            return bad("texture_period and supersample must be positive");
        }
        if self.target.is_some_and(|t| t.iter().any(|v| !v.is_finite())) {
            return bad("target must be finite");
        }
        if self.kind == SceneKind::BoxRoom && self.radius > 2.3 {
            return bad("box_room cameras must stay inside the room (radius ≤ 2.3)");
        }
        Ok(())
    }
}

/// Surface hit by a ray: distance along the unit direction, surface id and
/// 2D texture coordinates.
#[derive(Clone, Copy, Debug)]
struct Hit {
    t: f64,
    surface: usize,
    uv: (f64, f64),
}

const WALL_Z: f64 = 1.5;
const SPHERE_CENTER: [f64; 3] = [0.0, 0.6, 0.2];
const SPHERE_RADIUS: f64 = 0.6;
const ROOM_HALF_WIDTH: f64 = 2.5;
const ROOM_HEIGHT: f64 = 3.0;
const ROOM_BACK: f64 = 2.0;
/// Steepest camera pitch the arc accepts; beyond it the look-at frame
/// degenerates against the world up axis.
const MAX_PITCH_DEG: f64 = 80.0;

fn plane_hit(o: &Vector3<f64>, d: &Vector3<f64>, axis: usize, at: f64) -> Option<f64> {
    if d[axis].abs() < 1e-12 {
        return None;
    }
    let t = (at - o[axis]) / d[axis];
    (t > 1e-9).then_some(t)
}

fn nearest(hits: impl IntoIterator<Item = Option<Hit>>) -> Option<Hit> {
    hits.into_iter()
        .flatten()
        .min_by(|a, b| a.t.total_cmp(&b.t))
}

fn cast(kind: SceneKind, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let floor = || {
        plane_hit(o, d, 1, 0.0).map(|t| {
            let p = o + d * t;
            Hit { t, surface: 0, uv: (p.x, p.z) }
        })
    };
    let back = |z: f64| {
        plane_hit(o, d, 2, z).map(|t| {
            let p = o + d * t;
            Hit { t, surface: 1, uv: (p.x, p.y) }
        })
    };
    match kind {
        SceneKind::TwoPlanes => nearest([floor(), back(WALL_Z)]),
        SceneKind::SphereOnPlane => {
            let c = Vector3::from(SPHERE_CENTER);
            let oc = o - c;
            let b = oc.dot(d);
            let disc = b * b - (oc.norm_squared() - SPHERE_RADIUS * SPHERE_RADIUS);
            let sphere = (disc >= 0.0)
                .then(|| -b - disc.sqrt())
                .filter(|t| *t > 1e-9)
                .map(|t| {
                    let n = (o + d * t - c) / SPHERE_RADIUS;
                    let u = n.z.atan2(n.x) * SPHERE_RADIUS;
                    let v = n.y.clamp(-1.0, 1.0).acos() * SPHERE_RADIUS;
                    Hit { t, surface: 2, uv: (u, v) }
                });
            nearest([floor(), back(WALL_Z), sphere])
        }
        SceneKind::BoxRoom => {
            let ceiling = plane_hit(o, d, 1, ROOM_HEIGHT).map(|t| {
                let p = o + d * t;
                Hit { t, surface: 3, uv: (p.x, p.z) }
            });
            let side = |x: f64, id: usize| {
                plane_hit(o, d, 0, x).map(|t| {
                    let p = o + d * t;
                    Hit { t, surface: id, uv: (p.z, p.y) }
                })
            };
            nearest([
                floor(),
                back(ROOM_BACK),
                ceiling,
                side(-ROOM_HALF_WIDTH, 4),
                side(ROOM_HALF_WIDTH, 5),
            ])
        }
    }
}

/// Smooth value noise on an integer lattice, hashed from `seed`.
#[derive(Clone, Copy, Debug)]
struct ValueNoise {
    seed: u64,
}

impl ValueNoise {
    fn lattice(&self, i: i64, j: i64) -> f64 {
        // splitmix64 of the lattice coordinates
        let mut z = self
            .seed
            .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add((j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Value in `[0, 1]` at `(x, y)` in lattice units.
    fn at(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = (x.floor(), y.floor());
        let (i, j) = (fx as i64, fy as i64);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sy) = (smooth(x - fx), smooth(y - fy));
        let a = self.lattice(i, j) + (self.lattice(i + 1, j) - self.lattice(i, j)) * sx;
        let b = self.lattice(i, j + 1) + (self.lattice(i + 1, j + 1) - self.lattice(i, j + 1)) * sx;
        a + (b - a) * sy
    }
}

const PALETTE: [([f64; 3], [f64; 3]); 6] = [
    ([0.85, 0.80, 0.70], [0.25, 0.30, 0.35]),
    ([0.90, 0.45, 0.30], [0.20, 0.25, 0.60]),
    ([0.30, 0.75, 0.40], [0.95, 0.90, 0.30]),
    ([0.70, 0.70, 0.75], [0.35, 0.20, 0.30]),
    ([0.40, 0.60, 0.85], [0.90, 0.85, 0.80]),
    ([0.80, 0.35, 0.55], [0.30, 0.50, 0.30]),
];

/// Texture value in `[0, 1]` at a hit.
fn texture_value(texture: Texture, period: f64, noise: &ValueNoise, hit: &Hit) -> f64 {
    let (u, v) = (hit.uv.0 / period, hit.uv.1 / period);
    match texture {
        Texture::Checker => ((u.floor() + v.floor()).rem_euclid(2.0) == 0.0) as u8 as f64,
        Texture::Stripes => 0.5 + 0.5 * (std::f64::consts::TAU * (u + 0.5 * v)).sin(),
        Texture::Noise => noise.at(2.0 * u + 17.0 * hit.surface as f64, 2.0 * v),
    }
}

fn shade(texture: Texture, period: f64, noise: &ValueNoise, hit: &Hit) -> [f64; 3] {
    let mix = texture_value(texture, period, noise, hit);
    let (a, b) = PALETTE[hit.surface % PALETTE.len()];
    std::array::from_fn(|c| a[c] * mix + b[c] * (1.0 - mix))
}

fn target_point(spec: &SynthSpec) -> Vector3<f64> {
    if let Some(t) = spec.target {
        return Vector3::from(t);
    }
    match spec.kind {
        SceneKind::TwoPlanes => Vector3::new(0.0, 0.6, 0.5),
        SceneKind::SphereOnPlane => Vector3::new(0.0, 0.5, 0.2),
        SceneKind::BoxRoom => Vector3::new(0.0, 1.2, 0.8),
    }
}

/// Camera `k` of `count` evenly spread over the arc (a single camera sits
/// in the middle). Test cameras interleave with training cameras by using
/// a half-step phase.
fn arc_camera(spec: &SynthSpec, k: usize, count: usize, phase: f64) -> Result<Camera> {
    let span = spec.arc_deg.to_radians();
    let s = if count <= 1 {
        0.5
    } else {
        ((k as f64 + phase) / (count - 1) as f64).min(1.0)
    };
    let phi = -span + 2.0 * span * s;
    let target = target_point(spec);
    let eye = Vector3::new(
        target.x + spec.radius * phi.sin(),
        spec.camera_height,
        target.z - spec.radius * phi.cos(),
    );
    if eye.y <= 0.0 {
        return Err(Error::Spec(format!("degenerate camera placement: eye at height {} is not above the floor", eye.y)));
    }
    let forward = (target - eye).normalize();
    if forward.y.abs() > MAX_PITCH_DEG.to_radians().sin() {
        return Err(Error::Spec(format!(
            "degenerate camera placement: view pitched more than {MAX_PITCH_DEG}° from horizontal"
        )));
    }
    let pose = Pose::look_at(eye, target, Vector3::new(0.0, 1.0, 0.0))
        .map_err(|e| Error::Spec(format!("degenerate camera placement: {e}")))?;
    let f = 0.5 * spec.width as f64 / (0.5 * spec.fov_deg.to_radians()).tan();
    Camera::new(f, f, 0.5 * spec.width as f64, 0.5 * spec.height as f64, spec.width, spec.height, pose)
}

/// Ray-cast products of one camera.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Supersampled color.
    pub image: RgbImage,
    /// Exact z-depth at pixel centers.
    pub depth: ScalarMap,
    /// Texture value at pixel centers.
    pub texture: ScalarMap,
}

/// Ray-cast one camera. Independent of the rasterizer.
pub fn render_ground_truth(spec: &SynthSpec, cam: &Camera) -> Result<GroundTruth> {
    let noise = ValueNoise { seed: spec.seed ^ 0x5EED };
    let origin = cam.center();
    let rot = cam.cam_to_world.rotation;
    let ray = |u: f64, v: f64| -> Result<(Hit, Vector3<f64>)> {
        let dir_cam = cam.backproject(PixelCoord::new(u, v), 1.0);
        let dir = (rot * dir_cam).normalize();
        let hit = cast(spec.kind, &origin, &dir)
            .ok_or_else(|| Error::Spec(format!("ray through ({u:.1}, {v:.1}) hits nothing")))?;
        Ok((hit, dir))
    };
    let mut depth = ScalarMap::zeros(cam.width, cam.height);
    let mut texture = ScalarMap::zeros(cam.width, cam.height);
    let mut image = RgbImage::zeros(cam.width, cam.height);
    let ss = spec.supersample;
    for y in 0..cam.height {
        for x in 0..cam.width {
            let c = PixelCoord::center_of(x, y);
            let (hit, dir) = ray(c.u, c.v)?;
            let z = (rot.transpose() * dir).z * hit.t;
            depth.set(x, y, z);
            texture.set(x, y, texture_value(spec.texture, spec.texture_period, &noise, &hit));
            let mut rgb = [0.0; 3];
            for sy in 0..ss {
                for sx in 0..ss {
                    let u = x as f64 + (sx as f64 + 0.5) / ss as f64;
                    let v = y as f64 + (sy as f64 + 0.5) / ss as f64;
                    let (h, _) = ray(u, v)?;
                    let col = shade(spec.texture, spec.texture_period, &noise, &h);
                    for k in 0..3 {
                        rgb[k] += col[k];
                    }
                }
            }
            let inv = 1.0 / (ss * ss) as f64;
            image.set(x, y, rgb.map(|v| v * inv));
        }
    }
    Ok(GroundTruth { image, depth, texture })
}

/// Degrade a true depth map into a plausible estimate. A zero perturbation
/// returns `gt` bitwise.
pub fn perturb_depth(gt: &ScalarMap, texture: &ScalarMap, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> ScalarMap {
    let mut out = gt.clone();
    for y in 0..gt.height {
        for x in 0..gt.width {
            let n: f64 = StandardNormal.sample(rng);
            let b = texture.get(x, y);
            let factor = (1.0 + spec.depth_noise * n) * (1.0 + spec.bump_amplitude * (2.0 * b - 1.0));
            out.set(x, y, gt.get(x, y) * factor.max(0.05));
        }
    }
    out
}

/// Build the dataset in memory. Training views carry the perturbed depth as
/// input; ground truth is kept for every view.
pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut views = Vec::with_capacity(spec.train_views);
    for k in 0..spec.train_views {
        let camera = arc_camera(spec, k, spec.train_views, 0.0)?;
        let gt = render_ground_truth(spec, &camera)?;
        let input = perturb_depth(&gt.depth, &gt.texture, spec, &mut rng);
        views.push(DatasetView {
            name: format!("view_{k:03}"),
            camera,
            image: gt.image,
            depth: Some(input),
            gt_depth: Some(gt.depth),
        });
    }
    let mut test_views = Vec::with_capacity(spec.test_views);
    for k in 0..spec.test_views {
        // test cameras sit between training cameras
        let step = (spec.train_views - 1) as f64 / spec.test_views as f64;
        let pos = (k as f64 + 0.5) * step;
        let camera = arc_camera(spec, pos.floor() as usize, spec.train_views, pos.fract())?;
        let gt = render_ground_truth(spec, &camera)?;
        test_views.push(DatasetView {
            name: format!("test_{k:03}"),
            camera,
            image: gt.image,
            depth: None,
            gt_depth: Some(gt.depth),
        });
    }
    Ok(Dataset {
        views,
        test_views,
        spec: Some(spec.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unproject;

    #[test]
    fn ground_truth_depth_lies_on_surfaces() {
        for scene in [SceneKind::TwoPlanes, SceneKind::SphereOnPlane, SceneKind::BoxRoom] {
            let spec = SynthSpec {
                kind: scene,
                width: 24,
                height: 20,
                radius: 2.0,
                supersample: 1,
                ..Default::default()
            };
            let cam = arc_camera(&spec, 1, 3, 0.0).unwrap();
            let depth = render_ground_truth(&spec, &cam).unwrap().depth;
            for y in 0..cam.height {
                for x in 0..cam.width {
                    let p = unproject(PixelCoord::center_of(x, y), depth.get(x, y), &cam).unwrap();
                    let c = Vector3::from(SPHERE_CENTER);
                    let on_surface = p.y.abs() < 1e-9
                        || (p.z - WALL_Z).abs() < 1e-9
                        || (p.z - ROOM_BACK).abs() < 1e-9
                        || (p.y - ROOM_HEIGHT).abs() < 1e-9
                        || (p.x.abs() - ROOM_HALF_WIDTH).abs() < 1e-9
                        || ((p - c).norm() - SPHERE_RADIUS).abs() < 1e-9;
                    assert!(on_surface, "{scene:?} pixel ({x},{y}) -> {p:?}");
                }
            }
        }
    }

    #[test]
    fn deterministic_and_perturbation_statistics() {
        let spec = SynthSpec {
            width: 32,
            height: 32,
            train_views: 2,
            test_views: 1,
            depth_noise: 0.02,
            ..Default::default()
        };
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.views[1].depth, b.views[1].depth);
        let v = &a.views[0];
        let (gt, d) = (v.gt_depth.as_ref().unwrap(), v.depth.as_ref().unwrap());
        let rel: Vec<f64> = gt.data.iter().zip(&d.data).map(|(g, x)| x / g - 1.0).collect();
        let sd = (rel.iter().map(|r| r * r).sum::<f64>() / rel.len() as f64).sqrt();
        assert!((sd - 0.02).abs() < 0.004, "relative noise sd {sd}");
        let other = synthesize(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(other.views[0].depth, a.views[0].depth);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            SynthSpec { train_views: 1, ..Default::default() },
            SynthSpec { width: 8, ..Default::default() },
            SynthSpec { fov_deg: 0.0, ..Default::default() },
            SynthSpec { depth_noise: -0.1, ..Default::default() },
            SynthSpec { kind: SceneKind::BoxRoom, radius: 4.0, ..Default::default() },
        ] {
            assert!(matches!(synthesize(&spec), Err(Error::Spec(_))));
        }
    }
}
