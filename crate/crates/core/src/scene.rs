//! DoF-separated scene representation.
//!
//! Every Gaussian is tied to one pixel of one view. Its position is not
//! stored directly: it is the unprojection of the pixel center, shifted by a
//! bounded sub-pixel offset, at the view's per-pixel depth. The depth is the
//! ray-aligned degree of freedom, the offset carries the two image-plane
//! degrees of freedom.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{Camera, PixelCoord, WorldPoint};
use crate::image::{RgbImage, ScalarMap};
use crate::rasterizer::sh::SH_C0;
use crate::rasterizer::GaussianGrad;

/// Number of SH coefficients per color channel at degree 3.
pub const SH_COEFFS: usize = 16;

/// Largest sub-pixel displacement produced by [`bounded_offset`].
pub const MAX_OFFSET: f64 = 0.5;

/// Initial opacity of every pixel Gaussian.
pub const INIT_OPACITY: f64 = 0.1;

/// `tanh` is capped at this magnitude. In floating point `tanh(o)` rounds
/// to exactly ±1 for |o| ≳ 19, which would put the sample on the pixel
/// border; the cap keeps it strictly inside with a margin that survives
/// rounding of `i + 0.5 + δ`.
pub const OFFSET_SATURATION: f64 = 1.0 - 1e-9;

fn capped_tanh(o: f64) -> f64 {
    o.tanh().clamp(-OFFSET_SATURATION, OFFSET_SATURATION)
}

/// Sub-pixel offset `0.5·tanh(o)`, strictly inside `(-0.5, 0.5)`.
pub fn bounded_offset(o: [f64; 2]) -> [f64; 2] {
    [MAX_OFFSET * capped_tanh(o[0]), MAX_OFFSET * capped_tanh(o[1])]
}

/// Derivative of [`bounded_offset`] per component (zero past the cap).
pub fn bounded_offset_derivative(o: [f64; 2]) -> [f64; 2] {
    o.map(|v| {
        let t = v.tanh();
        if t.abs() >= OFFSET_SATURATION {
            0.0
        } else {
            MAX_OFFSET * (1.0 - t * t)
        }
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Trainable parameter groups; the optimizer keeps one learning rate and
/// one pair of moment buffers per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamClass {
    LogDepth,
    RawOffset,
    LogScale,
    Rotation,
    OpacityLogit,
    Sh,
    /// Raw 3D means; only present in the free-position baseline.
    FreeMean,
}

impl ParamClass {
    pub const ALL: [ParamClass; 7] = [
        ParamClass::LogDepth,
        ParamClass::RawOffset,
        ParamClass::LogScale,
        ParamClass::Rotation,
        ParamClass::OpacityLogit,
        ParamClass::Sh,
        ParamClass::FreeMean,
    ];

    /// Scalars per Gaussian.
    pub fn width(self) -> usize {
        match self {
            ParamClass::LogDepth | ParamClass::OpacityLogit => 1,
            ParamClass::RawOffset => 2,
            ParamClass::LogScale | ParamClass::FreeMean => 3,
            ParamClass::Rotation => 4,
            ParamClass::Sh => SH_COEFFS * 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamClass::LogDepth => "log_depth",
            ParamClass::RawOffset => "raw_offset",
            ParamClass::LogScale => "log_scale",
            ParamClass::Rotation => "rotation",
            ParamClass::OpacityLogit => "opacity_logit",
            ParamClass::Sh => "sh_coeffs",
            ParamClass::FreeMean => "free_means",
        }
    }
}

/// Per-view trainable parameters on the stride grid.
///
/// All arrays are row-major over grid cells; cell `(gx, gy)` owns image
/// pixel `(gx·stride, gy·stride)`. `sh_coeffs` is laid out
/// `[cell][coefficient][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewParameters {
    pub image_width: usize,
    pub image_height: usize,
    pub stride: usize,
    pub log_depth: Vec<f64>,
    pub raw_offset: Vec<f64>,
    pub log_scale: Vec<f64>,
    pub rotation: Vec<f64>,
    pub opacity_logit: Vec<f64>,
    pub sh_coeffs: Vec<f64>,
    /// Free 3D means replacing the depth/offset parameterization. `None` for
    /// the DoF-separated model.
    pub free_means: Option<Vec<f64>>,
}

impl ViewParameters {
    pub fn grid_width(&self) -> usize {
        self.image_width.div_ceil(self.stride)
    }

    pub fn grid_height(&self) -> usize {
        self.image_height.div_ceil(self.stride)
    }

    pub fn len(&self) -> usize {
        self.grid_width() * self.grid_height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Image pixel owned by grid cell `n`.
    pub fn cell_pixel(&self, n: usize) -> (usize, usize) {
        let gw = self.grid_width();
        ((n % gw) * self.stride, (n / gw) * self.stride)
    }

    /// Zero-initialized parameters (unit depth, identity rotation).
    pub fn zeros(image_width: usize, image_height: usize, stride: usize) -> Result<Self> {
        if image_width == 0 || image_height == 0 || stride == 0 {
            return Err(Error::contract("view dimensions and stride must be positive"));
        }
        let n = image_width.div_ceil(stride) * image_height.div_ceil(stride);
        let mut rotation = vec![0.0; 4 * n];
        for q in rotation.chunks_mut(4) {
            q[0] = 1.0;
        }
        Ok(Self {
            image_width,
            image_height,
            stride,
            log_depth: vec![0.0; n],
            raw_offset: vec![0.0; 2 * n],
            log_scale: vec![0.0; 3 * n],
            rotation,
            opacity_logit: vec![0.0; n],
            sh_coeffs: vec![0.0; SH_COEFFS * 3 * n],
            free_means: None,
        })
    }

    /// Initialize from an MVS-style depth map and the view's image.
    ///
    /// Offsets start at zero so the means reproduce the unprojected input
    /// point cloud; scales are isotropic with a screen footprint of about
    /// `stride / 2` pixels; opacity starts at 0.1; the SH DC term encodes
    /// the pixel color.
    pub fn initialize(
        cam: &Camera,
        depth: &ScalarMap,
        image: &RgbImage,
        stride: usize,
    ) -> Result<Self> {
        if depth.width != cam.width || depth.height != cam.height {
            return Err(Error::contract(format!(
                "depth map is {}x{}, camera is {}x{}",
                depth.width, depth.height, cam.width, cam.height
            )));
        }
        if !image.same_shape(&RgbImage::zeros(depth.width, depth.height)) {
            return Err(Error::contract("image and depth map sizes differ"));
        }
        let mut vp = Self::zeros(cam.width, cam.height, stride)?;
        let focal = 0.5 * (cam.fx + cam.fy);
        let opacity_logit = logit(INIT_OPACITY);
        for n in 0..vp.len() {
            let (px, py) = vp.cell_pixel(n);
            let d = depth.get(px, py);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Domain(format!(
                    "input depth at pixel ({px}, {py}) is not positive: {d}"
                )));
            }
            vp.log_depth[n] = d.ln();
            let s = (0.5 * stride as f64 * d / focal).ln();
            vp.log_scale[3 * n..3 * n + 3].fill(s);
            vp.opacity_logit[n] = opacity_logit;
            let rgb = image.get(px, py);
            for (c, v) in rgb.iter().enumerate() {
                vp.sh_coeffs[n * SH_COEFFS * 3 + c] = (v - 0.5) / SH_C0;
            }
        }
        Ok(vp)
    }

    pub fn class(&self, class: ParamClass) -> Option<&[f64]> {
        Some(match class {
            ParamClass::LogDepth => &self.log_depth,
            ParamClass::RawOffset => &self.raw_offset,
            ParamClass::LogScale => &self.log_scale,
            ParamClass::Rotation => &self.rotation,
            ParamClass::OpacityLogit => &self.opacity_logit,
            ParamClass::Sh => &self.sh_coeffs,
            ParamClass::FreeMean => return self.free_means.as_deref(),
        })
    }

    pub fn class_mut(&mut self, class: ParamClass) -> Option<&mut [f64]> {
        Some(match class {
            ParamClass::LogDepth => &mut self.log_depth,
            ParamClass::RawOffset => &mut self.raw_offset,
            ParamClass::LogScale => &mut self.log_scale,
            ParamClass::Rotation => &mut self.rotation,
            ParamClass::OpacityLogit => &mut self.opacity_logit,
            ParamClass::Sh => &mut self.sh_coeffs,
            ParamClass::FreeMean => return self.free_means.as_deref_mut(),
        })
    }

    /// Per-view depth map `D = exp(log_depth)` on the stride grid.
    pub fn depth_map(&self) -> ScalarMap {
        ScalarMap {
            width: self.grid_width(),
            height: self.grid_height(),
            data: self.log_depth.iter().map(|v| v.exp()).collect(),
        }
    }

    /// Check array lengths against the grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for class in ParamClass::ALL {
            if let Some(values) = self.class(class) {
                if values.len() != n * class.width() {
                    return Err(Error::contract(format!(
                        "{} has {} values, expected {}",
                        class.name(),
                        values.len(),
                        n * class.width()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Switch to the free-position baseline, seeding the means from the
    /// current depth/offset parameterization.
    pub fn to_free_positions(&mut self, cam: &Camera) {
        let mut means = Vec::with_capacity(3 * self.len());
        for n in 0..self.len() {
            means.extend_from_slice(self.reprojected_mean(cam, n).as_slice());
        }
        self.free_means = Some(means);
    }

    /// Pixel coordinate after the bounded offset, and the depth, of cell `n`.
    fn ray_sample(&self, n: usize) -> (PixelCoord, f64) {
        let (px, py) = self.cell_pixel(n);
        let delta = bounded_offset([self.raw_offset[2 * n], self.raw_offset[2 * n + 1]]);
        let p = PixelCoord::new(px as f64 + 0.5 + delta[0], py as f64 + 0.5 + delta[1]);
        (p, self.log_depth[n].exp())
    }

    fn reprojected_mean(&self, cam: &Camera, n: usize) -> WorldPoint {
        let (p, d) = self.ray_sample(n);
        cam.cam_to_world.apply(&cam.backproject(p, d))
    }

    /// Source-camera z of every cell's Gaussian on the stride grid. Equals
    /// [`depth_map`](Self::depth_map) unless positions are free.
    pub fn geometry_depth(&self, cam: &Camera) -> ScalarMap {
        if self.free_means.is_none() {
            return self.depth_map();
        }
        let data = (0..self.len()).map(|n| cam.world_to_camera(&self.mean(cam, n)).z).collect();
        ScalarMap {
            width: self.grid_width(),
            height: self.grid_height(),
            data,
        }
    }

    /// World-space mean of cell `n`.
    pub fn mean(&self, cam: &Camera, n: usize) -> WorldPoint {
        match &self.free_means {
            Some(m) => Vector3::new(m[3 * n], m[3 * n + 1], m[3 * n + 2]),
            None => self.reprojected_mean(cam, n),
        }
    }
}

/// Where a materialized Gaussian came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianSource {
    pub view: usize,
    pub cell: usize,
    /// Image pixel `(column, row)` of the owning view.
    pub pixel: (usize, usize),
}

/// World-space Gaussian with activated attributes, ready for rasterization.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterializedGaussian {
    pub mean: WorldPoint,
    pub scale: Vector3<f64>,
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub opacity: f64,
    pub sh: [[f64; 3]; SH_COEFFS],
    pub source: GaussianSource,
}

/// A calibrated view with its trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneView {
    pub camera: Camera,
    pub params: ViewParameters,
}

/// All views in one shared world frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub views: Vec<SceneView>,
}

impl Scene {
    pub fn new(views: Vec<SceneView>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::contract("a scene needs at least one view"));
        }
        for v in &views {
            v.params.validate()?;
            if v.params.image_width != v.camera.width || v.params.image_height != v.camera.height {
                return Err(Error::contract("view parameters do not match camera size"));
            }
        }
        Ok(Self { views })
    }

    pub fn gaussian_count(&self) -> usize {
        self.views.iter().map(|v| v.params.len()).sum()
    }

    pub fn cameras(&self) -> Vec<Camera> {
        self.views.iter().map(|v| v.camera).collect()
    }

    pub fn uses_free_positions(&self) -> bool {
        self.views.iter().any(|v| v.params.free_means.is_some())
    }
}

fn normalized_quaternion(q: &[f64]) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if n < 1e-300 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Materialize cell `n` of a view.
pub fn materialize_cell(vp: &ViewParameters, cam: &Camera, view: usize, n: usize) -> MaterializedGaussian {
    let mut sh = [[0.0; 3]; SH_COEFFS];
    let base = n * SH_COEFFS * 3;
    for (k, coeff) in sh.iter_mut().enumerate() {
        coeff.copy_from_slice(&vp.sh_coeffs[base + 3 * k..base + 3 * k + 3]);
    }
    MaterializedGaussian {
        mean: vp.mean(cam, n),
        scale: Vector3::new(
            vp.log_scale[3 * n].exp(),
            vp.log_scale[3 * n + 1].exp(),
            vp.log_scale[3 * n + 2].exp(),
        ),
        rotation: normalized_quaternion(&vp.rotation[4 * n..4 * n + 4]),
        opacity: sigmoid(vp.opacity_logit[n]),
        sh,
        source: GaussianSource {
            view,
            cell: n,
            pixel: vp.cell_pixel(n),
        },
    }
}

/// Materialize the Gaussians of one view in row-major cell order.
pub fn materialize_view(vp: &ViewParameters, cam: &Camera, view: usize) -> Vec<MaterializedGaussian> {
    (0..vp.len()).map(|n| materialize_cell(vp, cam, view, n)).collect()
}

/// Concatenation of every view's Gaussians, in view order.
pub fn materialize_scene(scene: &Scene) -> Vec<MaterializedGaussian> {
    let mut out = Vec::with_capacity(scene.gaussian_count());
    for (i, v) in scene.views.iter().enumerate() {
        out.extend(materialize_view(&v.params, &v.camera, i));
    }
    out
}

/// Adjoints mirroring [`ViewParameters`] for every view of a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffers {
    pub views: Vec<ViewParameters>,
}

impl GradientBuffers {
    pub fn zeros_like(scene: &Scene) -> Self {
        let views = scene
            .views
            .iter()
            .map(|v| {
                let p = &v.params;
                ViewParameters {
                    image_width: p.image_width,
                    image_height: p.image_height,
                    stride: p.stride,
                    log_depth: vec![0.0; p.log_depth.len()],
                    raw_offset: vec![0.0; p.raw_offset.len()],
                    log_scale: vec![0.0; p.log_scale.len()],
                    rotation: vec![0.0; p.rotation.len()],
                    opacity_logit: vec![0.0; p.opacity_logit.len()],
                    sh_coeffs: vec![0.0; p.sh_coeffs.len()],
                    free_means: p.free_means.as_ref().map(|m| vec![0.0; m.len()]),
                }
            })
            .collect();
        Self { views }
    }

    pub fn max_abs(&self) -> f64 {
        self.views
            .iter()
            .flat_map(|v| ParamClass::ALL.into_iter().filter_map(move |c| v.class(c)))
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.views
            .iter()
            .flat_map(|v| ParamClass::ALL.into_iter().filter_map(move |c| v.class(c)))
            .flatten()
            .all(|x| x.is_finite())
    }
}

/// Chain per-Gaussian adjoints (w.r.t. activated attributes) back to the raw
/// view parameters, accumulating into `out`.
///
/// `gaussians` and `grads` must be the materialization of `scene` and the
/// matching rasterizer output.
pub fn backprop_to_parameters(
    scene: &Scene,
    gaussians: &[MaterializedGaussian],
    grads: &[GaussianGrad],
    out: &mut GradientBuffers,
) -> Result<()> {
    if gaussians.len() != grads.len() || gaussians.len() != scene.gaussian_count() {
        return Err(Error::contract("gradient list does not match the scene"));
    }
    for (g, dg) in gaussians.iter().zip(grads) {
        let view = &scene.views[g.source.view];
        let vp = &view.params;
        let cam = &view.camera;
        let n = g.source.cell;
        let buf = &mut out.views[g.source.view];

        match buf.free_means.as_mut() {
            Some(m) => {
                for k in 0..3 {
                    m[3 * n + k] += dg.mean[k];
                }
            }
            None => {
                // mean = R·(((u−cx)/fx·d, (v−cy)/fy·d, d)) + t, d = exp(ℓ)
                let rel = g.mean - cam.cam_to_world.translation;
                buf.log_depth[n] += dg.mean.dot(&rel);
                let d = vp.log_depth[n].exp();
                let o = [vp.raw_offset[2 * n], vp.raw_offset[2 * n + 1]];
                let dd = bounded_offset_derivative(o);
                let r = &cam.cam_to_world.rotation;
                let du = dg.mean.dot(&r.column(0).into_owned()) * d / cam.fx;
                let dv = dg.mean.dot(&r.column(1).into_owned()) * d / cam.fy;
                buf.raw_offset[2 * n] += du * dd[0];
                buf.raw_offset[2 * n + 1] += dv * dd[1];
            }
        }

        for k in 0..3 {
            buf.log_scale[3 * n + k] += dg.scale[k] * g.scale[k];
        }

        // q̂ = q/|q|  ⇒  ∂L/∂q = (g − q̂(q̂·g)) / |q|
        let q = &vp.rotation[4 * n..4 * n + 4];
        let norm = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if norm > 1e-300 {
            let qh = g.rotation;
            let dot: f64 = (0..4).map(|k| qh[k] * dg.rotation[k]).sum();
            for k in 0..4 {
                buf.rotation[4 * n + k] += (dg.rotation[k] - qh[k] * dot) / norm;
            }
        }

        buf.opacity_logit[n] += dg.opacity * g.opacity * (1.0 - g.opacity);

        let base = n * SH_COEFFS * 3;
        for k in 0..SH_COEFFS {
            for c in 0..3 {
                buf.sh_coeffs[base + 3 * k + c] += dg.sh[k][c];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frustum_contains, so3_exp, Pose};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_camera(w: usize, h: usize) -> Camera {
        Camera::new(1.0, 1.0, 0.0, 0.0, w, h, Pose::identity()).unwrap()
    }

    #[test]
    fn bounded_offset_examples() {
        assert_eq!(bounded_offset([0.0, 0.0]), [0.0, 0.0]);
        let d = bounded_offset([100.0, -100.0]);
        assert!(d[0] > 0.499 && d[0] <= 0.5 && d[1] < -0.499 && d[1] >= -0.5);
        // scalar oracle: tanh(1) = (e² − 1)/(e² + 1)
        let e2 = std::f64::consts::E.powi(2);
        let expected = 0.5 * (e2 - 1.0) / (e2 + 1.0);
        let d = bounded_offset([1.0, -1.0]);
        assert!((d[0] - expected).abs() < 1e-15 && (d[1] + expected).abs() < 1e-15);
        assert!((expected - 0.380797).abs() < 1e-6);
    }

    #[test]
    fn two_by_two_identity_view() {
        let cam = identity_camera(2, 2);
        let vp = ViewParameters::zeros(2, 2, 1).unwrap();
        let gs = materialize_view(&vp, &cam, 0);
        assert_eq!(gs.len(), 4);
        for (n, g) in gs.iter().enumerate() {
            let (i, j) = (n % 2, n / 2);
            let expected = Vector3::new(i as f64 + 0.5, j as f64 + 0.5, 1.0);
            assert!((g.mean - expected).norm() < 1e-15);
            assert_eq!(g.source.pixel, (i, j));
        }
    }

    #[test]
    fn zero_offsets_lie_on_central_rays() {
        let pose = Pose::new(so3_exp(&Vector3::new(0.1, 0.2, -0.3)), Vector3::new(1.0, 0.0, 2.0)).unwrap();
        let cam = Camera::new(40.0, 42.0, 8.0, 7.0, 16, 14, pose).unwrap();
        let mut vp = ViewParameters::zeros(16, 14, 1).unwrap();
        for (n, v) in vp.log_depth.iter_mut().enumerate() {
            *v = 0.1 * (n % 7) as f64;
        }
        for g in materialize_view(&vp, &cam, 0) {
            let (i, j) = g.source.pixel;
            let (p, z) = crate::geometry::project(&g.mean, &cam).unwrap();
            assert!((p.u - (i as f64 + 0.5)).abs() < 1e-9);
            assert!((p.v - (j as f64 + 0.5)).abs() < 1e-9);
            assert!((z - vp.log_depth[g.source.cell].exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn every_gaussian_stays_in_its_frustum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cam = Camera::new(30.0, 30.0, 10.0, 9.0, 20, 17, Pose::identity()).unwrap();
        let mut vp = ViewParameters::zeros(20, 17, 1).unwrap();
        for v in vp.raw_offset.iter_mut() {
            *v = rng.random_range(-20.0..20.0);
        }
        for v in vp.log_depth.iter_mut() {
            *v = rng.random_range(-1.0..2.0);
        }
        for g in materialize_view(&vp, &cam, 0) {
            assert!(frustum_contains(g.source.pixel, &g.mean, &cam));
        }
    }

    #[test]
    fn scene_counts() {
        let one = Scene::new(vec![SceneView {
            camera: identity_camera(4, 4),
            params: ViewParameters::zeros(4, 4, 1).unwrap(),
        }])
        .unwrap();
        assert_eq!(materialize_scene(&one).len(), 16);

        let view = SceneView {
            camera: identity_camera(8, 8),
            params: ViewParameters::zeros(8, 8, 2).unwrap(),
        };
        let three = Scene::new(vec![view.clone(), view.clone(), view]).unwrap();
        assert_eq!(materialize_scene(&three).len(), 48);

        let odd = ViewParameters::zeros(9, 5, 2).unwrap();
        assert_eq!(odd.len(), 5 * 3);
    }

    #[test]
    fn identical_views_are_duplicated() {
        let view = SceneView {
            camera: identity_camera(3, 3),
            params: ViewParameters::zeros(3, 3, 1).unwrap(),
        };
        let scene = Scene::new(vec![view.clone(), view]).unwrap();
        let gs = materialize_scene(&scene);
        assert_eq!(gs.len(), 18);
        for k in 0..9 {
            assert_eq!(gs[k].mean, gs[k + 9].mean);
            assert_eq!(gs[k].source.view, 0);
            assert_eq!(gs[k + 9].source.view, 1);
        }
    }

    #[test]
    fn materialized_quaternions_are_unit() {
        let mut vp = ViewParameters::zeros(3, 3, 1).unwrap();
        for (k, v) in vp.rotation.iter_mut().enumerate() {
            *v = 0.3 + k as f64 * 0.7;
        }
        for g in materialize_view(&vp, &identity_camera(3, 3), 0) {
            let n: f64 = g.rotation.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
            assert!(g.opacity > 0.0 && g.opacity < 1.0);
        }
    }

    #[test]
    fn empty_scene_is_rejected() {
        assert!(Scene::new(vec![]).is_err());
    }
}
