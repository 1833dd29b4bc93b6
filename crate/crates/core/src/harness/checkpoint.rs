//! Binary checkpoints of a full scene.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "GSDS1"  u8 version  u32 view_count
//! per view:
//!   f64 fx fy cx cy   u32 width height   f64[12] cam_to_world rows 0..3
//!   u32 stride   u8 position_mode (0 = ray-anchored, 1 = free)
//!   arrays, each: u8 rank, u32 dims[rank], f64 values
//!     log_depth [N], raw_offset [N,2], log_scale [N,3], rotation [N,4],
//!     opacity_logit [N], sh [N,16,3], then free_means [N,3] if mode = 1
//! ```

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Pose};
use crate::scene::{ParamClass, Scene, SceneView, ViewParameters, SH_COEFFS};

use super::io::{read_bytes, write_atomic};

pub const MAGIC: &[u8; 5] = b"GSDS1";
pub const VERSION: u8 = 1;

const ARRAYS: [ParamClass; 6] = [
    ParamClass::LogDepth,
    ParamClass::RawOffset,
    ParamClass::LogScale,
    ParamClass::Rotation,
    ParamClass::OpacityLogit,
    ParamClass::Sh,
];

fn shape(class: ParamClass, n: usize) -> Vec<usize> {
    match class {
        ParamClass::LogDepth | ParamClass::OpacityLogit => vec![n],
        ParamClass::Sh => vec![n, SH_COEFFS, 3],
        c => vec![n, c.width()],
    }
}

fn u32_of(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::contract(format!("{v} does not fit the checkpoint format")))
}

pub fn encode(scene: &Scene) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&u32_of(scene.views.len())?);
    for view in &scene.views {
        let c = &view.camera;
        for v in [c.fx, c.fy, c.cx, c.cy] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&u32_of(c.width)?);
        out.extend_from_slice(&u32_of(c.height)?);
        let (r, t) = (&c.cam_to_world.rotation, &c.cam_to_world.translation);
        for row in 0..3 {
            for v in [r[(row, 0)], r[(row, 1)], r[(row, 2)], t[row]] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let p = &view.params;
        out.extend_from_slice(&u32_of(p.stride)?);
        out.push(p.free_means.is_some() as u8);
        let n = p.len();
        let classes = ARRAYS.iter().copied().chain(p.free_means.is_some().then_some(ParamClass::FreeMean));
        for class in classes {
            let dims = shape(class, n);
            out.push(dims.len() as u8);
            for d in &dims {
                out.extend_from_slice(&u32_of(*d)?);
            }
            for v in p.class(class).expect("present") {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.bytes.len(), format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let at = self.pos;
        let v = f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::format(at, format!("non-finite {what}")));
        }
        Ok(v)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Scene> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic"));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let count = r.u32("view count")?;
    if count == 0 {
        return Err(Error::format(r.pos - 4, "checkpoint has no views"));
    }
    let mut views = Vec::new();
    for _ in 0..count {
        let view_at = r.pos;
        let intr = [r.f64("fx")?, r.f64("fy")?, r.f64("cx")?, r.f64("cy")?];
        let (w, h) = (r.u32("width")?, r.u32("height")?);
        let mut m = [0.0; 12];
        for v in &mut m {
            *v = r.f64("pose")?;
        }
        let rot = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let pose = Pose::new(rot, Vector3::new(m[3], m[7], m[11]))
            .map_err(|e| Error::format(view_at, format!("invalid pose: {e}")))?;
        let camera = Camera::new(intr[0], intr[1], intr[2], intr[3], w, h, pose)
            .map_err(|e| Error::format(view_at, format!("invalid camera: {e}")))?;
        let stride_at = r.pos;
        let stride = r.u32("stride")?;
        let mut params =
            ViewParameters::zeros(w, h, stride).map_err(|e| Error::format(stride_at, e.to_string()))?;
        let mode_at = r.pos;
        let free = match r.u8("position mode")? {
            0 => false,
            1 => true,
            m => return Err(Error::format(mode_at, format!("unknown position mode {m}"))),
        };
        if free {
            params.free_means = Some(vec![0.0; 3 * params.len()]);
        }
        let n = params.len();
        let classes = ARRAYS.iter().copied().chain(free.then_some(ParamClass::FreeMean));
        for class in classes {
            let at = r.pos;
            let rank = r.u8("array rank")? as usize;
            let dims = (0..rank).map(|_| r.u32("array dims")).collect::<Result<Vec<_>>>()?;
            let want = shape(class, n);
            if dims != want {
                return Err(Error::format(at, format!("{} has shape {dims:?}, expected {want:?}", class.name())));
            }
            for v in params.class_mut(class).expect("allocated") {
                *v = r.f64(class.name())?;
            }
        }
        views.push(SceneView { camera, params });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Scene::new(views)
}

pub fn save(path: &Path, scene: &Scene) -> Result<()> {
    write_atomic(path, &encode(scene)?)
}

pub fn load(path: &Path) -> Result<Scene> {
    decode(&read_bytes(path)?)
}
