//! Camera JSON: intrinsics, image size and a row-major 4×4 camera-to-world
//! matrix.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Pose};

use super::io::{read_bytes, write_atomic};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub cam_to_world: Vec<f64>,
}

impl From<&Camera> for CameraRecord {
    fn from(c: &Camera) -> Self {
        let r = &c.cam_to_world.rotation;
        let t = &c.cam_to_world.translation;
        let mut m = Vec::with_capacity(16);
        for row in 0..3 {
            m.extend_from_slice(&[r[(row, 0)], r[(row, 1)], r[(row, 2)], t[row]]);
        }
        m.extend_from_slice(&[0.0, 0.0, 0.0, 1.0]);
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            cam_to_world: m,
        }
    }
}

impl CameraRecord {
    pub fn to_camera(&self) -> Result<Camera> {
        let m = &self.cam_to_world;
        if m.len() != 16 {
            return Err(Error::contract(format!("cam_to_world has {} entries, expected 16", m.len())));
        }
        let last = &m[12..16];
        if last.iter().zip([0.0, 0.0, 0.0, 1.0]).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::contract("cam_to_world bottom row must be [0, 0, 0, 1]"));
        }
        let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let t = Vector3::new(m[3], m[7], m[11]);
        Camera::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height, Pose::new(r, t)?)
    }
}

pub fn encode(cam: &Camera) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(&CameraRecord::from(cam))?)
}

pub fn decode(bytes: &[u8]) -> Result<Camera> {
    serde_json::from_slice::<CameraRecord>(bytes)?.to_camera()
}

pub fn write(path: &Path, cam: &Camera) -> Result<()> {
    write_atomic(path, &encode(cam)?)
}

pub fn read(path: &Path) -> Result<Camera> {
    decode(&read_bytes(path)?)
}
