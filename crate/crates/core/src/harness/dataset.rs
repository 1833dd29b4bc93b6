//! On-disk dataset layout: a `manifest.json` listing views, with one PPM
//! image, one camera JSON and optionally one PFM depth map per view. Ground
//! truth depth, when known, is stored alongside with a `gt_` prefix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::image::{RgbImage, ScalarMap};
use crate::scene::{Scene, SceneView, ViewParameters};

use super::io::{read_bytes, write_atomic};
use super::synth::SynthSpec;
use super::{camera_json, pfm, ppm};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetView {
    pub name: String,
    pub camera: Camera,
    pub image: RgbImage,
    /// Input depth estimate (training views only).
    pub depth: Option<ScalarMap>,
    pub gt_depth: Option<ScalarMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub views: Vec<DatasetView>,
    pub test_views: Vec<DatasetView>,
    pub spec: Option<SynthSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub image: Option<String>,
    pub camera: Option<String>,
    pub depth: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub views: Vec<ManifestEntry>,
    #[serde(default)]
    pub gt_views: Vec<ManifestEntry>,
    #[serde(default)]
    pub test_views: Vec<ManifestEntry>,
    #[serde(default)]
    pub gt_test_views: Vec<ManifestEntry>,
    #[serde(default)]
    pub spec: Option<SynthSpec>,
}

fn entry(v: &DatasetView, with_depth: bool) -> ManifestEntry {
    ManifestEntry {
        name: v.name.clone(),
        image: Some(format!("{}.ppm", v.name)),
        camera: Some(format!("{}.json", v.name)),
        depth: (with_depth && v.depth.is_some()).then(|| format!("{}.pfm", v.name)),
    }
}

fn gt_entry(v: &DatasetView) -> Option<ManifestEntry> {
    v.gt_depth.as_ref().map(|_| ManifestEntry {
        name: v.name.clone(),
        image: None,
        camera: None,
        depth: Some(format!("gt_{}.pfm", v.name)),
    })
}

impl Dataset {
    /// Write every file, then the manifest last.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut manifest = Manifest {
            format_version: FORMAT_VERSION,
            spec: self.spec.clone(),
            ..Default::default()
        };
        for (list, is_test) in [(&self.views, false), (&self.test_views, true)] {
            for v in list {
                ppm::write(&dir.join(format!("{}.ppm", v.name)), &v.image)?;
                camera_json::write(&dir.join(format!("{}.json", v.name)), &v.camera)?;
                if let (Some(d), false) = (&v.depth, is_test) {
                    pfm::write(&dir.join(format!("{}.pfm", v.name)), d)?;
                }
                if let Some(gt) = &v.gt_depth {
                    pfm::write(&dir.join(format!("gt_{}.pfm", v.name)), gt)?;
                }
                let (views, gts) = if is_test {
                    (&mut manifest.test_views, &mut manifest.gt_test_views)
                } else {
                    (&mut manifest.views, &mut manifest.gt_views)
                };
                views.push(entry(v, !is_test));
                gts.extend(gt_entry(v));
            }
        }
        write_atomic(&dir.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&read_bytes(&dir.join(MANIFEST))?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::contract(format!(
                "manifest format version {} (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let load_list = |entries: &[ManifestEntry], gts: &[ManifestEntry]| -> Result<Vec<DatasetView>> {
            entries
                .iter()
                .map(|e| {
                    let need = |f: &Option<String>, what: &str| {
                        f.clone()
                            .ok_or_else(|| Error::contract(format!("manifest view {} lacks {what}", e.name)))
                    };
                    let camera = camera_json::read(&dir.join(need(&e.camera, "a camera")?))?;
                    let image = ppm::read(&dir.join(need(&e.image, "an image")?))?;
                    if image.width != camera.width || image.height != camera.height {
                        return Err(Error::contract(format!("image size of {} differs from its camera", e.name)));
                    }
                    let depth = e.depth.as_ref().map(|p| pfm::read(&dir.join(p))).transpose()?;
                    let gt_depth = gts
                        .iter()
                        .find(|g| g.name == e.name)
                        .and_then(|g| g.depth.as_ref())
                        .map(|p| pfm::read(&dir.join(p)))
                        .transpose()?;
                    for d in depth.iter().chain(gt_depth.iter()) {
                        if d.width != camera.width || d.height != camera.height {
                            return Err(Error::contract(format!("depth size of {} differs from its camera", e.name)));
                        }
                    }
                    Ok(DatasetView {
                        name: e.name.clone(),
                        camera,
                        image,
                        depth,
                        gt_depth,
                    })
                })
                .collect()
        };
        Ok(Self {
            views: load_list(&manifest.views, &manifest.gt_views)?,
            test_views: load_list(&manifest.test_views, &manifest.gt_test_views)?,
            spec: manifest.spec,
        })
    }

    /// Initial scene: one Gaussian per stride cell of every training view,
    /// placed at the input depth.
    pub fn initial_scene(&self, stride: usize) -> Result<Scene> {
        let views = self
            .views
            .iter()
            .map(|v| {
                let depth = v
                    .depth
                    .as_ref()
                    .ok_or_else(|| Error::contract(format!("training view {} has no input depth", v.name)))?;
                Ok(SceneView {
                    camera: v.camera,
                    params: ViewParameters::initialize(&v.camera, depth, &v.image, stride)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(views)
    }

    pub fn targets(&self) -> Vec<RgbImage> {
        self.views.iter().map(|v| v.image.clone()).collect()
    }
}
