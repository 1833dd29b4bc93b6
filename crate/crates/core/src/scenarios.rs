//! Reproducible experiment setups built from the synthetic generator: the
//! ablation suite, the two-view occlusion conflict and test-view alignment.
//! Examples and tests share these so their numbers agree.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{so3_exp, Pose};
use crate::harness::eval::evaluate;
use crate::harness::synth::{synthesize, SceneKind, SynthSpec, Texture};
use crate::harness::Dataset;
use crate::metrics::DEFAULT_PATCH;
use crate::rasterizer::{render, RenderSettings};
use crate::scene::{materialize_scene, Scene};
use crate::training::{align_test_view, rotation_error_deg, train, translation_error_rel, AlignConfig, ProgressSink, TrainConfig};

/// Dataset of the ablation suite: two planes, six 64×64 training views,
/// 2 % iid depth noise plus texture-correlated bumps, two held-out views.
pub fn ablation_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        kind: SceneKind::TwoPlanes,
        texture: Texture::Checker,
        train_views: 6,
        test_views: 2,
        width: 64,
        height: 64,
        depth_noise: 0.02,
        bump_amplitude: 0.05,
        seed,
        ..Default::default()
    }
}

/// Training settings shared by all variants of the ablation suite.
pub fn ablation_config(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        ..Default::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoVisLoss,
    FreezeOffsets,
    Naive,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoVisLoss, Variant::FreezeOffsets, Variant::Naive];

    pub fn apply(self, mut cfg: TrainConfig) -> TrainConfig {
        match self {
            Variant::Full => {}
            Variant::NoVisLoss => cfg.disable_vis_loss = true,
            Variant::FreezeOffsets => cfg.freeze_offsets = true,
            Variant::Naive => cfg.naive_free_position = true,
        }
        cfg
    }
}

/// Scores of one trained variant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VariantScores {
    pub depth_rmse: f64,
    pub pdc: f64,
    pub test_psnr: f64,
    pub rendered_pdc: f64,
}

pub fn train_and_score(dataset: &Dataset, cfg: &TrainConfig, sink: &mut dyn ProgressSink) -> Result<VariantScores> {
    let scene = dataset.initial_scene(cfg.stride)?;
    let trained = train(scene, &dataset.targets(), cfg, sink)?.scene;
    let report = evaluate(
        &trained,
        dataset,
        &RenderSettings::default(),
        DEFAULT_PATCH,
        serde_json::Value::Null,
    )?;
    Ok(VariantScores {
        depth_rmse: report.depth_rmse.unwrap_or(f64::NAN),
        pdc: report.pdc.unwrap_or(f64::NAN),
        test_psnr: report.psnr,
        rendered_pdc: report.rendered_pdc.unwrap_or(f64::NAN),
    })
}

/// Scores of the untrained initialization (the noisy input depths).
pub fn initial_scores(dataset: &Dataset, stride: usize) -> Result<VariantScores> {
    let cfg = TrainConfig {
        iterations: 0,
        stride,
        ..Default::default()
    };
    train_and_score(dataset, &cfg, &mut crate::training::Quiet)
}

pub fn ablation_dataset(seed: u64) -> Result<Dataset> {
    synthesize(&ablation_spec(seed))
}

/// Two-view occlusion conflict: zero-noise two planes seen by two 64×64
/// cameras, where the first view's input depth is pulled `shift` nearer
/// (0.1 = 10 %). Its Gaussians then float in front of the surface and
/// obstruct the second view's rays.
pub fn conflict_dataset(shift: f64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&shift) {
        return Err(Error::contract(format!("conflict shift must lie in [0, 1), got {shift}")));
    }
    let spec = SynthSpec {
        kind: SceneKind::TwoPlanes,
        texture: Texture::Checker,
        train_views: 2,
        test_views: 0,
        width: 64,
        height: 64,
        depth_noise: 0.0,
        bump_amplitude: 0.0,
        ..Default::default()
    };
    let mut dataset = synthesize(&spec)?;
    let view = &mut dataset.views[0];
    let depth = view.depth.as_mut().ok_or_else(|| Error::contract("synthetic view without depth"))?;
    for d in &mut depth.data {
        *d *= 1.0 - shift;
    }
    Ok(dataset)
}

/// Mean |D̂ − D| over the cells whose anchor pixel has rendered alpha at or
/// above `alpha_threshold`, pooled over all views: D̂ is the depth rendered
/// through the view's camera, D its per-view depth.
pub fn masked_depth_discrepancy(scene: &Scene, alpha_threshold: f64) -> Result<f64> {
    let gaussians = materialize_scene(scene);
    let settings = RenderSettings::default();
    let (mut sum, mut count) = (0.0, 0usize);
    for view in &scene.views {
        let out = render(&gaussians, &view.camera, &settings)?;
        let d = view.params.depth_map();
        for (n, dn) in d.data.iter().enumerate() {
            let (x, y) = view.params.cell_pixel(n);
            if out.alpha.get(x, y) >= alpha_threshold {
                sum += (out.depth.get(x, y) - dn).abs();
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Before/after numbers of the occlusion conflict.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConflictOutcome {
    /// Masked mean |D̂ − D| of the initialization.
    pub initial: f64,
    /// The same after training.
    pub trained: f64,
    /// Mean |D − D_true| of the shifted view before and after training.
    pub initial_shifted_error: f64,
    pub trained_shifted_error: f64,
}

impl ConflictOutcome {
    /// Fractional drop of the masked discrepancy.
    pub fn reduction(&self) -> f64 {
        1.0 - self.trained / self.initial
    }
}

/// Train the conflict scene with the visibility term active.
pub fn run_conflict(shift: f64, iterations: usize, sink: &mut dyn ProgressSink) -> Result<ConflictOutcome> {
    let dataset = conflict_dataset(shift)?;
    let cfg = TrainConfig {
        iterations,
        ..Default::default()
    };
    let scene = dataset.initial_scene(cfg.stride)?;
    let shifted_error = |scene: &Scene| -> Result<f64> {
        let gt = dataset.views[0]
            .gt_depth
            .as_ref()
            .ok_or_else(|| Error::contract("conflict dataset lacks ground truth"))?;
        let d = scene.views[0].params.depth_map();
        let mut sum = 0.0;
        for (n, dn) in d.data.iter().enumerate() {
            let (x, y) = scene.views[0].params.cell_pixel(n);
            sum += (dn - gt.get(x, y)).abs();
        }
        Ok(sum / d.data.len() as f64)
    };
    let initial = masked_depth_discrepancy(&scene, cfg.alpha_threshold)?;
    let initial_shifted_error = shifted_error(&scene)?;
    let trained = train(scene, &dataset.targets(), &cfg, sink)?.scene;
    Ok(ConflictOutcome {
        initial,
        trained: masked_depth_discrepancy(&trained, cfg.alpha_threshold)?,
        initial_shifted_error,
        trained_shifted_error: shifted_error(&trained)?,
    })
}

/// Before/after pose errors of test-view alignment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlignmentOutcome {
    pub initial_rotation_deg: f64,
    pub initial_translation_rel: f64,
    pub rotation_deg: f64,
    pub translation_rel: f64,
    pub best_iteration: usize,
}

/// Scene used for alignment: zero-noise two planes with one held-out view.
pub fn alignment_dataset(seed: u64) -> Result<Dataset> {
    synthesize(&SynthSpec {
        kind: SceneKind::TwoPlanes,
        texture: Texture::Checker,
        train_views: 6,
        test_views: 1,
        width: 64,
        height: 64,
        depth_noise: 0.0,
        bump_amplitude: 0.0,
        seed,
        ..Default::default()
    })
}

/// Train the alignment scene for `train_iterations`, perturb the held-out
/// camera by `rotation_deg` about a seeded random axis and by
/// `translation_rel`·|C| along a seeded random direction, then align it
/// back against the held-out image with the scene frozen.
pub fn run_alignment(
    seed: u64,
    train_iterations: usize,
    rotation_deg: f64,
    translation_rel: f64,
    cfg: &AlignConfig,
) -> Result<AlignmentOutcome> {
    let dataset = alignment_dataset(seed)?;
    let train_cfg = TrainConfig {
        iterations: train_iterations,
        ..Default::default()
    };
    let scene = train(dataset.initial_scene(train_cfg.stride)?, &dataset.targets(), &train_cfg, &mut crate::training::Quiet)?.scene;
    let test = dataset
        .test_views
        .first()
        .ok_or_else(|| Error::contract("alignment dataset has no held-out view"))?;
    let truth = test.camera;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || -> Vector3<f64> {
        loop {
            let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
            let n = v.norm();
            if (0.1..=1.0).contains(&n) {
                return v / n;
            }
        }
    };
    let omega = unit() * rotation_deg.to_radians();
    let offset = unit() * translation_rel * truth.center().norm();
    let mut init = truth;
    init.cam_to_world = Pose {
        rotation: truth.cam_to_world.rotation * so3_exp(&omega),
        translation: truth.cam_to_world.translation + offset,
    };
    let result = align_test_view(&scene, &test.image, &init, cfg)?;
    Ok(AlignmentOutcome {
        initial_rotation_deg: rotation_error_deg(&init, &truth),
        initial_translation_rel: translation_error_rel(&init, &truth),
        rotation_deg: rotation_error_deg(&result.camera, &truth),
        translation_rel: translation_error_rel(&result.camera, &truth),
        best_iteration: result.best_iteration,
    })
}
