use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rasterizer::DepthMode;
use crate::scene::ParamClass;

/// Optimization settings. Field names double as the JSON config schema;
/// missing fields fall back to the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr_log_depth: f64,
    pub lr_raw_offset: f64,
    pub lr_log_scale: f64,
    pub lr_rotation: f64,
    pub lr_opacity_logit: f64,
    pub lr_sh: f64,
    /// Only used by the free-position baseline.
    pub lr_free_mean: f64,
    /// D-SSIM weight λ_s.
    pub dssim_weight: f64,
    /// Initial visibility weight λ0, decayed linearly to 0.
    pub vis_lambda0: f64,
    pub alpha_threshold: f64,
    pub stage_iters: usize,
    pub stage_long_side: usize,
    pub sh_step: usize,
    pub scale_clip_px: f64,
    pub stride: usize,
    pub depth_mode: DepthMode,
    pub seed: u64,
    pub disable_vis_loss: bool,
    pub freeze_offsets: bool,
    pub naive_free_position: bool,
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            lr_log_depth: 1e-3,
            lr_raw_offset: 1e-2,
            lr_log_scale: 5e-3,
            lr_rotation: 1e-3,
            lr_opacity_logit: 5e-2,
            lr_sh: 2.5e-3,
            lr_free_mean: 1e-3,
            dssim_weight: 0.2,
            vis_lambda0: 1.0,
            alpha_threshold: 0.5,
            stage_iters: 2000,
            stage_long_side: 512,
            sh_step: 100,
            scale_clip_px: 30.0,
            stride: 1,
            depth_mode: DepthMode::Normalized,
            seed: 0,
            disable_vis_loss: false,
            freeze_offsets: false,
            naive_free_position: false,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self, class: ParamClass) -> f64 {
        match class {
            ParamClass::LogDepth => self.lr_log_depth,
            ParamClass::RawOffset => self.lr_raw_offset,
            ParamClass::LogScale => self.lr_log_scale,
            ParamClass::Rotation => self.lr_rotation,
            ParamClass::OpacityLogit => self.lr_opacity_logit,
            ParamClass::Sh => self.lr_sh,
            ParamClass::FreeMean => self.lr_free_mean,
        }
    }

    /// Classes the optimizer updates under the current ablation flags.
    pub fn trainable(&self, class: ParamClass) -> bool {
        match class {
            ParamClass::LogDepth => !self.naive_free_position,
            ParamClass::RawOffset => !self.naive_free_position && !self.freeze_offsets,
            ParamClass::FreeMean => self.naive_free_position,
            _ => true,
        }
    }

    /// The visibility term is active at all.
    pub fn uses_visibility(&self) -> bool {
        !self.disable_vis_loss && !self.naive_free_position
    }

    pub fn validate(&self) -> Result<()> {
        for class in ParamClass::ALL {
            let lr = self.learning_rate(class);
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::contract(format!("learning rate for {} must be positive", class.name())));
            }
        }
        if !(0.0..=1.0).contains(&self.dssim_weight) {
            return Err(Error::contract("dssim_weight must lie in [0, 1]"));
        }
        if !(self.vis_lambda0 >= 0.0) || !(self.scale_clip_px > 0.0) {
            return Err(Error::contract("vis_lambda0 must be ≥ 0 and scale_clip_px > 0"));
        }
        if self.stride == 0 || self.stage_long_side == 0 || self.sh_step == 0 {
            return Err(Error::contract("stride, stage_long_side and sh_step must be positive"));
        }
        Ok(())
    }
}
