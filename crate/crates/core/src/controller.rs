//! Dead-band stepped pan/tilt controller and the loop-rate smoother.
//!
//! The step schedule is four sequential, non-exclusive branches per axis: a
//! small step past the dead band and a further large step past the far band.
//! Both fire for large errors, so the net move is `step_small + step_far`
//! (4 degrees with the defaults) even though the far branch alone is 3.
//!
//! In [`ControlMode::Faithful`] the tilt axis keeps the original one-sided
//! clamps: an increment is only checked against `tilt_min` and a decrement
//! only against `tilt_max`, so tilt is unbounded in the direction of travel.
//! [`ControlMode::Corrected`] clamps tilt into `[tilt_min, tilt_max]`. Pan is
//! identical in both modes.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ControlError};
use crate::tracker::BBox;

pub const DEFAULT_DEAD_X: f64 = 40.0;
pub const DEFAULT_FAR_X: f64 = 120.0;
pub const DEFAULT_DEAD_Y: f64 = 20.0;
pub const DEFAULT_FAR_Y: f64 = 60.0;
pub const DEFAULT_STEP_SMALL: f64 = 1.0;
pub const DEFAULT_STEP_FAR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Faithful,
    #[default]
    Corrected,
}

impl std::str::FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(Self::Faithful),
            "corrected" => Ok(Self::Corrected),
            other => Err(format!("unknown mode `{other}` (expected faithful or corrected)")),
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Faithful => "faithful",
            Self::Corrected => "corrected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub dead_x: f64,
    pub far_x: f64,
    pub dead_y: f64,
    pub far_y: f64,
    pub step_small: f64,
    pub step_far: f64,
    pub pan_min: f64,
    pub pan_max: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
    pub mode: ControlMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            dead_x: DEFAULT_DEAD_X,
            far_x: DEFAULT_FAR_X,
            dead_y: DEFAULT_DEAD_Y,
            far_y: DEFAULT_FAR_Y,
            step_small: DEFAULT_STEP_SMALL,
            step_far: DEFAULT_STEP_FAR,
            pan_min: crate::gimbal::DEFAULT_PAN_MIN,
            pan_max: crate::gimbal::DEFAULT_PAN_MAX,
            tilt_min: crate::gimbal::DEFAULT_TILT_MIN,
            tilt_max: crate::gimbal::DEFAULT_TILT_MAX,
            mode: ControlMode::Corrected,
        }
    }
}

impl ControllerConfig {
    pub fn faithful() -> Self {
        Self { mode: ControlMode::Faithful, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0 < self.dead_x && self.dead_x < self.far_x) {
            return Err(ConfigError::invalid("controller", "need 0 < dead_x < far_x"));
        }
        if !(0.0 < self.dead_y && self.dead_y < self.far_y) {
            return Err(ConfigError::invalid("controller", "need 0 < dead_y < far_y"));
        }
        if !(self.step_small > 0.0 && self.step_far > 0.0) {
            return Err(ConfigError::invalid("controller", "step sizes must be positive"));
        }
        if !(self.pan_min < self.pan_max && self.tilt_min < self.tilt_max) {
            return Err(ConfigError::invalid("controller", "angle limits need min < max"));
        }
        Ok(())
    }
}

/// Signed pixel offset of the box centre from the frame centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub errorx: f64,
    pub errory: f64,
}

pub fn compute_error(bbox: &BBox, frame_width: usize, frame_height: usize) -> ErrorPair {
    ErrorPair {
        errorx: (bbox.x as f64 + bbox.w as f64 / 2.0) - frame_width as f64 / 2.0,
        errory: (bbox.y as f64 + bbox.h as f64 / 2.0) - frame_height as f64 / 2.0,
    }
}

pub fn pan_update(errorx: f64, pan: f64, cfg: &ControllerConfig) -> f64 {
    let mut pan = pan;
    if errorx > cfg.dead_x {
        pan -= cfg.step_small;
        if pan < cfg.pan_min {
            pan = cfg.pan_min;
        }
    }
    if errorx < -cfg.dead_x {
        pan += cfg.step_small;
        if pan > cfg.pan_max {
            pan = cfg.pan_max;
        }
    }
    if errorx > cfg.far_x {
        pan -= cfg.step_far;
        if pan < cfg.pan_min {
            pan = cfg.pan_min;
        }
    }
    if errorx < -cfg.far_x {
        pan += cfg.step_far;
        if pan > cfg.pan_max {
            pan = cfg.pan_max;
        }
    }
    pan
}

pub fn tilt_update(errory: f64, tilt: f64, cfg: &ControllerConfig) -> f64 {
    match cfg.mode {
        ControlMode::Faithful => tilt_update_faithful(errory, tilt, cfg),
        ControlMode::Corrected => tilt_update_corrected(errory, tilt, cfg),
    }
}

fn tilt_update_faithful(errory: f64, tilt: f64, cfg: &ControllerConfig) -> f64 {
    let mut tilt = tilt;
    if errory > cfg.dead_y {
        tilt += cfg.step_small;
        if tilt < cfg.tilt_min {
            tilt = cfg.tilt_min;
        }
    }
    if errory < -cfg.dead_y {
        tilt -= cfg.step_small;
        if tilt > cfg.tilt_max {
            tilt = cfg.tilt_max;
        }
    }
    if errory > cfg.far_y {
        tilt += cfg.step_far;
        if tilt < cfg.tilt_min {
            tilt = cfg.tilt_min;
        }
    }
    if errory < -cfg.far_y {
        tilt -= cfg.step_far;
        if tilt > cfg.tilt_max {
            tilt = cfg.tilt_max;
        }
    }
    tilt
}

fn tilt_update_corrected(errory: f64, tilt: f64, cfg: &ControllerConfig) -> f64 {
    let clamp = |t: f64| t.clamp(cfg.tilt_min, cfg.tilt_max);
    let mut tilt = tilt;
    if errory > cfg.dead_y {
        tilt = clamp(tilt + cfg.step_small);
    }
    if errory < -cfg.dead_y {
        tilt = clamp(tilt - cfg.step_small);
    }
    if errory > cfg.far_y {
        tilt = clamp(tilt + cfg.step_far);
    }
    if errory < -cfg.far_y {
        tilt = clamp(tilt - cfg.step_far);
    }
    tilt
}

/// Exponentially smoothed loop rate, frames per second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FpsEstimate {
    pub fps: f64,
}

pub fn ema_fps(estimate: FpsEstimate, looptime: f64) -> Result<FpsEstimate, ControlError> {
    if !(looptime > 0.0 && looptime.is_finite()) {
        return Err(ControlError::InvalidLooptime(looptime));
    }
    Ok(FpsEstimate { fps: 0.8 * estimate.fps + 0.2 * 1.0 / looptime })
}
