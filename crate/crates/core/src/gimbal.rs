//! Two-axis servo head: pan about the vertical axis, tilt about the panned
//! horizontal axis. Angles are in degrees.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const DEFAULT_PAN_DEG: f64 = 0.0;
pub const DEFAULT_TILT_DEG: f64 = -20.0;

pub const DEFAULT_PAN_MIN: f64 = -90.0;
pub const DEFAULT_PAN_MAX: f64 = 90.0;
pub const DEFAULT_TILT_MIN: f64 = -40.0;
pub const DEFAULT_TILT_MAX: f64 = 90.0;

/// Tilt travel granted to the servo model when the controller runs in
/// faithful mode, so the controller's one-sided tilt clamps stay visible.
pub const FAITHFUL_TILT_TRAVEL: (f64, f64) = (-180.0, 180.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GimbalState {
    pub pan_deg: f64,
    pub tilt_deg: f64,
}

impl GimbalState {
    pub fn new(pan_deg: f64, tilt_deg: f64) -> Self {
        Self { pan_deg, tilt_deg }
    }
}

impl Default for GimbalState {
    fn default() -> Self {
        Self::new(DEFAULT_PAN_DEG, DEFAULT_TILT_DEG)
    }
}

/// Physical travel of both axes plus an optional per-step slew limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GimbalLimits {
    pub pan_min: f64,
    pub pan_max: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
    /// Degrees per step; `None` moves to the command instantly.
    pub slew_max: Option<f64>,
}

impl Default for GimbalLimits {
    fn default() -> Self {
        Self {
            pan_min: DEFAULT_PAN_MIN,
            pan_max: DEFAULT_PAN_MAX,
            tilt_min: DEFAULT_TILT_MIN,
            tilt_max: DEFAULT_TILT_MAX,
            slew_max: None,
        }
    }
}

impl GimbalLimits {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [self.pan_min, self.pan_max, self.tilt_min, self.tilt_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(ConfigError::invalid("limits", "angles must be finite"));
        }
        if self.pan_min >= self.pan_max {
            return Err(ConfigError::invalid("limits", "pan_min must be below pan_max"));
        }
        if self.tilt_min >= self.tilt_max {
            return Err(ConfigError::invalid("limits", "tilt_min must be below tilt_max"));
        }
        if let Some(slew) = self.slew_max {
            if !(slew > 0.0) {
                return Err(ConfigError::invalid("limits.slew_max", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Same limits with the tilt travel widened for faithful-mode runs.
    pub fn widened_for_faithful(&self) -> Self {
        Self {
            tilt_min: self.tilt_min.min(FAITHFUL_TILT_TRAVEL.0),
            tilt_max: self.tilt_max.max(FAITHFUL_TILT_TRAVEL.1),
            ..*self
        }
    }

    pub fn contains(&self, state: GimbalState) -> bool {
        (self.pan_min..=self.pan_max).contains(&state.pan_deg)
            && (self.tilt_min..=self.tilt_max).contains(&state.tilt_deg)
    }
}

fn slew_toward(current: f64, target: f64, slew_max: Option<f64>) -> f64 {
    match slew_max {
        Some(max) => current + (target - current).clamp(-max, max),
        None => target,
    }
}

/// Moves both axes toward `command`, at most `slew_max` per axis, then clamps
/// into the physical travel.
pub fn apply(state: GimbalState, command: GimbalState, limits: &GimbalLimits) -> GimbalState {
    debug_assert!(command.pan_deg.is_finite() && command.tilt_deg.is_finite());
    let pan = slew_toward(state.pan_deg, command.pan_deg, limits.slew_max);
    let tilt = slew_toward(state.tilt_deg, command.tilt_deg, limits.slew_max);
    GimbalState {
        pan_deg: pan.clamp(limits.pan_min, limits.pan_max),
        tilt_deg: tilt.clamp(limits.tilt_min, limits.tilt_max),
    }
}
