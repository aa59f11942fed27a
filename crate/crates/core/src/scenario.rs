//! Scenario description and its TOML file form.
//!
//! Every key except `version` is optional and falls back to the defaults
//! below; unknown keys are rejected so typos do not silently run the default.

use serde::{Deserialize, Serialize};

use crate::controller::{ControlMode, ControllerConfig};
use crate::error::{ConfigError, ScenarioError};
use crate::gimbal::{GimbalLimits, GimbalState};
use crate::simworld::{optical_axis_point, CameraModel, TargetState, TrajectorySpec, Vec3};
use crate::tracker::{BBox, TrackerConfig};

pub const SCENARIO_VERSION: u32 = 1;
pub const DEFAULT_STEPS: usize = 300;
pub const DEFAULT_LOOP_HZ: f64 = 15.0;
pub const DEFAULT_LOCK_DWELL: usize = 10;
pub const DEFAULT_TARGET_RADIUS: f64 = 0.05;
pub const DEFAULT_TARGET_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RoiKeyword {
    #[default]
    Auto,
}

/// Region handed to the tracker at step 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoiSpec {
    /// Use the target's ground-truth box.
    #[default]
    #[serde(with = "auto_keyword")]
    Auto,
    Explicit(BBox),
}

mod auto_keyword {
    use super::RoiKeyword;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        RoiKeyword::deserialize(d).map(|_| ())
    }
}

/// Fully resolved description of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub steps: usize,
    pub loop_hz: f64,
    pub noise_sigma: f64,
    pub lock_dwell: usize,
    pub camera: CameraModel,
    pub limits: GimbalLimits,
    pub controller: ControllerConfig,
    pub initial_pose: GimbalState,
    pub trajectory: TrajectorySpec,
    pub target: TargetState,
    /// Steps at and after this index render without the target.
    pub blank_from_step: Option<usize>,
    pub tracker: TrackerConfig,
    pub roi: RoiSpec,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let initial_pose = GimbalState::default();
        Self {
            seed: 0,
            steps: DEFAULT_STEPS,
            loop_hz: DEFAULT_LOOP_HZ,
            noise_sigma: 0.0,
            lock_dwell: DEFAULT_LOCK_DWELL,
            camera: CameraModel::default(),
            limits: GimbalLimits::default(),
            controller: ControllerConfig::default(),
            initial_pose,
            trajectory: TrajectorySpec::Stationary,
            target: TargetState::at(optical_axis_point(initial_pose, DEFAULT_TARGET_RANGE), DEFAULT_TARGET_RADIUS),
            blank_from_step: None,
            tracker: TrackerConfig::default(),
            roi: RoiSpec::Auto,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.steps == 0 {
            return Err(ConfigError::invalid("steps", "must be positive"));
        }
        if !(self.loop_hz > 0.0 && self.loop_hz.is_finite()) {
            return Err(ConfigError::invalid("loop_hz", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(ConfigError::invalid("noise_sigma", "must be >= 0"));
        }
        if !(self.initial_pose.pan_deg.is_finite() && self.initial_pose.tilt_deg.is_finite()) {
            return Err(ConfigError::invalid("initial_pose", "angles must be finite"));
        }
        self.camera.validate()?;
        self.limits.validate()?;
        self.controller.validate()?;
        self.trajectory.validate()?;
        self.target.validate()?;
        self.tracker.validate()?;
        if let RoiSpec::Explicit(b) = self.roi {
            if !b.fits_within(self.camera.frame_width, self.camera.frame_height) {
                return Err(ConfigError::invalid("roi", "explicit roi must lie inside the frame"));
            }
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: ControlMode) -> Self {
        self.controller.mode = mode;
        self
    }

    /// Parses and validates a scenario document.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.into_spec()
    }
}

/// Where the target starts: an explicit world position, or on the optical
/// axis of a given gimbal pose at some range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bearing {
    pub pan_deg: f64,
    pub tilt_deg: f64,
    #[serde(default = "default_range")]
    pub range: f64,
}

fn default_range() -> f64 {
    DEFAULT_TARGET_RANGE
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub radius: Option<f64>,
    pub position: Option<Vec3>,
    pub bearing: Option<Bearing>,
    pub velocity: Option<Vec3>,
    pub blank_from_step: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    pub pan_deg: f64,
    pub tilt_deg: f64,
}

/// On-disk scenario document (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub loop_hz: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub lock_dwell: Option<usize>,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub limits: GimbalLimits,
    #[serde(default)]
    pub controller: ControllerConfig,
    pub initial_pose: Option<PoseSection>,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub roi: RoiSpec,
}

impl ScenarioFile {
    pub fn into_spec(self) -> Result<ScenarioSpec, ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(self.version));
        }
        let defaults = ScenarioSpec::default();
        let initial_pose = self
            .initial_pose
            .map(|p| GimbalState::new(p.pan_deg, p.tilt_deg))
            .unwrap_or(defaults.initial_pose);
        let position = match (self.target.position, self.target.bearing) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::invalid("target", "give either position or bearing, not both").into())
            }
            (Some(p), None) => p,
            (None, Some(b)) => {
                if !(b.range > 0.0) {
                    return Err(ConfigError::invalid("target.bearing.range", "must be positive").into());
                }
                optical_axis_point(GimbalState::new(b.pan_deg, b.tilt_deg), b.range)
            }
            (None, None) => optical_axis_point(initial_pose, DEFAULT_TARGET_RANGE),
        };
        let spec = ScenarioSpec {
            seed: self.seed.unwrap_or(defaults.seed),
            steps: self.steps.unwrap_or(defaults.steps),
            loop_hz: self.loop_hz.unwrap_or(defaults.loop_hz),
            noise_sigma: self.noise_sigma.unwrap_or(defaults.noise_sigma),
            lock_dwell: self.lock_dwell.unwrap_or(defaults.lock_dwell),
            camera: self.camera,
            limits: self.limits,
            controller: self.controller,
            initial_pose,
            trajectory: self.trajectory,
            target: TargetState {
                position,
                velocity: self.target.velocity.unwrap_or([0.0; 3]),
                radius: self.target.radius.unwrap_or(DEFAULT_TARGET_RADIUS),
            },
            blank_from_step: self.target.blank_from_step,
            tracker: self.tracker,
            roi: self.roi,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let spec = ScenarioSpec::from_toml("version = 1").unwrap();
        assert_eq!(spec, ScenarioSpec::default());
        assert_eq!(spec.camera.frame_width, 1000);
        assert_eq!(spec.camera.frame_height, 800);
        assert_eq!(spec.loop_hz, 15.0);
        assert_eq!(spec.initial_pose, GimbalState::new(0.0, -20.0));
        assert_eq!(spec.controller.dead_x, 40.0);
    }

    #[test]
    fn version_required() {
        assert!(matches!(ScenarioSpec::from_toml("steps = 3"), Err(ScenarioError::Parse(_))));
        assert!(matches!(ScenarioSpec::from_toml("version = 2"), Err(ScenarioError::Version(2))));
    }

    #[test]
    fn unknown_keys_rejected() {
        for doc in [
            "version = 1\nstepz = 3",
            "version = 1\n[camera]\nhfov = 50",
            "version = 1\n[controller]\ndeadx = 3",
            "version = 1\n[target]\nradius = 0.1\ncolour = 3",
            "version = 1\n[tracker]\nradius = 3",
        ] {
            assert!(matches!(ScenarioSpec::from_toml(doc), Err(ScenarioError::Parse(_))), "{doc}");
        }
    }

    #[test]
    fn full_document() {
        let doc = r#"
            version = 1
            seed = 9
            steps = 40
            loop_hz = 30.0
            noise_sigma = 2.5
            roi = { x = 10, y = 20, w = 30, h = 40 }

            [camera]
            hfov_deg = 50.0

            [controller]
            mode = "faithful"

            [limits]
            slew_max = 2.0

            [initial_pose]
            pan_deg = 5.0
            tilt_deg = -10.0

            [trajectory]
            kind = "circular"
            center = [0.0, 0.0, 2.0]
            rate_deg_per_step = 0.5

            [target]
            radius = 0.08
            bearing = { pan_deg = 1.0, tilt_deg = -12.0, range = 3.0 }
            blank_from_step = 30
        "#;
        let spec = ScenarioSpec::from_toml(doc).unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.steps, 40);
        assert_eq!(spec.controller.mode, ControlMode::Faithful);
        assert_eq!(spec.limits.slew_max, Some(2.0));
        assert_eq!(spec.roi, RoiSpec::Explicit(BBox::new(10, 20, 30, 40)));
        assert_eq!(spec.blank_from_step, Some(30));
        assert_eq!(spec.target.position, optical_axis_point(GimbalState::new(1.0, -12.0), 3.0));
        assert_eq!(spec.initial_pose, GimbalState::new(5.0, -10.0));
    }

    #[test]
    fn roi_keyword() {
        let spec = ScenarioSpec::from_toml("version = 1\nroi = \"auto\"").unwrap();
        assert_eq!(spec.roi, RoiSpec::Auto);
        assert!(ScenarioSpec::from_toml("version = 1\nroi = \"manual\"").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for doc in [
            "version = 1\nsteps = 0",
            "version = 1\nloop_hz = 0.0",
            "version = 1\n[camera]\nhfov_deg = 190.0",
            "version = 1\n[target]\nradius = -1.0",
            "version = 1\n[target]\nposition = [0.0, 0.0, 2.0]\nbearing = { pan_deg = 0.0, tilt_deg = 0.0 }",
            "version = 1\nroi = { x = 990, y = 0, w = 20, h = 20 }",
        ] {
            assert!(matches!(ScenarioSpec::from_toml(doc), Err(ScenarioError::Config(_))), "{doc}");
        }
    }
}
