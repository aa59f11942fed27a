use thiserror::Error;

use crate::tracker::BBox;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {field}: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Self { field, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("patch dimensions differ: {a:?} vs {b:?}")]
    PatchMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("frame is {got:?} but the tracker was initialised on {expected:?}")]
    FrameMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("roi {roi:?} does not lie inside the {width}x{height} frame")]
    RoiOutOfBounds { roi: BBox, width: usize, height: usize },
    /// The selected region is flat and cannot be matched.
    #[error("roi {0:?} has no intensity variation to track")]
    Untrackable(BBox),
    #[error("invalid tracker parameter: {0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("steer commands are only accepted by operator-driven trajectories")]
    SteerNotAllowed,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("loop time must be positive and finite, got {0}")]
    InvalidLooptime(f64),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported scenario version {0} (expected 1)")]
    Version(u32),
    #[error("tracker initialisation failed at step 0: {0}")]
    TrackerInit(#[source] TrackerError),
    #[error("no roi available at step 0: the target is not visible from the initial pose")]
    TargetNotVisible,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("metrics output failed: {0}")]
    Io(#[from] std::io::Error),
}
