//! Software-in-the-loop pan-tilt tracking rig.
//!
//! A simulated camera on a two-axis gimbal watches a synthetic target. An NCC
//! template tracker follows the operator's region of interest and a dead-band
//! stepped controller turns the tracked box's offset from the frame centre
//! into pan/tilt steps.
//!
//! - [`simworld`]: pinhole camera, target trajectories, frame rendering.
//! - [`gimbal`]: servo travel limits and optional slew.
//! - [`tracker`]: normalized cross-correlation tracker.
//! - [`controller`]: dead-band step controller and loop-rate smoothing.
//! - [`runtime`]: the closed loop, metrics and lock detection.
//! - [`scenario`]: scenario description and its TOML file form.

// `!(x > y)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod gimbal;
pub mod runtime;
pub mod scenario;
pub mod simworld;
pub mod tracker;

pub use controller::{ControlMode, ControllerConfig, ErrorPair, FpsEstimate};
pub use error::{ConfigError, ControlError, ScenarioError, SimError, TrackerError};
pub use gimbal::{GimbalLimits, GimbalState};
pub use runtime::{Rig, Run, RunMode, RunSummary, StepOutput, StepRecord, TrackStatus};
pub use scenario::{RoiSpec, ScenarioFile, ScenarioSpec};
pub use simworld::{CameraModel, Frame, Steer, TargetState, TrajectorySpec};
pub use tracker::{BBox, TrackerConfig, TrackerState};
