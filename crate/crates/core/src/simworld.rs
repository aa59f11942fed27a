//! Scene model: one spherical target, a pinhole camera carried by the gimbal,
//! and a synthetic renderer producing single-channel frames.
//!
//! Coordinate conventions. World and camera frames are right-handed with
//! x to the right, y down and z forward (the optical axis). At pan = tilt = 0
//! the two frames coincide. A world point is brought into the camera frame by
//! rotating through -pan about the world vertical axis and then through -tilt
//! about the panned horizontal axis, so the optical axis of pose (pan, tilt)
//! points along `(cos(tilt) sin(pan), -sin(tilt), cos(tilt) cos(pan))`.
//!
//! [`project`] returns sensor coordinates (before the mount flip). The
//! displayed frame is mirrored in both axes, which makes the loop with the
//! stepped controller a negative-feedback loop: a target to the right of the
//! displayed centre gives a positive horizontal error and is re-centred by
//! decreasing pan; a target below the displayed centre gives a positive
//! vertical error and is re-centred by increasing tilt.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::gimbal::GimbalState;
use crate::tracker::BBox;

pub type Vec3 = [f64; 3];

pub const BACKGROUND_INTENSITY: u8 = 64;
pub const TARGET_INTENSITY: u8 = 200;
pub const RIM_INTENSITY: u8 = 120;
/// Width of the darker ring drawn inside the target outline, in pixels.
pub const RIM_WIDTH_PX: f64 = 2.0;

pub const DEFAULT_FRAME_WIDTH: usize = 1000;
pub const DEFAULT_FRAME_HEIGHT: usize = 800;
pub const DEFAULT_HFOV_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub frame_width: usize,
    pub frame_height: usize,
    pub hfov_deg: f64,
    pub flip_both_axes: bool,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            frame_width: DEFAULT_FRAME_WIDTH,
            frame_height: DEFAULT_FRAME_HEIGHT,
            hfov_deg: DEFAULT_HFOV_DEG,
            flip_both_axes: true,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(ConfigError::invalid("camera", "frame dimensions must be positive"));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(ConfigError::invalid("camera.hfov_deg", "must lie in (0, 180)"));
        }
        Ok(())
    }

    /// Focal length in pixels, derived from the frame width and hfov.
    pub fn focal_px(&self) -> f64 {
        (self.frame_width as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.frame_width as f64 / 2.0, self.frame_height as f64 / 2.0)
    }

    /// Pixels moved by a point near the image centre when the view rotates by
    /// `deg` degrees.
    pub fn pixels_per_degrees(&self, deg: f64) -> f64 {
        self.focal_px() * deg.to_radians().tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub position: Vec3,
    /// Meters per step.
    pub velocity: Vec3,
    pub radius: f64,
}

impl TargetState {
    pub fn at(position: Vec3, radius: f64) -> Self {
        Self { position, velocity: [0.0; 3], radius }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(ConfigError::invalid("target.radius", "must be positive"));
        }
        if !self.position.iter().chain(&self.velocity).all(|v| v.is_finite()) {
            return Err(ConfigError::invalid("target", "position and velocity must be finite"));
        }
        Ok(())
    }
}

/// Operator steering velocity in world meters per step (x right, y down).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Steer {
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    #[default]
    Stationary,
    Linear {
        velocity: Vec3,
    },
    /// Rotation about a vertical axis through `center`.
    Circular {
        center: Vec3,
        rate_deg_per_step: f64,
    },
    /// Gaussian increments on the lateral (x, y) axes.
    RandomWalk {
        sigma: f64,
        seed: u64,
    },
    OperatorDriven,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = match self {
            Self::Stationary | Self::OperatorDriven => true,
            Self::Linear { velocity } => velocity.iter().all(|v| v.is_finite()),
            Self::Circular { center, rate_deg_per_step } => {
                center.iter().all(|v| v.is_finite()) && rate_deg_per_step.is_finite()
            }
            Self::RandomWalk { sigma, .. } => *sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::invalid("trajectory", "parameters must be finite (sigma >= 0)"))
        }
    }

    pub fn is_operator_driven(&self) -> bool {
        matches!(self, Self::OperatorDriven)
    }
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub seq: u64,
}

impl Frame {
    pub fn filled(width: usize, height: usize, value: u8, seq: u64) -> Self {
        Self { width, height, pixels: vec![value; width * height], seq }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Mirrors in both axes: pixel (x, y) moves to (w-1-x, h-1-y).
    pub fn flipped(mut self) -> Self {
        self.pixels.reverse();
        self
    }

    pub fn contains(&self, bbox: &BBox) -> bool {
        bbox.fits_within(self.width, self.height)
    }
}

fn rotate_into_camera(gimbal: GimbalState, p: Vec3) -> Vec3 {
    let (sp, cp) = gimbal.pan_deg.to_radians().sin_cos();
    let (st, ct) = gimbal.tilt_deg.to_radians().sin_cos();
    let qx = p[0] * cp - p[2] * sp;
    let qy = p[1];
    let qz = p[0] * sp + p[2] * cp;
    [qx, qy * ct + qz * st, -qy * st + qz * ct]
}

/// World point at `range` meters along the optical axis of `gimbal`.
pub fn optical_axis_point(gimbal: GimbalState, range: f64) -> Vec3 {
    let (sp, cp) = gimbal.pan_deg.to_radians().sin_cos();
    let (st, ct) = gimbal.tilt_deg.to_radians().sin_cos();
    [range * ct * sp, -range * st, range * ct * cp]
}

/// Pinhole projection in sensor coordinates (before the mount flip).
/// `None` when the point is on or behind the image plane.
pub fn project(camera: &CameraModel, gimbal: GimbalState, point: Vec3) -> Option<(f64, f64)> {
    let [x, y, z] = rotate_into_camera(gimbal, point);
    if !(z > 0.0) {
        return None;
    }
    let f = camera.focal_px();
    let (cx, cy) = camera.center();
    Some((cx + f * x / z, cy + f * y / z))
}

/// Projected outline of the target in sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Disk {
    u: f64,
    v: f64,
    r: f64,
}

fn project_disk(camera: &CameraModel, gimbal: GimbalState, target: &TargetState) -> Option<Disk> {
    let cam = rotate_into_camera(gimbal, target.position);
    if !(cam[2] > 0.0) {
        return None;
    }
    let (u, v) = project(camera, gimbal, target.position)?;
    // Apparent size follows range, not depth, so it is invariant to pure
    // rotations of the camera.
    let range = (cam[0] * cam[0] + cam[1] * cam[1] + cam[2] * cam[2]).sqrt();
    Some(Disk { u, v, r: camera.focal_px() * target.radius / range })
}

/// Inclusive index range of pixels whose centres fall within `[c - r, c + r]`,
/// clipped to `[0, len)`.
fn covered_span(c: f64, r: f64, len: usize) -> Option<(usize, usize)> {
    let lo = (c - r - 0.5).ceil().max(0.0);
    let hi = (c + r - 0.5).floor().min(len as f64 - 1.0);
    if lo > hi {
        return None;
    }
    Some((lo as usize, hi as usize))
}

fn sensor_bbox(camera: &CameraModel, disk: &Disk) -> Option<BBox> {
    let (x0, x1) = covered_span(disk.u, disk.r, camera.frame_width)?;
    let (y0, y1) = covered_span(disk.v, disk.r, camera.frame_height)?;
    Some(BBox::new(x0 as i64, y0 as i64, (x1 - x0 + 1) as i64, (y1 - y0 + 1) as i64))
}

fn to_display(camera: &CameraModel, b: BBox) -> BBox {
    if camera.flip_both_axes {
        BBox::new(
            camera.frame_width as i64 - (b.x + b.w),
            camera.frame_height as i64 - (b.y + b.h),
            b.w,
            b.h,
        )
    } else {
        b
    }
}

/// Tight box around the pixels whose centres lie within the target's projected
/// outline, in displayed (post-flip) coordinates and clipped to the frame.
pub fn ground_truth_bbox(
    camera: &CameraModel,
    gimbal: GimbalState,
    target: &TargetState,
) -> Option<BBox> {
    let disk = project_disk(camera, gimbal, target)?;
    sensor_bbox(camera, &disk).map(|b| to_display(camera, b))
}

/// Renders the scene. The noise stream is consumed only when `noise_sigma > 0`.
pub fn render_frame<R: Rng + ?Sized>(
    camera: &CameraModel,
    gimbal: GimbalState,
    target: Option<&TargetState>,
    noise_sigma: f64,
    rng: &mut R,
    seq: u64,
) -> Frame {
    let (w, h) = (camera.frame_width, camera.frame_height);
    let mut frame = Frame::filled(w, h, BACKGROUND_INTENSITY, seq);

    if let Some(disk) = target.and_then(|t| project_disk(camera, gimbal, t)) {
        if let Some(b) = sensor_bbox(camera, &disk) {
            let r2 = disk.r * disk.r;
            let inner = (disk.r - RIM_WIDTH_PX).max(0.0);
            let inner2 = inner * inner;
            for y in b.y as usize..(b.y + b.h) as usize {
                let dy = y as f64 + 0.5 - disk.v;
                let row = &mut frame.pixels[y * w..(y + 1) * w];
                for (x, px) in row.iter_mut().enumerate().skip(b.x as usize).take(b.w as usize) {
                    let dx = x as f64 + 0.5 - disk.u;
                    let d2 = dx * dx + dy * dy;
                    if d2 <= r2 {
                        *px = if d2 > inner2 { RIM_INTENSITY } else { TARGET_INTENSITY };
                    }
                }
            }
        }
    }

    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("finite positive sigma");
        for px in frame.pixels.iter_mut() {
            let v = *px as f64 + normal.sample(rng);
            *px = v.round().clamp(0.0, 255.0) as u8;
        }
    }

    if camera.flip_both_axes {
        frame = frame.flipped();
    }
    frame
}

/// Advances the target by one simulation step. `steer` is the operator's most
/// recent command and is only accepted by operator-driven trajectories.
pub fn step_target<R: Rng + ?Sized>(
    spec: &TrajectorySpec,
    state: &TargetState,
    steer: Option<Steer>,
    rng: &mut R,
) -> Result<TargetState, SimError> {
    if steer.is_some() && !spec.is_operator_driven() {
        return Err(SimError::SteerNotAllowed);
    }
    let mut next = *state;
    match spec {
        TrajectorySpec::Stationary => {}
        TrajectorySpec::Linear { velocity } => {
            next.velocity = *velocity;
            next.position = add(state.position, *velocity);
        }
        TrajectorySpec::Circular { center, rate_deg_per_step } => {
            let (s, c) = rate_deg_per_step.to_radians().sin_cos();
            let dx = state.position[0] - center[0];
            let dz = state.position[2] - center[2];
            next.position = [center[0] + c * dx - s * dz, state.position[1], center[2] + s * dx + c * dz];
            next.velocity = sub(next.position, state.position);
        }
        TrajectorySpec::RandomWalk { sigma, .. } => {
            let step = if *sigma > 0.0 {
                let normal = Normal::new(0.0, *sigma).expect("finite non-negative sigma");
                [normal.sample(rng), normal.sample(rng), 0.0]
            } else {
                [0.0; 3]
            };
            next.velocity = step;
            next.position = add(state.position, step);
        }
        TrajectorySpec::OperatorDriven => {
            let s = steer.unwrap_or_default();
            next.velocity = [s.vx, s.vy, 0.0];
            next.position = add(state.position, next.velocity);
        }
    }
    Ok(next)
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
