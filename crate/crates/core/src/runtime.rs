//! The closed loop: move target, render, track, compute error, step servos.
//!
//! [`Rig`] owns all mutable loop state and advances one step at a time, so
//! the same engine backs headless runs ([`run_scenario`]) and the live
//! service. Each loop step runs in a fixed order:
//!
//! 1. advance the target along its trajectory;
//! 2. render the (flipped) frame;
//! 3. update the tracker;
//! 4. only on tracker success: compute the error, update pan and tilt,
//!    actuate the gimbal;
//! 5. update the smoothed loop rate;
//! 6. record the step, including ground-truth error for the pose reached.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{
    compute_error, ema_fps, pan_update, tilt_update, ControlMode, ControllerConfig, ErrorPair, FpsEstimate,
};
use crate::error::{ScenarioError, SimError, TrackerError};
use crate::gimbal::{self, GimbalLimits, GimbalState};
use crate::scenario::{RoiSpec, ScenarioSpec};
use crate::simworld::{ground_truth_bbox, render_frame, step_target, Frame, Steer, TargetState};
use crate::tracker::{BBox, TrackerState};

/// Header of the metrics CSV.
pub const CSV_HEADER: [&str; 11] =
    ["step", "t", "errorx", "errory", "pan", "tilt", "status", "score", "fps", "gt_errorx", "gt_errory"];

/// Stream offset separating the trajectory's random stream from frame noise.
const WALK_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Ok,
    Lost,
    Idle,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Lost => "lost",
            Self::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// Measured error; `None` unless the tracker produced a box this step.
    pub errorx: Option<f64>,
    pub errory: Option<f64>,
    pub pan: f64,
    pub tilt: f64,
    pub status: TrackStatus,
    pub score: Option<f64>,
    pub fps: f64,
    pub gt_errorx: Option<f64>,
    pub gt_errory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub time_to_lock: Option<usize>,
    pub rms_error_after_lock: Option<f64>,
    pub max_overshoot: Option<f64>,
    pub lost_count: usize,
    pub mean_fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Unpaced; loop time is the nominal `1 / loop_hz`.
    Headless,
    /// Sleeps toward `loop_hz` and feeds the measured loop time to the smoother.
    Paced,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Result of one loop step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub frame: Frame,
    pub record: StepRecord,
    /// Box reported by the tracker this step, if any.
    pub bbox: Option<BBox>,
    /// Set when a requested roi could not be used; the prior tracker state is kept.
    pub roi_rejected: Option<TrackerError>,
}

/// Mutable state of one running scenario.
#[derive(Debug, Clone)]
pub struct Rig {
    spec: ScenarioSpec,
    controller: ControllerConfig,
    target: TargetState,
    gimbal: GimbalState,
    /// Angles held by the controller; the gimbal moves toward them.
    command: GimbalState,
    tracker: Option<TrackerState>,
    fps: FpsEstimate,
    noise_rng: ChaCha8Rng,
    walk_rng: ChaCha8Rng,
    steer: Option<Steer>,
    step: usize,
    seq: u64,
}

impl Rig {
    pub fn new(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        spec.validate()?;
        let noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let walk_rng = walk_rng_for(&spec);
        Ok(Self {
            controller: spec.controller,
            target: spec.target,
            gimbal: spec.initial_pose,
            command: spec.initial_pose,
            tracker: None,
            fps: FpsEstimate::default(),
            noise_rng,
            walk_rng,
            steer: None,
            step: 0,
            seq: 0,
            spec,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn gimbal(&self) -> GimbalState {
        self.gimbal
    }

    pub fn target(&self) -> &TargetState {
        &self.target
    }

    pub fn tracker(&self) -> Option<&TrackerState> {
        self.tracker.as_ref()
    }

    pub fn mode(&self) -> ControlMode {
        self.controller.mode
    }

    pub fn fps(&self) -> f64 {
        self.fps.fps
    }

    pub fn set_mode(&mut self, mode: ControlMode) {
        self.controller.mode = mode;
    }

    /// Records the operator's steering velocity for operator-driven scenarios.
    pub fn set_steer(&mut self, steer: Steer) -> Result<(), SimError> {
        if !self.spec.trajectory.is_operator_driven() {
            return Err(SimError::SteerNotAllowed);
        }
        self.steer = Some(steer);
        Ok(())
    }

    /// Restores the step-0 world with no tracker. Frame sequence numbers keep
    /// increasing across resets.
    pub fn reset(&mut self) {
        let seq = self.seq;
        *self = Self::new(self.spec.clone()).expect("spec validated at construction");
        self.seq = seq;
    }

    fn limits(&self) -> GimbalLimits {
        match self.controller.mode {
            ControlMode::Faithful => self.spec.limits.widened_for_faithful(),
            ControlMode::Corrected => self.spec.limits,
        }
    }

    fn target_visible(&self) -> bool {
        self.spec.blank_from_step.is_none_or(|from| self.step < from)
    }

    fn render(&mut self) -> Frame {
        let target = self.target_visible().then_some(self.target);
        let frame = render_frame(
            &self.spec.camera,
            self.gimbal,
            target.as_ref(),
            self.spec.noise_sigma,
            &mut self.noise_rng,
            self.seq,
        );
        self.seq += 1;
        frame
    }

    fn ground_truth_error(&self) -> Option<ErrorPair> {
        if !self.target_visible() {
            return None;
        }
        let cam = &self.spec.camera;
        ground_truth_bbox(cam, self.gimbal, &self.target).map(|b| compute_error(&b, cam.frame_width, cam.frame_height))
    }

    /// Step 0: renders the initial frame and initialises the tracker on `roi`.
    pub fn start(&mut self, roi: RoiSpec) -> Result<StepOutput, ScenarioError> {
        let frame = self.render();
        let roi = match roi {
            RoiSpec::Explicit(b) => b,
            RoiSpec::Auto => self.ground_truth_roi().ok_or(ScenarioError::TargetNotVisible)?,
        };
        let tracker = TrackerState::init(&frame, roi, self.spec.tracker).map_err(ScenarioError::TrackerInit)?;
        self.tracker = Some(tracker);
        Ok(self.record(frame, Some(roi), Some(1.0)))
    }

    /// Step 0 without a tracker, as when an operator has yet to pick a region.
    pub fn start_idle(&mut self) -> StepOutput {
        let frame = self.render();
        self.record(frame, None, None)
    }

    /// Ground-truth box of the target in the current pose.
    pub fn ground_truth_roi(&self) -> Option<BBox> {
        if !self.target_visible() {
            return None;
        }
        ground_truth_bbox(&self.spec.camera, self.gimbal, &self.target)
    }

    /// One loop step. When `roi` is given the tracker is re-initialised on
    /// this step's frame instead of updated; if that fails the previous
    /// tracker (if any) is updated as usual and the error is reported.
    /// A non-positive `looptime` leaves the rate estimate unchanged.
    pub fn advance(&mut self, looptime: f64, roi: Option<BBox>) -> StepOutput {
        self.step += 1;
        let steer = if self.spec.trajectory.is_operator_driven() { self.steer } else { None };
        self.target = step_target(&self.spec.trajectory, &self.target, steer, &mut self.walk_rng)
            .expect("steer is only forwarded to operator-driven trajectories");
        let frame = self.render();

        let mut rejected = None;
        let reinit = match roi.map(|r| (r, TrackerState::init(&frame, r, self.spec.tracker))) {
            Some((r, Ok(tracker))) => {
                self.tracker = Some(tracker);
                Some(r)
            }
            Some((_, Err(e))) => {
                rejected = Some(e);
                None
            }
            None => None,
        };

        let (bbox, score) = if let Some(r) = reinit {
            (Some(r), Some(1.0))
        } else if let Some(tracker) = self.tracker.take() {
            let update = tracker.update(&frame).expect("frame size fixed by the scenario camera");
            self.tracker = Some(update.state);
            if update.success {
                self.actuate(&update.bbox);
                (Some(update.bbox), Some(update.score))
            } else {
                (None, Some(update.score))
            }
        } else {
            (None, None)
        };

        self.fps = ema_fps(self.fps, looptime).unwrap_or(self.fps);
        let mut out = self.record(frame, bbox, score);
        out.roi_rejected = rejected;
        out
    }

    fn actuate(&mut self, bbox: &BBox) {
        let cam = &self.spec.camera;
        let e = compute_error(bbox, cam.frame_width, cam.frame_height);
        self.command.pan_deg = pan_update(e.errorx, self.command.pan_deg, &self.controller);
        self.command.tilt_deg = tilt_update(e.errory, self.command.tilt_deg, &self.controller);
        self.gimbal = gimbal::apply(self.gimbal, self.command, &self.limits());
    }

    fn record(&self, frame: Frame, bbox: Option<BBox>, score: Option<f64>) -> StepOutput {
        let cam = &self.spec.camera;
        let measured = bbox.map(|b| compute_error(&b, cam.frame_width, cam.frame_height));
        let status = match (&self.tracker, bbox) {
            (None, _) => TrackStatus::Idle,
            (Some(_), Some(_)) => TrackStatus::Ok,
            (Some(_), None) => TrackStatus::Lost,
        };
        let gt = self.ground_truth_error();
        let record = StepRecord {
            step: self.step,
            t: self.step as f64 / self.spec.loop_hz,
            errorx: measured.map(|e| e.errorx),
            errory: measured.map(|e| e.errory),
            pan: self.gimbal.pan_deg,
            tilt: self.gimbal.tilt_deg,
            status,
            score,
            fps: self.fps.fps,
            gt_errorx: gt.map(|e| e.errorx),
            gt_errory: gt.map(|e| e.errory),
        };
        StepOutput { frame, record, bbox, roi_rejected: None }
    }
}

fn walk_rng_for(spec: &ScenarioSpec) -> ChaCha8Rng {
    let seed = match spec.trajectory {
        crate::simworld::TrajectorySpec::RandomWalk { seed, .. } => seed,
        _ => spec.seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WALK_STREAM);
    rng
}

/// Runs `spec.steps` loop steps (step 0 included) and summarises them.
pub fn run_scenario(spec: &ScenarioSpec, mode: RunMode) -> Result<Run, ScenarioError> {
    let mut rig = Rig::new(spec.clone())?;
    let period = Duration::from_secs_f64(1.0 / spec.loop_hz);
    let nominal = 1.0 / spec.loop_hz;
    let mut records = Vec::with_capacity(spec.steps);
    let mut last = Instant::now();
    records.push(rig.start(spec.roi)?.record);
    for _ in 1..spec.steps {
        let looptime = match mode {
            RunMode::Headless => nominal,
            RunMode::Paced => {
                let elapsed = last.elapsed();
                if elapsed < period {
                    std::thread::sleep(period - elapsed);
                }
                let now = Instant::now();
                let dt = now.duration_since(last).as_secs_f64();
                last = now;
                dt
            }
        };
        records.push(rig.advance(looptime, None).record);
    }
    let summary = summarize(&records, &spec.controller, spec.lock_dwell);
    Ok(Run { records, summary })
}

fn inside_dead_bands(r: &StepRecord, cfg: &ControllerConfig) -> bool {
    r.status == TrackStatus::Ok
        && matches!((r.errorx, r.errory), (Some(ex), Some(ey)) if ex.abs() <= cfg.dead_x && ey.abs() <= cfg.dead_y)
}

/// First step `s` such that every step in `[s, s + dwell]` is tracked with
/// both errors inside the dead bands.
pub fn time_to_lock(series: &[StepRecord], cfg: &ControllerConfig, dwell: usize) -> Option<usize> {
    let mut run_start = None;
    for (i, r) in series.iter().enumerate() {
        if inside_dead_bands(r, cfg) {
            let start = *run_start.get_or_insert(i);
            if i - start >= dwell {
                return Some(start);
            }
        } else {
            run_start = None;
        }
    }
    None
}

/// Largest |error| after the first sign reversal relative to the first
/// non-zero error; zero when the sign never reverses.
fn overshoot(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let values: Vec<f64> = values.flatten().collect();
    let Some(initial) = values.iter().copied().find(|v| *v != 0.0) else {
        return 0.0;
    };
    match values.iter().position(|v| v * initial < 0.0) {
        Some(i) => values[i..].iter().fold(0.0, |m, v| m.max(v.abs())),
        None => 0.0,
    }
}

pub fn summarize(series: &[StepRecord], cfg: &ControllerConfig, dwell: usize) -> RunSummary {
    let lock = time_to_lock(series, cfg, dwell);
    let (rms, max_overshoot) = match lock {
        Some(s) => {
            let sq: Vec<f64> = series[s..]
                .iter()
                .filter_map(|r| Some(r.errorx? * r.errorx? + r.errory? * r.errory?))
                .collect();
            let rms = if sq.is_empty() { 0.0 } else { (sq.iter().sum::<f64>() / sq.len() as f64).sqrt() };
            let ox = overshoot(series.iter().map(|r| r.errorx));
            let oy = overshoot(series.iter().map(|r| r.errory));
            (Some(rms), Some(ox.max(oy)))
        }
        None => (None, None),
    };
    let lost_count = series
        .windows(2)
        .filter(|w| w[0].status == TrackStatus::Ok && w[1].status == TrackStatus::Lost)
        .count();
    let mean_fps = if series.is_empty() { 0.0 } else { series.iter().map(|r| r.fps).sum::<f64>() / series.len() as f64 };
    RunSummary { time_to_lock: lock, rms_error_after_lock: rms, max_overshoot, lost_count, mean_fps }
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig6).unwrap_or_default()
}

/// Writes the metrics series as CSV.
pub fn write_csv<W: Write>(series: &[StepRecord], out: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ScenarioError::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in series {
        w.write_record([
            r.step.to_string(),
            format_sig6(r.t),
            opt(r.errorx),
            opt(r.errory),
            format_sig6(r.pan),
            format_sig6(r.tilt),
            r.status.as_str().to_string(),
            opt(r.score),
            format_sig6(r.fps),
            opt(r.gt_errorx),
            opt(r.gt_errory),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `key=value` lines for a summary; absent values print as `none`.
pub fn summary_lines(s: &RunSummary) -> Vec<String> {
    let o = |v: Option<f64>| v.map(format_sig6).unwrap_or_else(|| "none".to_string());
    vec![
        format!("time_to_lock={}", s.time_to_lock.map(|v| v.to_string()).unwrap_or_else(|| "none".to_string())),
        format!("rms_error_after_lock={}", o(s.rms_error_after_lock)),
        format!("max_overshoot={}", o(s.max_overshoot)),
        format!("lost_count={}", s.lost_count),
        format!("mean_fps={}", format_sig6(s.mean_fps)),
    ]
}
