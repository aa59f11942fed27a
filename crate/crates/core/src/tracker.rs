//! Normalized cross-correlation template tracker with slow template adaptation.
//!
//! Follows the usual ROI tracker contract: `init(frame, roi)` once, then
//! `update(frame) -> (success, box)` per frame. The search is exhaustive over
//! every integer placement within `search_radius` (Chebyshev) of the previous
//! top-left corner. Window statistics come from summed-area tables and all
//! sums are exact integers, so the score of a placement does not depend on the
//! order in which placements are visited.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, TrackerError};
use crate::simworld::Frame;

pub const DEFAULT_SEARCH_RADIUS: usize = 80;
pub const DEFAULT_ACCEPT_THRESHOLD: f64 = 0.45;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

/// Integer pixel rectangle; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BBox {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.w > 0
            && self.h > 0
            && self.x >= 0
            && self.y >= 0
            && self.x.checked_add(self.w).is_some_and(|r| r <= width as i64)
            && self.y.checked_add(self.h).is_some_and(|b| b <= height as i64)
    }

    pub fn contains_point(&self, x: i64, y: i64) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        Self { x: self.x + dx, y: self.y + dy, ..*self }
    }
}

/// A rectangular block of 8-bit intensities, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "patch buffer size");
        Self { width, height, data }
    }

    /// Copies `roi` out of `frame`. The caller guarantees the roi fits.
    pub fn from_frame(frame: &Frame, roi: &BBox) -> Self {
        debug_assert!(frame.contains(roi));
        let (x0, y0, w, h) = (roi.x as usize, roi.y as usize, roi.w as usize, roi.h as usize);
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * frame.width + x0;
            data.extend_from_slice(&frame.pixels[start..start + w]);
        }
        Self::new(w, h, data)
    }

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.width..(r + 1) * self.width]
    }
}

/// Pearson correlation from exact integer moments. Zero when either side has
/// no variance.
fn score_from_sums(n: i64, sa: i64, saa: i64, sb: i64, sbb: i64, sab: i64) -> f64 {
    let var_a = n * saa - sa * sa;
    let var_b = n * sbb - sb * sb;
    if var_a == 0 || var_b == 0 {
        return 0.0;
    }
    let cov = n * sab - sa * sb;
    (cov as f64 / (var_a as f64 * var_b as f64).sqrt()).clamp(-1.0, 1.0)
}

fn moments(p: &Patch) -> (i64, i64) {
    p.data.iter().fold((0i64, 0i64), |(s, ss), &v| {
        let v = v as i64;
        (s + v, ss + v * v)
    })
}

/// Normalized cross-correlation of two equally sized patches, in `[-1, 1]`.
pub fn ncc_score(a: &Patch, b: &Patch) -> Result<f64, TrackerError> {
    if a.dims() != b.dims() {
        return Err(TrackerError::PatchMismatch { a: a.dims(), b: b.dims() });
    }
    let (sa, saa) = moments(a);
    let (sb, sbb) = moments(b);
    let sab: i64 = a.data.iter().zip(&b.data).map(|(&x, &y)| x as i64 * y as i64).sum();
    Ok(score_from_sums(a.data.len() as i64, sa, saa, sb, sbb, sab))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Chebyshev radius of the placement search around the previous corner.
    pub search_radius: usize,
    pub accept_threshold: f64,
    pub learning_rate: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            search_radius: DEFAULT_SEARCH_RADIUS,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(ConfigError::invalid("tracker.learning_rate", "must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&self.accept_threshold) {
            return Err(ConfigError::invalid("tracker.accept_threshold", "must lie in [-1, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tracking,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub config: TrackerConfig,
    pub template: Patch,
    pub bbox: BBox,
    pub status: TrackStatus,
    frame_dims: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackUpdate {
    pub success: bool,
    pub bbox: BBox,
    pub score: f64,
    pub state: TrackerState,
}

impl TrackerState {
    pub fn init(frame: &Frame, roi: BBox, config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        if !frame.contains(&roi) {
            return Err(TrackerError::RoiOutOfBounds { roi, width: frame.width, height: frame.height });
        }
        let template = Patch::from_frame(frame, &roi);
        let (s, ss) = moments(&template);
        if template.data.len() as i64 * ss - s * s == 0 {
            return Err(TrackerError::Untrackable(roi));
        }
        Ok(Self { config, template, bbox: roi, status: TrackStatus::Tracking, frame_dims: frame.dims() })
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        self.frame_dims
    }

    pub fn update(&self, frame: &Frame) -> Result<TrackUpdate, TrackerError> {
        if frame.dims() != self.frame_dims {
            return Err(TrackerError::FrameMismatch { expected: self.frame_dims, got: frame.dims() });
        }
        let (best, score) = self.search(frame);
        let mut state = self.clone();
        let success = score >= self.config.accept_threshold;
        if success {
            let patch = Patch::from_frame(frame, &best);
            blend_template(&mut state.template, &patch, self.config.learning_rate);
            state.bbox = best;
            state.status = TrackStatus::Tracking;
        } else {
            state.status = TrackStatus::Lost;
        }
        Ok(TrackUpdate { success, bbox: state.bbox, score, state })
    }

    /// Best placement and its score. Ties keep the first placement in
    /// row-major order, i.e. the smallest `(dy, dx)`.
    fn search(&self, frame: &Frame) -> (BBox, f64) {
        let t = &self.template;
        let (w, h) = (t.width, t.height);
        let r = self.config.search_radius as i64;
        let (bx, by) = (self.bbox.x, self.bbox.y);
        let x_lo = (bx - r).max(0) as usize;
        let y_lo = (by - r).max(0) as usize;
        let x_hi = (bx + r).min((frame.width - w) as i64) as usize;
        let y_hi = (by + r).min((frame.height - h) as i64) as usize;

        let table = SummedArea::new(frame, x_lo, y_lo, x_hi + w, y_hi + h);
        let n = (w * h) as i64;
        let (st, stt) = moments(t);

        // Cross terms for one row of placements at a time. Exact in u32 while
        // n * 255^2 fits, which covers templates up to ~66k pixels.
        let nx = x_hi - x_lo + 1;
        let wide = n as u64 * 255 * 255 > u32::MAX as u64;
        let mut acc32 = vec![0u32; if wide { 0 } else { nx }];
        let mut acc64 = vec![0u64; if wide { nx } else { 0 }];

        let mut best = (self.bbox, f64::NEG_INFINITY);
        for y in y_lo..=y_hi {
            if wide {
                correlate_row_u64(t, frame, x_lo, y, &mut acc64);
            } else {
                correlate_row_u32(t, frame, x_lo, y, &mut acc32);
            }
            for i in 0..nx {
                let x = x_lo + i;
                let stp = if wide { acc64[i] as i64 } else { acc32[i] as i64 };
                let (sp, spp) = table.window(x, y, w, h);
                let score = score_from_sums(n, st, stt, sp, spp, stp);
                if score > best.1 {
                    best = (BBox::new(x as i64, y as i64, w as i64, h as i64), score);
                }
            }
        }
        best
    }
}

/// `acc[i] = sum over the template of t(r, c) * frame(x0 + i + c, y + r)`.
///
/// The caller guarantees the sums fit; wrapping ops keep the loop
/// vectorizable when overflow checks are on.
fn correlate_row_u32(t: &Patch, frame: &Frame, x0: usize, y: usize, acc: &mut [u32]) {
    let nx = acc.len();
    acc.fill(0);
    for r in 0..t.height {
        let start = (y + r) * frame.width + x0;
        let frow = &frame.pixels[start..start + nx + t.width - 1];
        for (c, &tv) in t.row(r).iter().enumerate() {
            // u8 * u8 fits in u16, which vectorizes without 32-bit multiplies.
            let tv = tv as u16;
            for (a, &f) in acc.iter_mut().zip(&frow[c..c + nx]) {
                *a = a.wrapping_add(tv.wrapping_mul(f as u16) as u32);
            }
        }
    }
}

/// Same as [`correlate_row_u32`] for templates too large for 32-bit sums.
fn correlate_row_u64(t: &Patch, frame: &Frame, x0: usize, y: usize, acc: &mut [u64]) {
    let nx = acc.len();
    acc.fill(0);
    for r in 0..t.height {
        let start = (y + r) * frame.width + x0;
        let frow = &frame.pixels[start..start + nx + t.width - 1];
        for (c, &tv) in t.row(r).iter().enumerate() {
            let tv = tv as u64;
            for (a, &f) in acc.iter_mut().zip(&frow[c..c + nx]) {
                *a = a.wrapping_add(tv.wrapping_mul(f as u64));
            }
        }
    }
}

fn blend_template(template: &mut Patch, patch: &Patch, rate: f64) {
    if rate == 0.0 {
        return;
    }
    for (t, &p) in template.data.iter_mut().zip(&patch.data) {
        let v = (1.0 - rate) * *t as f64 + rate * p as f64;
        *t = v.round().clamp(0.0, 255.0) as u8;
    }
}

/// Summed-area tables of intensity and squared intensity over the frame
/// region `[x0, x1) x [y0, y1)`.
struct SummedArea {
    x0: usize,
    y0: usize,
    stride: usize,
    sum: Vec<i64>,
    sq: Vec<i64>,
}

impl SummedArea {
    fn new(frame: &Frame, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        let stride = x1 - x0 + 1;
        let rows = y1 - y0 + 1;
        let mut sum = vec![0i64; stride * rows];
        let mut sq = vec![0i64; stride * rows];
        for y in y0..y1 {
            let (mut rs, mut rq) = (0i64, 0i64);
            let row = (y - y0 + 1) * stride;
            let prev = (y - y0) * stride;
            for x in x0..x1 {
                let v = frame.get(x, y) as i64;
                rs += v;
                rq += v * v;
                let i = x - x0 + 1;
                sum[row + i] = sum[prev + i] + rs;
                sq[row + i] = sq[prev + i] + rq;
            }
        }
        Self { x0, y0, stride, sum, sq }
    }

    fn window(&self, x: usize, y: usize, w: usize, h: usize) -> (i64, i64) {
        let (lx, ty) = (x - self.x0, y - self.y0);
        let a = ty * self.stride + lx;
        let b = ty * self.stride + lx + w;
        let c = (ty + h) * self.stride + lx;
        let d = (ty + h) * self.stride + lx + w;
        (
            self.sum[d] - self.sum[b] - self.sum[c] + self.sum[a],
            self.sq[d] - self.sq[b] - self.sq[c] + self.sq[a],
        )
    }
}
