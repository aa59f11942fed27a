//! Reference implementations the integration tests check the library against.
//! Written directly from the definitions, without the library's shortcuts.

#![allow(dead_code)]

use std::cmp::Ordering;

use pantrack_core::tracker::Patch;
use pantrack_core::{BBox, ControllerConfig, Frame};

/// Pearson correlation kept as exact integers: `cov / sqrt(var_t * var_w)`
/// with `cov` and `var_w` scaled by the patch size. `var_t` is common to all
/// placements so it is left out of comparisons.
#[derive(Debug, Clone, Copy)]
pub struct ExactScore {
    cov: i128,
    var: i128,
    pub value: f64,
}

impl ExactScore {
    fn cmp(&self, other: &Self) -> Ordering {
        let sa = self.cov.signum();
        let sb = other.cov.signum();
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        // Same sign: compare cov^2 / var, flipped for negative scores.
        let lhs = self.cov * self.cov * other.var;
        let rhs = other.cov * other.cov * self.var;
        if sa > 0 { lhs.cmp(&rhs) } else { rhs.cmp(&lhs) }
    }
}

/// Mean-centred correlation of `t` against the frame window with corner
/// `(x, y)`, summed pixel by pixel.
pub fn exact_score(frame: &Frame, t: &Patch, x: usize, y: usize) -> ExactScore {
    let n = (t.width * t.height) as i128;
    assert!(n <= 32 * 32, "exact oracle sized for templates up to 1024 px");
    let window = |r: usize, c: usize| frame.pixels[(y + r) * frame.width + x + c] as i128;
    let (mut st, mut sw) = (0i128, 0i128);
    for r in 0..t.height {
        for c in 0..t.width {
            st += t.data[r * t.width + c] as i128;
            sw += window(r, c);
        }
    }
    // Centre on the mean scaled by n so everything stays integral.
    let (mut cov, mut vt, mut vw) = (0i128, 0i128, 0i128);
    for r in 0..t.height {
        for c in 0..t.width {
            let a = n * t.data[r * t.width + c] as i128 - st;
            let b = n * window(r, c) - sw;
            cov += a * b;
            vt += a * a;
            vw += b * b;
        }
    }
    if vt == 0 || vw == 0 {
        return ExactScore { cov: 0, var: 1, value: 0.0 };
    }
    assert_eq!(cov % n, 0);
    assert_eq!(vw % n, 0);
    let value = cov as f64 / ((vt as f64) * (vw as f64)).sqrt();
    ExactScore { cov: cov / n, var: vw / n, value }
}

/// Best placement of `t` among corners within Chebyshev `radius` of `prev`
/// that fit inside the frame. Scans dy then dx, keeping the first maximum.
/// Also returns how many placements reach that maximum.
pub fn ncc_argmax(frame: &Frame, t: &Patch, prev: (i64, i64), radius: i64) -> (BBox, ExactScore, usize) {
    let mut best: Option<(BBox, ExactScore, usize)> = None;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (x, y) = (prev.0 + dx, prev.1 + dy);
            if x < 0 || y < 0 || x as usize + t.width > frame.width || y as usize + t.height > frame.height {
                continue;
            }
            let s = exact_score(frame, t, x as usize, y as usize);
            match &mut best {
                Some((_, b, ties)) if s.cmp(b) == Ordering::Equal => *ties += 1,
                Some((_, b, _)) if s.cmp(b) == Ordering::Less => {}
                _ => best = Some((BBox::new(x, y, t.width as i64, t.height as i64), s, 1)),
            }
        }
    }
    best.expect("previous corner is a valid placement")
}

/// Copy of `frame` translated by `(dx, dy)`; uncovered pixels get `fill`.
pub fn shifted(frame: &Frame, dx: i64, dy: i64, fill: u8) -> Frame {
    let mut out = Frame::filled(frame.width, frame.height, fill, frame.seq + 1);
    for y in 0..frame.height as i64 {
        for x in 0..frame.width as i64 {
            let (sx, sy) = (x - dx, y - dy);
            if sx >= 0 && sy >= 0 && (sx as usize) < frame.width && (sy as usize) < frame.height {
                out.pixels[y as usize * frame.width + x as usize] = frame.pixels[sy as usize * frame.width + sx as usize];
            }
        }
    }
    out
}

/// Step the controller takes for a pixel error of magnitude `e`: none inside
/// the dead band, one small step up to the far threshold, and both the small
/// and far steps beyond it.
fn schedule(e: f64, dead: f64, far: f64, cfg: &ControllerConfig) -> f64 {
    let mut step = 0.0;
    if e > dead {
        step += cfg.step_small;
    }
    if e > far {
        step += cfg.step_far;
    }
    step
}

/// Pixel error model for [`scalar_lock_step`].
#[derive(Debug, Clone, Copy)]
pub enum PixelModel {
    /// `f * tan(offset)` on both axes: the on-axis gain, ~15.1 px/deg.
    Flat,
    /// Pan offset `a` seen from a camera at the target's own tilt `t`:
    /// `f * cos t * sin a / (sin^2 t + cos^2 t * cos a)`. Tilt offsets stay
    /// `f * tan(offset)`.
    TiltCircle { tilt_deg: f64 },
}

/// Predicted lock step for a stationary target whose bearing is `az`, `el`
/// degrees off the optical axis, iterating each axis on its own.
///
/// Record 0 and record 1 both see the initial offset (step 0 only starts the
/// tracker); record k sees the offset left after k - 1 moves.
pub fn scalar_lock_step(az: f64, el: f64, focal_px: f64, model: PixelModel, cfg: &ControllerConfig) -> usize {
    let px_y = |deg: f64| focal_px * deg.to_radians().tan().abs();
    let px_x = |deg: f64| match model {
        PixelModel::Flat => px_y(deg),
        PixelModel::TiltCircle { tilt_deg } => {
            let (st, ct) = tilt_deg.to_radians().sin_cos();
            let (sa, ca) = deg.to_radians().sin_cos();
            focal_px * (ct * sa).abs() / (st * st + ct * ct * ca)
        }
    };
    let inside = |a: f64, e: f64| px_x(a) <= cfg.dead_x && px_y(e) <= cfg.dead_y;
    let (mut a, mut e) = (az, el);
    if inside(a, e) {
        return 0;
    }
    for k in 1.. {
        if inside(a, e) {
            return k;
        }
        a -= a.signum() * schedule(px_x(a), cfg.dead_x, cfg.far_x, cfg);
        e -= e.signum() * schedule(px_y(e), cfg.dead_y, cfg.far_y, cfg);
        assert!(k < 1000, "scalar model does not converge");
    }
    unreachable!()
}

/// A seeded tracking problem: init frame, roi, and a later frame.
pub struct Case {
    pub init: Frame,
    pub roi: BBox,
    pub next: Frame,
    pub radius: usize,
}

/// Random frames up to 128x128 of several textures: white noise, coarse
/// levels with many exact ties, planted copies of the template, and flat
/// regions.
pub fn random_case<R: rand::Rng>(rng: &mut R) -> Case {
    let w = rng.random_range(24..=128usize);
    let h = rng.random_range(24..=128usize);
    let kind = rng.random_range(0..4u8);
    let levels: Vec<u8> = match kind {
        1 => vec![0, 90, 180],
        _ => (0..=255).collect(),
    };
    let mut init = Frame::filled(w, h, 0, 0);
    for p in init.pixels.iter_mut() {
        *p = levels[rng.random_range(0..levels.len())];
    }
    let tw = rng.random_range(3..=w.min(32) / 2 + 2);
    let th = rng.random_range(3..=h.min(32) / 2 + 2);
    let roi = loop {
        let x = rng.random_range(0..=w - tw) as i64;
        let y = rng.random_range(0..=h - th) as i64;
        let roi = BBox::new(x, y, tw as i64, th as i64);
        let t = Patch::from_frame(&init, &roi);
        if t.data.iter().any(|&v| v != t.data[0]) {
            break roi;
        }
        // Force some texture into a flat pick.
        init.pixels[y as usize * w + x as usize] ^= 0x55;
    };

    let mut next = Frame::filled(w, h, 0, 1);
    for p in next.pixels.iter_mut() {
        *p = levels[rng.random_range(0..levels.len())];
    }
    let template = Patch::from_frame(&init, &roi);
    match kind {
        2 => {
            // Two or three exact copies: equal best scores, tie-break decides.
            for _ in 0..rng.random_range(2..=3) {
                let x = rng.random_range(0..=w - tw);
                let y = rng.random_range(0..=h - th);
                for r in 0..th {
                    let dst = (y + r) * w + x;
                    next.pixels[dst..dst + tw].copy_from_slice(&template.data[r * tw..(r + 1) * tw]);
                }
            }
        }
        3 => {
            // Flat bands give zero-variance windows scored as 0.
            let band = rng.random_range(0..h);
            for y in band..(band + h / 3).min(h) {
                next.pixels[y * w..(y + 1) * w].fill(77);
            }
        }
        _ => {}
    }
    let radius = if rng.random_bool(0.75) { 128 } else { rng.random_range(1..=12) };
    Case { init, roi, next, radius }
}
