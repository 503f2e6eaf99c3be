//! Desk-scale scene and event synthesis.
//!
//! Scenes are rendered sharply at `substeps` instants per frame interval.
//! Events come from consecutive sharp renders, so each temporal bin sees the
//! motion of its own sub-interval. The captured intensity frame integrates the
//! sharp renders over the exposure window, which smears fast movers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::events::{Event, Polarity};
use super::frame::Frame;
use crate::error::{Error, Result};
use crate::rect::{BoxRect, ClassId};

#[inline]
fn log_intensity(v: u8) -> f64 {
    (1.0 + v as f64 / 255.0).ln()
}

/// Simplified ESIM-style generator: a pixel whose log-intensity changed by
/// `d` fires `floor(|d| / threshold)` events of sign `d`, spread uniformly over
/// `[t_start, t_end)`. Output is sorted by `(t, y, x)`.
pub fn synthesize_events(prev: &Frame, cur: &Frame, contrast_threshold: f64, t_start: u64, t_end: u64) -> Result<Vec<Event>> {
    prev.ensure_same_size(cur)?;
    if !(contrast_threshold > 0.0) {
        return Err(Error::InvalidArgument("contrast threshold must be positive".into()));
    }
    if t_end <= t_start {
        return Err(Error::InvalidArgument(format!("empty interval [{t_start}, {t_end})")));
    }
    let span = t_end - t_start;
    let side = cur.side();
    let mut out = Vec::new();
    for y in 0..side {
        for x in 0..side {
            let d = log_intensity(cur.get(x, y)) - log_intensity(prev.get(x, y));
            let k = (d.abs() / contrast_threshold).floor() as u64;
            if k == 0 {
                continue;
            }
            let p = if d > 0.0 { Polarity::Positive } else { Polarity::Negative };
            for j in 0..k {
                let t = t_start + ((2 * j + 1) as u128 * span as u128 / (2 * k) as u128) as u64;
                out.push(Event::new(x, y, t, p));
            }
        }
    }
    out.sort_by_key(|e| (e.t, e.y, e.x));
    Ok(out)
}

/// One moving rectangle. Positions are in pixels, velocities in pixels per
/// frame interval, times in frame units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub x: f64,
    pub y: f64,
    pub w: u32,
    pub h: u32,
    pub vx: f64,
    pub vy: f64,
    pub intensity: u8,
    pub class: ClassId,
    /// Visible while `on <= tau < off`; `None` means always visible.
    pub visible: Option<(f64, f64)>,
}

impl ShapeSpec {
    pub fn square(x: f64, y: f64, side: u32, vx: f64, vy: f64) -> Self {
        Self { x, y, w: side, h: side, vx, vy, intensity: 255, class: ClassId::OBJECT, visible: None }
    }

    fn is_visible(&self, tau: f64) -> bool {
        self.visible.is_none_or(|(on, off)| tau >= on && tau < off)
    }

    /// Pixel-snapped top-left corner at time `tau`; motion is frozen before 0.
    fn corner(&self, tau: f64) -> (i64, i64) {
        let tau = tau.max(0.0);
        ((self.x + self.vx * tau + 0.5).floor() as i64, (self.y + self.vy * tau + 0.5).floor() as i64)
    }

    fn rect(&self, tau: f64) -> BoxRect {
        let (x, y) = self.corner(tau);
        BoxRect::new(x as f64, y as f64, self.w as f64, self.h as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub side: u32,
    pub n_frames: usize,
    /// Explicit shapes; when empty, `random_shapes` are drawn from `seed`.
    pub shapes: Vec<ShapeSpec>,
    pub random_shapes: usize,
    pub random_shape_side: u32,
    pub random_max_speed: f64,
    pub seed: u64,
    pub background: u8,
    pub substeps: usize,
    /// Fraction of the frame interval integrated into each captured frame.
    pub exposure: f64,
    pub contrast_threshold: f64,
    pub frame_rate: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            side: 64,
            n_frames: 10,
            shapes: Vec::new(),
            random_shapes: 0,
            random_shape_side: 8,
            random_max_speed: 2.0,
            seed: 0,
            background: 0,
            substeps: 4,
            exposure: 0.0,
            contrast_threshold: 0.15,
            frame_rate: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u32,
    pub class: ClassId,
    pub rect: BoxRect,
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    /// Captured (exposure-integrated) frames.
    pub frames: Vec<Frame>,
    /// Sharp renders at the frame instants.
    pub reference: Vec<Frame>,
    /// Events of interval `[t*T, (t+1)*T)` for each frame `t`; frame 0 has none.
    pub events: Vec<Vec<Event>>,
    pub ground_truth: Vec<Vec<GroundTruthObject>>,
    pub interval_us: u64,
}

impl SyntheticSequence {
    pub fn interval(&self, t: usize) -> (u64, u64) {
        (t as u64 * self.interval_us, (t as u64 + 1) * self.interval_us)
    }
}

pub fn frame_interval_us(frame_rate: f64) -> u64 {
    (1e6 / frame_rate).round() as u64
}

fn random_shapes(cfg: &SceneConfig) -> Result<Vec<ShapeSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.random_shape_side as f64;
    let span = (cfg.n_frames.max(1) - 1) as f64;
    let room = |v: f64| -> Option<(f64, f64)> {
        let lo = (-v * span).max(0.0) + 1.0;
        let hi = cfg.side as f64 - s - (v * span).max(0.0) - 1.0;
        (hi > lo).then_some((lo, hi))
    };
    // whole layouts are redrawn when a shape cannot be placed
    for _layout in 0..200 {
        let mut shapes: Vec<ShapeSpec> = Vec::new();
        for _attempt in 0..500 {
            if shapes.len() == cfg.random_shapes {
                break;
            }
            let vx = rng.random_range(-cfg.random_max_speed..=cfg.random_max_speed);
            let vy = rng.random_range(-cfg.random_max_speed..=cfg.random_max_speed);
            let (Some((x0, x1)), Some((y0, y1))) = (room(vx), room(vy)) else { continue };
            let cand = ShapeSpec::square(rng.random_range(x0..x1).round(), rng.random_range(y0..y1).round(), cfg.random_shape_side, vx, vy);
            // one and a half shapes of clear space between edges at every frame
            let gap = 2.5 * s;
            let clash = shapes.iter().any(|o| {
                (0..cfg.n_frames).any(|t| {
                    let (a, b) = (cand.rect(t as f64).center(), o.rect(t as f64).center());
                    (a.0 - b.0).abs() < gap && (a.1 - b.1).abs() < gap
                })
            });
            if !clash {
                shapes.push(cand);
            }
        }
        if shapes.len() == cfg.random_shapes {
            return Ok(shapes);
        }
    }
    Err(Error::InvalidArgument("could not place non-overlapping random shapes".into()))
}

fn render(side: u32, background: u8, shapes: &[ShapeSpec], tau: f64) -> Frame {
    let mut f = Frame::filled(side, background, 0).expect("validated side");
    for s in shapes.iter().filter(|s| s.is_visible(tau)) {
        let (x0, y0) = s.corner(tau);
        for y in y0.max(0)..(y0 + s.h as i64).min(side as i64) {
            for x in x0.max(0)..(x0 + s.w as i64).min(side as i64) {
                f.set(x as u32, y as u32, s.intensity);
            }
        }
    }
    f
}

fn check_inside(shapes: &[ShapeSpec], side: u32, n_frames: usize, substeps: usize) -> Result<()> {
    for (i, s) in shapes.iter().enumerate() {
        for t in 0..n_frames {
            for k in 0..=substeps {
                let tau = t as f64 - 1.0 + k as f64 / substeps as f64;
                if tau < 0.0 && t > 0 || !s.is_visible(tau) {
                    continue;
                }
                let (x, y) = s.corner(tau);
                if x < 0 || y < 0 || x + s.w as i64 > side as i64 || y + s.h as i64 > side as i64 {
                    return Err(Error::ShapeLeavesFrame { index: i, frame: t, side });
                }
            }
        }
    }
    Ok(())
}

pub fn generate_synthetic_sequence(cfg: &SceneConfig) -> Result<SyntheticSequence> {
    if cfg.side == 0 || !cfg.side.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("frame side {} is not a power of two", cfg.side)));
    }
    if cfg.substeps == 0 || !(0.0..=1.0).contains(&cfg.exposure) {
        return Err(Error::InvalidArgument("substeps must be >= 1 and exposure within [0, 1]".into()));
    }
    let shapes = if cfg.shapes.is_empty() { random_shapes(cfg)? } else { cfg.shapes.clone() };
    check_inside(&shapes, cfg.side, cfg.n_frames, cfg.substeps)?;

    let interval_us = frame_interval_us(cfg.frame_rate);
    let sub = cfg.substeps;
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(cfg.n_frames),
        reference: Vec::with_capacity(cfg.n_frames),
        events: Vec::with_capacity(cfg.n_frames),
        ground_truth: Vec::with_capacity(cfg.n_frames),
        interval_us,
    };
    for t in 0..cfg.n_frames {
        let tau = t as f64;
        let mut sharp = render(cfg.side, cfg.background, &shapes, tau);
        sharp.timestamp_index = t as u64;

        let captured = if cfg.exposure > 0.0 {
            let mut acc = vec![0u32; sharp.pixels().len()];
            for k in 0..sub {
                let f = render(cfg.side, cfg.background, &shapes, tau - cfg.exposure * k as f64 / sub as f64);
                acc.iter_mut().zip(f.pixels()).for_each(|(a, &p)| *a += p as u32);
            }
            let px = acc.iter().map(|&a| ((a as f64 / sub as f64) + 0.5).floor() as u8).collect();
            Frame::new(cfg.side, px, t as u64)?
        } else {
            sharp.clone()
        };

        let mut events = Vec::new();
        if t > 0 {
            let t0 = t as u64 * interval_us;
            let mut prev = render(cfg.side, cfg.background, &shapes, tau - 1.0);
            for j in 0..sub {
                let cur = render(cfg.side, cfg.background, &shapes, tau - 1.0 + (j + 1) as f64 / sub as f64);
                let lo = t0 + (j as u64 * interval_us).div_ceil(sub as u64);
                let hi = t0 + ((j + 1) as u64 * interval_us).div_ceil(sub as u64);
                events.extend(synthesize_events(&prev, &cur, cfg.contrast_threshold, lo, hi)?);
                prev = cur;
            }
        }

        let gt = shapes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_visible(tau))
            .map(|(i, s)| GroundTruthObject { id: i as u32, class: s.class, rect: s.rect(tau) })
            .collect();

        seq.frames.push(captured);
        seq.reference.push(sharp);
        seq.events.push(events);
        seq.ground_truth.push(gt);
    }
    Ok(seq)
}
