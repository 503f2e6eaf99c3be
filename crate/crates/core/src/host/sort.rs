//! SORT-style multi-object tracking with a constant-velocity Kalman filter
//! over `[cx, cy, s, r, vcx, vcy, vs]` where `s` is area and `r = w/h`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::bbox::{BoundingBox, Detection, Source};
use crate::rect::{BoxRect, ClassId};

type State = SVector<f64, 7>;
type Cov = SMatrix<f64, 7, 7>;
type Obs = SVector<f64, 4>;
type ObsMat = SMatrix<f64, 4, 7>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortConfig {
    pub iou_threshold: f64,
    /// Steps a track may go unmatched before removal.
    pub max_age: u32,
    pub min_hits: u32,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.3, max_age: 3, min_hits: 1 }
    }
}

fn observe(r: &BoxRect) -> Obs {
    let (cx, cy) = r.center();
    Obs::new(cx, cy, r.w * r.h, r.w / r.h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBox {
    x: State,
    p: Cov,
}

impl KalmanBox {
    pub fn new(rect: &BoxRect) -> Self {
        let z = observe(rect);
        let x = State::from_column_slice(&[z[0], z[1], z[2], z[3], 0.0, 0.0, 0.0]);
        let p = Cov::from_diagonal(&State::from_column_slice(&[10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4]));
        Self { x, p }
    }

    pub fn state(&self) -> &State {
        &self.x
    }

    pub fn covariance(&self) -> &Cov {
        &self.p
    }

    pub fn predict(&mut self, dt: f64) {
        if self.x[2] + dt * self.x[6] <= 0.0 {
            self.x[6] = 0.0;
        }
        let mut f = Cov::identity();
        for i in 0..3 {
            f[(i, i + 4)] = dt;
        }
        let q = Cov::from_diagonal(&State::from_column_slice(&[1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4])) * dt;
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + q;
    }

    pub fn update(&mut self, rect: &BoxRect) {
        let mut h = ObsMat::zeros();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        let r = SMatrix::<f64, 4, 4>::from_diagonal(&Obs::new(1.0, 1.0, 10.0, 10.0));
        let y = observe(rect) - h * self.x;
        let s = h * self.p * h.transpose() + r;
        // S is symmetric positive definite: P is PSD and R is positive
        let s_inv = s.try_inverse().expect("innovation covariance is invertible");
        let k = self.p * h.transpose() * s_inv;
        self.x += k * y;
        self.p = (Cov::identity() - k * h) * self.p;
    }

    /// Box of the current state; `None` when area or aspect has degenerated.
    pub fn rect(&self) -> Option<BoxRect> {
        let (s, r) = (self.x[2], self.x[3]);
        if !(s > 0.0 && r > 0.0 && self.x.iter().all(|v| v.is_finite())) {
            return None;
        }
        let w = (s * r).sqrt();
        let h = s / w;
        Some(BoxRect::new(self.x[0] - w / 2.0, self.x[1] - h / 2.0, w, h))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub class: ClassId,
    pub kf: KalmanBox,
    pub hits: u32,
    pub hit_streak: u32,
    pub age: u32,
    pub time_since_update: u32,
}

impl Track {
    /// Confidence halves with every step without a matching detection.
    pub fn score(&self) -> f64 {
        0.5f64.powi(self.time_since_update as i32)
    }
}

/// Greedy one-to-one matching in descending IoU order; ties resolve by index.
pub fn greedy_match(iou: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in iou.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v >= threshold && v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let rows = iou.len();
    let cols = iou.iter().map(|r| r.len()).max().unwrap_or(0);
    let (mut used_r, mut used_c) = (vec![false; rows], vec![false; cols]);
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_r[i] && !used_c[j] {
            used_r[i] = true;
            used_c[j] = true;
            out.push((i, j));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SortTracker {
    cfg: SortConfig,
    source: Source,
    frame_side: f64,
    tracks: Vec<Track>,
    next_id: u64,
}

impl SortTracker {
    pub fn new(cfg: SortConfig, source: Source, frame_side: u32) -> Self {
        Self { cfg, source, frame_side: frame_side as f64, tracks: Vec::new(), next_id: 0 }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn config(&self) -> &SortConfig {
        &self.cfg
    }

    /// Predict by `dt`, associate, update, spawn and retire tracks. Returns the
    /// post-update estimate of every live track.
    pub fn step(&mut self, detections: &[Detection], dt: f64) -> Vec<BoundingBox> {
        assert!(dt > 0.0, "tracker step needs a positive dt");
        for t in &mut self.tracks {
            if t.time_since_update > 0 {
                t.hit_streak = 0;
            }
            t.kf.predict(dt);
            t.age += 1;
            t.time_since_update += 1;
        }
        self.tracks.retain(|t| t.kf.rect().is_some());

        let iou: Vec<Vec<f64>> = self
            .tracks
            .iter()
            .map(|t| {
                let pred = t.kf.rect().expect("degenerate tracks were removed");
                detections.iter().map(|d| if d.class == t.class { pred.iou(&d.rect) } else { 0.0 }).collect()
            })
            .collect();
        let matches = greedy_match(&iou, self.cfg.iou_threshold);
        let mut det_used = vec![false; detections.len()];
        for &(ti, di) in &matches {
            let t = &mut self.tracks[ti];
            t.kf.update(&detections[di].rect);
            t.hits += 1;
            t.hit_streak += 1;
            t.time_since_update = 0;
            det_used[di] = true;
        }
        for (d, _) in detections.iter().zip(&det_used).filter(|(d, used)| !**used && d.rect.is_valid()) {
            self.tracks.push(Track {
                id: self.next_id,
                class: d.class,
                kf: KalmanBox::new(&d.rect),
                hits: 1,
                hit_streak: 1,
                age: 0,
                time_since_update: 0,
            });
            self.next_id += 1;
        }
        let max_age = self.cfg.max_age;
        self.tracks.retain(|t| t.time_since_update <= max_age && t.kf.rect().is_some());
        self.emit(|t| t.kf.rect())
    }

    /// Boxes every live track would predict `dt` ahead, without changing state.
    pub fn predict_ahead(&self, dt: f64) -> Vec<BoundingBox> {
        self.emit(|t| {
            let mut kf = t.kf.clone();
            kf.predict(dt);
            kf.rect()
        })
    }

    fn emit(&self, rect: impl Fn(&Track) -> Option<BoxRect>) -> Vec<BoundingBox> {
        self.tracks
            .iter()
            .filter(|t| t.hits >= self.cfg.min_hits)
            .filter_map(|t| {
                let r = rect(t)?.clamp_to(self.frame_side)?;
                Some(BoundingBox { rect: r, class: t.class, score: t.score(), source: self.source, id: t.id })
            })
            .collect()
    }
}

/// Current estimates at `t` and predictions for `t+1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackerOutput {
    pub current: Vec<BoundingBox>,
    pub predicted: Vec<BoundingBox>,
}

/// Event-rate tracker: one predict/update cycle per temporal bin at
/// `dt = 1/N`, then a prediction to the next intensity frame.
#[derive(Debug, Clone)]
pub struct EventTracker {
    sort: SortTracker,
}

impl EventTracker {
    pub fn new(cfg: SortConfig, frame_side: u32) -> Self {
        Self { sort: SortTracker::new(cfg, Source::Event, frame_side) }
    }

    pub fn tracker(&self) -> &SortTracker {
        &self.sort
    }

    pub fn process(&mut self, per_bin: &[Vec<Detection>]) -> TrackerOutput {
        let n = per_bin.len().max(1) as f64;
        let mut current = Vec::new();
        for dets in per_bin {
            current = self.sort.step(dets, 1.0 / n);
        }
        TrackerOutput { current, predicted: self.sort.predict_ahead(1.0) }
    }
}

/// Frame-rate tracker for the intensity modality.
pub fn intensity_step(tracker: &mut SortTracker, detections: &[Detection]) -> TrackerOutput {
    let current = tracker.step(detections, 1.0);
    TrackerOutput { current, predicted: tracker.predict_ahead(1.0) }
}
