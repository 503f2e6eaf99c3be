//! Pluggable detectors. The oracle reads ground truth (optionally gated on
//! reconstruction quality); the blob detector finds connected event regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bbox::Detection;
use crate::imaging::{EventCountMap, Frame, GroundTruthObject};
use crate::rect::{BoxRect, ClassId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Intensity,
    Event,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorCapabilities {
    pub modality: Modality,
    pub classes: Vec<ClassId>,
}

/// Detector over reconstructed intensity frames.
pub trait IntensityDetector {
    fn capabilities(&self) -> DetectorCapabilities;
    fn detect(&mut self, frame_index: usize, image: &Frame) -> Vec<Detection>;
}

/// Detector over one event frame (per-pixel counts of one temporal bin).
pub trait EventDetector {
    fn capabilities(&self) -> DetectorCapabilities;
    fn detect(&mut self, events: &EventCountMap) -> Vec<Detection>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Uniform jitter in pixels applied to each box coordinate.
    pub jitter: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Report a box only if the mean absolute error between the image and
    /// the sharp reference inside it is at most this.
    pub gate: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { jitter: 0.0, dropout: 0.0, seed: 0, gate: None }
    }
}

/// Perturbed ground truth standing in for a trained detector.
pub struct OracleDetector {
    ground_truth: Vec<Vec<GroundTruthObject>>,
    reference: Vec<Frame>,
    cfg: OracleConfig,
    rng: ChaCha8Rng,
}

impl OracleDetector {
    pub fn new(ground_truth: Vec<Vec<GroundTruthObject>>, reference: Vec<Frame>, cfg: OracleConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self { ground_truth, reference, cfg, rng }
    }

    fn passes_gate(&self, frame_index: usize, image: &Frame, rect: &BoxRect) -> bool {
        let (Some(limit), Some(reference)) = (self.cfg.gate, self.reference.get(frame_index)) else { return true };
        let Some(r) = rect.clamp_to(image.side() as f64) else { return false };
        let (x0, y0) = (r.x.floor() as u32, r.y.floor() as u32);
        let (x1, y1) = (r.right().ceil() as u32, r.bottom().ceil() as u32);
        let mut sum = 0u64;
        for y in y0..y1 {
            for x in x0..x1 {
                sum += image.get(x, y).abs_diff(reference.get(x, y)) as u64;
            }
        }
        let n = ((x1 - x0) * (y1 - y0)).max(1) as f64;
        sum as f64 / n <= limit
    }
}

impl IntensityDetector for OracleDetector {
    fn capabilities(&self) -> DetectorCapabilities {
        let mut classes: Vec<ClassId> = self.ground_truth.iter().flatten().map(|g| g.class).collect();
        classes.sort();
        classes.dedup();
        DetectorCapabilities { modality: Modality::Intensity, classes }
    }

    fn detect(&mut self, frame_index: usize, image: &Frame) -> Vec<Detection> {
        let gts = self.ground_truth.get(frame_index).cloned().unwrap_or_default();
        let mut out = Vec::new();
        for g in gts {
            // draw unconditionally so the noise stream does not depend on the gate
            let drop = self.rng.random::<f64>() < self.cfg.dropout;
            let j = self.cfg.jitter;
            let mut noise = [0.0; 4];
            if j > 0.0 {
                noise.iter_mut().for_each(|n| *n = self.rng.random_range(-j..=j));
            }
            if drop || !self.passes_gate(frame_index, image, &g.rect) {
                continue;
            }
            let r = g.rect;
            let rect = BoxRect::new(r.x + noise[0], r.y + noise[1], (r.w + noise[2]).max(1.0), (r.h + noise[3]).max(1.0));
            out.push(Detection { rect, class: g.class, score: 1.0 });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    pub min_area: usize,
    /// Square dilation radius used only to join nearby pixels into one blob.
    pub dilation: u32,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self { min_area: 1, dilation: 0 }
    }
}

/// 8-connected components of active pixels. Boxes bound the active pixels
/// of each component; the score is their density in the box.
#[derive(Debug, Clone, Default)]
pub struct BlobDetector {
    pub cfg: BlobConfig,
}

impl BlobDetector {
    pub fn new(cfg: BlobConfig) -> Self {
        Self { cfg }
    }
}

impl EventDetector for BlobDetector {
    fn capabilities(&self) -> DetectorCapabilities {
        DetectorCapabilities { modality: Modality::Event, classes: vec![ClassId::OBJECT] }
    }

    fn detect(&mut self, events: &EventCountMap) -> Vec<Detection> {
        let side = events.side as i64;
        let active: Vec<bool> = events.counts.iter().map(|&c| c > 0).collect();
        let d = self.cfg.dilation as i64;
        let mask: Vec<bool> = if d == 0 {
            active.clone()
        } else {
            let mut m = vec![false; active.len()];
            for (i, _) in active.iter().enumerate().filter(|(_, &a)| a) {
                let (x, y) = (i as i64 % side, i as i64 / side);
                for ny in (y - d).max(0)..=(y + d).min(side - 1) {
                    for nx in (x - d).max(0)..=(x + d).min(side - 1) {
                        m[(ny * side + nx) as usize] = true;
                    }
                }
            }
            m
        };

        let mut label = vec![usize::MAX; mask.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..mask.len() {
            if !mask[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            label[start] = id;
            stack.push(start);
            let (mut x0, mut y0, mut x1, mut y1, mut n) = (i64::MAX, i64::MAX, -1i64, -1i64, 0usize);
            while let Some(i) = stack.pop() {
                let (x, y) = (i as i64 % side, i as i64 / side);
                if active[i] {
                    (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
                    n += 1;
                }
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= side || ny >= side {
                            continue;
                        }
                        let j = (ny * side + nx) as usize;
                        if mask[j] && label[j] == usize::MAX {
                            label[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
            out.push((n, x0, y0, x1, y1));
        }
        out.into_iter()
            .filter(|&(n, ..)| n >= self.cfg.min_area.max(1))
            .map(|(n, x0, y0, x1, y1)| {
                let rect = BoxRect::new(x0 as f64, y0 as f64, (x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64);
                Detection { rect, class: ClassId::OBJECT, score: n as f64 / rect.area() }
            })
            .collect()
    }
}
