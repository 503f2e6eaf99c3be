//! Confidence-filtered fusion of intensity and event track boxes.

use serde::{Deserialize, Serialize};

use super::bbox::{BoundingBox, Source};
use crate::error::{Error, Result};
use crate::rect::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionFeatures {
    pub class: ClassId,
    pub source: Source,
    pub size: f64,
    /// Height over width.
    pub aspect_ratio: f64,
    /// Max IoU against other boxes of the same source.
    pub overlap_ratio: f64,
    /// Same-source box centers inside this box.
    pub crowdedness: u32,
    pub support_value: u8,
    pub score: f64,
}

pub const SUPPORT_IOU: f64 = 0.7;
pub const PARTNER_IOU: f64 = 0.5;
pub const TEMPORAL_IOU: f64 = 0.5;
pub const CONFIDENCE_THRESHOLD: f64 = 0.7;

/// Features of `boxes[index]` relative to the others in `boxes`.
pub fn extract_features(boxes: &[BoundingBox], index: usize) -> FusionFeatures {
    let b = &boxes[index];
    let mut overlap: f64 = 0.0;
    let mut crowd = 0;
    let mut support = 0;
    for (_, o) in boxes.iter().enumerate().filter(|&(j, _)| j != index) {
        let iou = b.iou(o);
        if o.source == b.source {
            overlap = overlap.max(iou);
            let (cx, cy) = o.rect.center();
            if b.rect.contains_point(cx, cy) {
                crowd += 1;
            }
        } else if iou >= SUPPORT_IOU {
            support = 1;
        }
    }
    FusionFeatures {
        class: b.class,
        source: b.source,
        size: b.rect.area(),
        aspect_ratio: b.rect.h / b.rect.w,
        overlap_ratio: overlap,
        crowdedness: crowd,
        support_value: support,
        score: b.score,
    }
}

pub trait ConfidenceScorer {
    fn score(&self, f: &FusionFeatures) -> f64;
}

/// Deterministic linear stand-in for a learned scorer.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearScorer;

impl ConfidenceScorer for LinearScorer {
    fn score(&self, f: &FusionFeatures) -> f64 {
        let v = 0.5 + 0.4 * f.support_value as f64 - 0.3 * f.overlap_ratio + 0.2 * f.score.min(1.0)
            - 0.1 * (f.crowdedness.min(3) as f64) / 3.0;
        v.clamp(0.0, 1.0)
    }
}

impl<F: Fn(&FusionFeatures) -> f64> ConfidenceScorer for F {
    fn score(&self, f: &FusionFeatures) -> f64 {
        self(f)
    }
}

/// Confidence of every box; errors if the scorer leaves `[0, 1]`.
pub fn confidences(boxes: &[BoundingBox], scorer: &dyn ConfidenceScorer) -> Result<Vec<f64>> {
    (0..boxes.len())
        .map(|i| {
            let c = scorer.score(&extract_features(boxes, i));
            if (0.0..=1.0).contains(&c) {
                Ok(c)
            } else {
                Err(Error::ScoreOutOfRange(c))
            }
        })
        .collect()
}

/// Slack for comparing sums of decimal constants against the threshold.
const SCORE_EPS: f64 = 1e-9;

/// Indices of boxes whose confidence reaches `threshold`.
pub fn score_and_filter(conf: &[f64], threshold: f64) -> Vec<usize> {
    (0..conf.len()).filter(|&i| conf[i] >= threshold - SCORE_EPS).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionStrategy {
    Intersection,
    Union,
    Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub strategy: FusionStrategy,
    pub threshold: f64,
    /// Require equal class labels when searching for a partner.
    pub match_class: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { strategy: FusionStrategy::Confidence, threshold: CONFIDENCE_THRESHOLD, match_class: false }
    }
}

/// Fuse each filtered box with its best partner among all other boxes.
pub fn fuse_boxes(boxes: &[BoundingBox], conf: &[f64], filtered: &[usize], cfg: &FusionConfig) -> Vec<BoundingBox> {
    filtered
        .iter()
        .map(|&i| {
            let b = boxes[i];
            let partner = boxes
                .iter()
                .enumerate()
                .filter(|&(j, o)| j != i && (!cfg.match_class || o.class == b.class))
                .map(|(j, o)| (j, b.iou(o)))
                .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((j, v)),
                });
            let Some((j, _)) = partner.filter(|&(_, v)| v >= PARTNER_IOU) else { return b };
            let o = boxes[j];
            let rect = match cfg.strategy {
                FusionStrategy::Intersection => b.rect.intersection(&o.rect).expect("partners overlap"),
                FusionStrategy::Union => b.rect.hull(&o.rect),
                FusionStrategy::Confidence if conf[j] > conf[i] => o.rect,
                FusionStrategy::Confidence => b.rect,
            };
            BoundingBox { rect, ..b }
        })
        .collect()
}

/// Keep fused boxes correlated with the previous frame's set.
pub fn temporal_filter(fused: &[BoundingBox], prev: Option<&[BoundingBox]>) -> Vec<BoundingBox> {
    match prev {
        None => fused.to_vec(),
        Some(prev) => {
            fused.iter().filter(|b| prev.iter().any(|p| b.iou(p) >= TEMPORAL_IOU)).copied().collect()
        }
    }
}

/// Score, filter, fuse, then drop fused boxes that duplicate a stronger one.
pub fn fuse(intensity: &[BoundingBox], event: &[BoundingBox], cfg: &FusionConfig, scorer: &dyn ConfidenceScorer) -> Result<Vec<BoundingBox>> {
    let boxes: Vec<BoundingBox> = intensity.iter().chain(event).copied().collect();
    let conf = confidences(&boxes, scorer)?;
    let kept = score_and_filter(&conf, cfg.threshold);
    let fused = fuse_boxes(&boxes, &conf, &kept, cfg);
    let mut order: Vec<usize> = (0..fused.len()).collect();
    // stable preference: confidence, then intensity, then track id
    order.sort_by(|&a, &b| {
        let (ia, ib) = (kept[a], kept[b]);
        conf[ib].total_cmp(&conf[ia]).then(boxes[ia].source.cmp(&boxes[ib].source)).then(boxes[ia].id.cmp(&boxes[ib].id))
    });
    let mut out: Vec<BoundingBox> = Vec::new();
    for k in order {
        let f = fused[k];
        if out.iter().all(|o| f.iou(o) < PARTNER_IOU) {
            out.push(BoundingBox { score: conf[kept[k]], ..f });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rect::BoxRect;

    fn bx(x: f64, y: f64, w: f64, h: f64, source: Source, id: u64) -> BoundingBox {
        BoundingBox { rect: BoxRect::new(x, y, w, h), class: ClassId::OBJECT, score: 1.0, source, id }
    }

    #[test]
    fn lone_and_colocated_features() {
        let lone = [bx(0.0, 0.0, 4.0, 4.0, Source::Intensity, 0)];
        let f = extract_features(&lone, 0);
        assert_eq!((f.overlap_ratio, f.crowdedness, f.support_value), (0.0, 0, 0));
        let pair = [bx(0.0, 0.0, 4.0, 4.0, Source::Intensity, 0), bx(0.0, 0.0, 4.0, 4.0, Source::Event, 0)];
        assert_eq!(extract_features(&pair, 0).support_value, 1);
        assert_eq!(extract_features(&pair, 1).support_value, 1);
    }

    #[test]
    fn crafted_layout_matches_hand_table() {
        // A: intensity 10x10 at the origin.
        // B: intensity 10x10 at (6,0); IoU(A,B) = 40/160.
        // C: intensity 2x2 at (1,1); its center lies inside A, and IoU(A,C) = 4/100.
        // D: event 10x10 at (1,0); IoU(A,D) = 90/110 and IoU(B,D) = 50/150.
        let boxes = [
            bx(0.0, 0.0, 10.0, 10.0, Source::Intensity, 0),
            bx(6.0, 0.0, 10.0, 10.0, Source::Intensity, 1),
            bx(1.0, 1.0, 2.0, 2.0, Source::Intensity, 2),
            bx(1.0, 0.0, 10.0, 10.0, Source::Event, 0),
        ];
        // (OR, CR, SV)
        let table = [(0.25, 1, 1), (0.25, 0, 0), (0.04, 0, 0), (0.0, 0, 1)];
        for (i, &(or, cr, sv)) in table.iter().enumerate() {
            let f = extract_features(&boxes, i);
            assert!((f.overlap_ratio - or).abs() < 1e-12, "box {i}");
            assert_eq!((f.crowdedness, f.support_value), (cr, sv), "box {i}");
        }
        assert_eq!(extract_features(&boxes, 3).aspect_ratio, 1.0);
        assert_eq!(extract_features(&boxes, 2).size, 4.0);
    }

    #[test]
    fn linear_scorer_values() {
        let base = extract_features(&[bx(0.0, 0.0, 4.0, 4.0, Source::Intensity, 0)], 0);
        let supported = FusionFeatures { support_value: 1, ..base };
        assert!((LinearScorer.score(&supported) - 1.0).abs() < 1e-12);
        let dup = FusionFeatures { overlap_ratio: 0.9, ..base };
        // 0.5 - 0.27 + 0.2
        assert!((LinearScorer.score(&dup) - 0.43).abs() < 1e-12);
        assert!(LinearScorer.score(&dup) < CONFIDENCE_THRESHOLD);
        let stale = FusionFeatures { score: 0.5, ..base };
        assert!((LinearScorer.score(&stale) - 0.6).abs() < 1e-12);
        assert!((LinearScorer.score(&base) - CONFIDENCE_THRESHOLD).abs() < 1e-12);
    }

    #[test]
    fn constant_scorers_and_range_check() {
        let boxes = [bx(0.0, 0.0, 4.0, 4.0, Source::Intensity, 0), bx(9.0, 9.0, 4.0, 4.0, Source::Event, 0)];
        let one = |_: &FusionFeatures| 1.0;
        let zero = |_: &FusionFeatures| 0.0;
        assert_eq!(score_and_filter(&confidences(&boxes, &one).unwrap(), 0.7), vec![0, 1]);
        assert!(score_and_filter(&confidences(&boxes, &zero).unwrap(), 0.7).is_empty());
        let bad = |_: &FusionFeatures| 1.5;
        assert!(matches!(confidences(&boxes, &bad), Err(Error::ScoreOutOfRange(_))));
    }

    #[test]
    fn strategies_on_identical_overlapping_and_distant_partners() {
        let all = [FusionStrategy::Intersection, FusionStrategy::Union, FusionStrategy::Confidence];
        let same = [bx(2.0, 2.0, 6.0, 6.0, Source::Intensity, 0), bx(2.0, 2.0, 6.0, 6.0, Source::Event, 0)];
        for s in all {
            let cfg = FusionConfig { strategy: s, ..Default::default() };
            assert_eq!(fuse_boxes(&same, &[1.0, 1.0], &[0], &cfg)[0].rect, same[0].rect);
        }

        // 10x10 shifted by 2.5 along x: IoU = 75/125 = 0.6
        let ov = [bx(0.0, 0.0, 10.0, 10.0, Source::Intensity, 0), bx(2.5, 0.0, 10.0, 10.0, Source::Event, 0)];
        assert!((ov[0].iou(&ov[1]) - 0.6).abs() < 1e-12);
        let get = |s| fuse_boxes(&ov, &[0.8, 0.9], &[0], &FusionConfig { strategy: s, ..Default::default() })[0].rect;
        let (i, u, c) = (get(FusionStrategy::Intersection), get(FusionStrategy::Union), get(FusionStrategy::Confidence));
        for input in [ov[0].rect, ov[1].rect] {
            assert!(input.contains(&i) && u.contains(&input));
        }
        assert_eq!(c, ov[1].rect);

        // IoU = 0.4 passes through untouched
        let far = [bx(0.0, 0.0, 10.0, 10.0, Source::Intensity, 0), bx(0.0, 0.0, 10.0, 4.0, Source::Event, 0)];
        assert!((far[0].iou(&far[1]) - 0.4).abs() < 1e-12);
        for s in all {
            let cfg = FusionConfig { strategy: s, ..Default::default() };
            assert_eq!(fuse_boxes(&far, &[1.0, 1.0], &[0], &cfg)[0], far[0]);
        }
    }

    #[test]
    fn temporal_filter_cases() {
        let a = bx(0.0, 0.0, 8.0, 8.0, Source::Intensity, 0);
        let b = bx(30.0, 30.0, 8.0, 8.0, Source::Intensity, 1);
        assert_eq!(temporal_filter(&[a, b], None), vec![a, b]);
        assert_eq!(temporal_filter(&[a, b], Some(&[a])), vec![a]);
        assert!(temporal_filter(&[b], Some(&[])).is_empty());
    }

    #[test]
    fn fuse_prefers_intensity_on_ties_and_removes_duplicates() {
        let i = bx(10.0, 10.0, 8.0, 8.0, Source::Intensity, 3);
        let e = bx(10.5, 10.0, 8.0, 8.0, Source::Event, 7);
        let out = fuse(&[i], &[e], &FusionConfig::default(), &LinearScorer).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].source, out[0].id), (Source::Intensity, 3));
        // a lone stale track falls below threshold
        let stale = BoundingBox { score: 0.5, ..i };
        assert!(fuse(&[stale], &[], &FusionConfig::default(), &LinearScorer).unwrap().is_empty());
    }
}
