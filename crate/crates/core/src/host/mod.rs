//! Host side of the loop: decode, enhance, detect, track, fuse, and feed
//! regions of interest back to the chip.

pub mod bbox;
pub mod detect;
pub mod fusion;
pub mod sort;

use std::io::Write;

pub use bbox::{BoundingBox, Detection, Source};
pub use detect::{
    BlobConfig, BlobDetector, DetectorCapabilities, EventDetector, IntensityDetector, Modality, OracleConfig, OracleDetector,
};
pub use fusion::{
    confidences, extract_features, fuse, fuse_boxes, score_and_filter, temporal_filter, ConfidenceScorer, FusionConfig,
    FusionFeatures, FusionStrategy, LinearScorer,
};
pub use sort::{greedy_match, intensity_step, EventTracker, KalmanBox, SortConfig, SortTracker, Track, TrackerOutput};

use crate::chip::{decode_packet, ChipPacket};
use crate::error::{Error, Result};
use crate::imaging::{EventCountMap, Frame};
use crate::quadtree::reconstruct_frame;

/// Post-reconstruction image stage; receives the previous reconstruction,
/// the current one and the decoded event frames.
pub trait Enhancer {
    fn enhance(&mut self, prev_recon: &Frame, recon: &Frame, event_frames: &[EventCountMap]) -> Frame;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEnhancer;

impl Enhancer for IdentityEnhancer {
    fn enhance(&mut self, _prev: &Frame, recon: &Frame, _events: &[EventCountMap]) -> Frame {
        recon.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostConfig {
    pub intensity_sort: SortConfig,
    pub event_sort: SortConfig,
    pub fusion: FusionConfig,
    pub blob: BlobConfig,
    /// When false only the intensity pipeline runs.
    pub event_tracking: bool,
}

impl Default for HostConfig {
    fn default() -> Self {
        Self {
            intensity_sort: SortConfig::default(),
            event_sort: SortConfig::default(),
            fusion: FusionConfig::default(),
            blob: BlobConfig { min_area: 2, dilation: 6 },
            event_tracking: true,
        }
    }
}

/// Everything the host derives from one packet.
#[derive(Debug, Clone)]
pub struct HostFrame {
    pub frame_index: u32,
    pub recon: Frame,
    pub intensity: TrackerOutput,
    pub event: TrackerOutput,
    /// Fused current estimates at this frame.
    pub reported: Vec<BoundingBox>,
    /// Fused, temporally filtered predictions for the next frame.
    pub rois_next: Vec<BoundingBox>,
}

pub struct HostState {
    cfg: HostConfig,
    prev_recon: Frame,
    intensity_tracker: SortTracker,
    event_tracker: EventTracker,
    intensity_detector: Box<dyn IntensityDetector>,
    event_detector: Box<dyn EventDetector>,
    enhancer: Box<dyn Enhancer>,
    scorer: Box<dyn ConfidenceScorer>,
    prev_fused: Option<Vec<BoundingBox>>,
    last_index: Option<u32>,
}

impl HostState {
    pub fn new(side: u32, cfg: HostConfig, intensity_detector: Box<dyn IntensityDetector>) -> Result<Self> {
        Ok(Self {
            prev_recon: Frame::filled(side, 128, 0)?,
            intensity_tracker: SortTracker::new(cfg.intensity_sort, Source::Intensity, side),
            event_tracker: EventTracker::new(cfg.event_sort, side),
            intensity_detector,
            event_detector: Box::new(BlobDetector::new(cfg.blob)),
            enhancer: Box::new(IdentityEnhancer),
            scorer: Box::new(LinearScorer),
            prev_fused: None,
            last_index: None,
            cfg,
        })
    }

    pub fn with_event_detector(mut self, d: Box<dyn EventDetector>) -> Self {
        self.event_detector = d;
        self
    }

    pub fn with_enhancer(mut self, e: Box<dyn Enhancer>) -> Self {
        self.enhancer = e;
        self
    }

    pub fn with_scorer(mut self, s: Box<dyn ConfidenceScorer>) -> Self {
        self.scorer = s;
        self
    }

    pub fn prev_recon(&self) -> &Frame {
        &self.prev_recon
    }

    pub fn process(&mut self, packet: &ChipPacket) -> Result<HostFrame> {
        let idx = packet.header.frame_index;
        if let Some(last) = self.last_index {
            if idx != last + 1 {
                return Err(Error::Ordering(format!("host received frame {idx} after {last}")));
            }
        }
        let decoded = decode_packet(packet)?;
        let recon = reconstruct_frame(&self.prev_recon, &decoded.plan)?;
        let bins: Vec<EventCountMap> = (0..decoded.events.n_bins()).map(|b| decoded.events.bin_counts(b)).collect();
        let image = self.enhancer.enhance(&self.prev_recon, &recon, &bins);

        let dets = self.intensity_detector.detect(idx as usize, &image);
        let intensity = intensity_step(&mut self.intensity_tracker, &dets);
        let event = if self.cfg.event_tracking {
            let per_bin: Vec<Vec<Detection>> = bins.iter().map(|b| self.event_detector.detect(b)).collect();
            self.event_tracker.process(&per_bin)
        } else {
            TrackerOutput::default()
        };

        let reported = fuse(&intensity.current, &event.current, &self.cfg.fusion, self.scorer.as_ref())?;
        let fused_next = fuse(&intensity.predicted, &event.predicted, &self.cfg.fusion, self.scorer.as_ref())?;
        let rois_next = temporal_filter(&fused_next, self.prev_fused.as_deref());
        self.prev_fused = Some(fused_next);
        self.prev_recon = recon.clone();
        self.last_index = Some(idx);
        Ok(HostFrame { frame_index: idx, recon, intensity, event, reported, rois_next })
    }
}

/// Tracking output rows: `frame,id,x,y,w,h,score,class,source`.
pub fn write_mot_csv<W: Write>(w: W, rows: &[(u32, BoundingBox)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["frame", "id", "x", "y", "w", "h", "score", "class", "source"])?;
    for (frame, b) in rows {
        let source = match b.source {
            Source::Intensity => "intensity",
            Source::Event => "event",
        };
        out.write_record([
            frame.to_string(),
            b.tagged_id().to_string(),
            format!("{:.3}", b.rect.x),
            format!("{:.3}", b.rect.y),
            format!("{:.3}", b.rect.w),
            format!("{:.3}", b.rect.h),
            format!("{:.4}", b.score),
            b.class.0.to_string(),
            source.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::{ChipConfig, ChipState};
    use crate::imaging::{bin_events, generate_synthetic_sequence, SceneConfig, ShapeSpec};
    use crate::rect::BoxRect;

    #[test]
    fn host_mirrors_chip_reconstruction_and_tracks_objects() {
        let scene = SceneConfig {
            side: 32,
            n_frames: 6,
            shapes: vec![ShapeSpec { intensity: 230, ..ShapeSpec::square(4.0, 8.0, 8, 2.0, 0.0) }],
            random_shapes: 0,
            ..SceneConfig::default()
        };
        let seq = generate_synthetic_sequence(&scene).unwrap();
        let gt: Vec<_> = seq.ground_truth.clone();
        let oracle = OracleDetector::new(gt, vec![], OracleConfig::default());
        let mut host = HostState::new(32, HostConfig::default(), Box::new(oracle)).unwrap();
        let mut chip = ChipState::new(32, ChipConfig::default()).unwrap();
        let mut rois: Vec<BoxRect> = Vec::new();
        for (t, frame) in seq.frames.iter().enumerate() {
            let (lo, hi) = seq.interval(t);
            let volume = bin_events(&seq.events[t], lo, hi, 4).unwrap();
            let (packet, _) = chip.encode_step(frame, &volume, &rois, 1 << 20).unwrap();
            let out = host.process(&packet).unwrap();
            assert_eq!(out.recon.pixels(), chip.prev_recon().pixels());
            assert_eq!(out.reported.len(), 1, "frame {t}");
            assert!(out.reported[0].rect.iou(&seq.ground_truth[t][0].rect) > 0.9);
            rois = out.rois_next.iter().map(|b| b.rect).collect();
        }
        assert!(!rois.is_empty());
    }

    #[test]
    fn out_of_order_packets_are_rejected() {
        let mut chip = ChipState::new(8, ChipConfig::default()).unwrap();
        let f = Frame::filled(8, 50, 0).unwrap();
        let ev = crate::imaging::EventVolume::empty(0, 1, 4);
        let (p0, _) = chip.encode_step(&f, &ev, &[], 1 << 12).unwrap();
        let (_, _) = chip.encode_step(&f, &ev, &[], 1 << 12).unwrap();
        let (p2, _) = chip.encode_step(&f, &ev, &[], 1 << 12).unwrap();
        let mut host = HostState::new(8, HostConfig::default(), Box::new(OracleDetector::new(vec![], vec![], OracleConfig::default()))).unwrap();
        host.process(&p0).unwrap();
        assert!(matches!(host.process(&p2), Err(Error::Ordering(_))));
    }

    #[test]
    fn mot_csv_rows() {
        let b = BoundingBox { rect: BoxRect::new(1.0, 2.0, 3.0, 4.0), class: crate::rect::ClassId::OBJECT, score: 1.0, source: Source::Event, id: 2 };
        let mut buf = Vec::new();
        write_mot_csv(&mut buf, &[(5, b)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "frame,id,x,y,w,h,score,class,source\n5,5,1.000,2.000,3.000,4.000,1.0000,0,event\n"
        );
    }
}
