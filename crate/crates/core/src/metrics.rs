//! Tracking accuracy, channel rate accounting and reconstruction quality.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::chip::PacketHeader;
use crate::error::{Error, Result};
use crate::host::{greedy_match, BoundingBox};
use crate::imaging::{Frame, GroundTruthObject};
use crate::rect::BoxRect;

pub const MATCH_IOU: f64 = 0.5;

/// Uncompressed 512x512, 8-bit, 30 fps reference stream.
pub const UNCOMPRESSED_BASELINE_BPS: f64 = 512.0 * 512.0 * 8.0 * 30.0;

/// One-to-one greedy matching by descending IoU; returns `(gt, pred)` pairs.
pub fn match_frame(gt: &[BoxRect], pred: &[BoxRect], threshold: f64) -> Vec<(usize, usize)> {
    let iou: Vec<Vec<f64>> = gt.iter().map(|g| pred.iter().map(|p| g.iou(p)).collect()).collect();
    greedy_match(&iou, threshold)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    pub matches: u64,
    pub ground_truth: u64,
}

impl FrameCounts {
    pub fn errors(&self) -> u64 {
        self.misses + self.false_positives + self.mismatches
    }
}

/// Accumulates per-frame counts, remembering each object's last matched track.
#[derive(Debug, Clone, Default)]
pub struct MotaAccumulator {
    last_partner: HashMap<u32, u64>,
    frames: Vec<FrameCounts>,
}

impl MotaAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_frame(&mut self, gt: &[GroundTruthObject], pred: &[BoundingBox]) -> FrameCounts {
        let g: Vec<BoxRect> = gt.iter().map(|o| o.rect).collect();
        let p: Vec<BoxRect> = pred.iter().map(|b| b.rect).collect();
        let pairs = match_frame(&g, &p, MATCH_IOU);
        let mut mismatches = 0;
        for &(gi, pi) in &pairs {
            let track = pred[pi].tagged_id();
            if let Some(prev) = self.last_partner.insert(gt[gi].id, track) {
                mismatches += (prev != track) as u64;
            }
        }
        let c = FrameCounts {
            misses: (gt.len() - pairs.len()) as u64,
            false_positives: (pred.len() - pairs.len()) as u64,
            mismatches,
            matches: pairs.len() as u64,
            ground_truth: gt.len() as u64,
        };
        self.frames.push(c);
        c
    }

    pub fn frames(&self) -> &[FrameCounts] {
        &self.frames
    }

    pub fn summary(&self) -> Result<MotaSummary> {
        MotaSummary::from_frames(&self.frames)
    }
}

/// `1 - sum(m + fp + mme) / sum(g)`; may be negative.
pub fn mota(frames: &[FrameCounts]) -> Result<f64> {
    let g: u64 = frames.iter().map(|f| f.ground_truth).sum();
    if g == 0 {
        return Err(Error::InvalidArgument("MOTA is undefined without ground truth".into()));
    }
    let e: u64 = frames.iter().map(|f| f.errors()).sum();
    Ok(1.0 - e as f64 / g as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotaSummary {
    pub mota: f64,
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    pub ground_truth: u64,
}

impl MotaSummary {
    pub fn from_frames(frames: &[FrameCounts]) -> Result<Self> {
        Ok(Self {
            mota: mota(frames)?,
            misses: frames.iter().map(|f| f.misses).sum(),
            false_positives: frames.iter().map(|f| f.false_positives).sum(),
            mismatches: frames.iter().map(|f| f.mismatches).sum(),
            ground_truth: frames.iter().map(|f| f.ground_truth).sum(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRate {
    pub intensity_bits: u64,
    pub event_bits: u64,
}

impl FrameRate {
    pub fn total(&self) -> u64 {
        self.intensity_bits + self.event_bits
    }

    /// Share of the payload spent on intensity; 1 for an empty payload.
    pub fn intensity_fraction(&self) -> f64 {
        if self.total() == 0 {
            1.0
        } else {
            self.intensity_bits as f64 / self.total() as f64
        }
    }

    pub fn event_fraction(&self) -> f64 {
        1.0 - self.intensity_fraction()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub frames: Vec<FrameRate>,
    pub mean_bits: f64,
    pub bitrate_bps: f64,
    pub intensity_fraction: f64,
    pub baseline_bps: f64,
}

/// Payload rates of a packet sequence at `frame_rate` frames per second.
pub fn rate_report(headers: &[PacketHeader], frame_rate: f64) -> RateReport {
    let frames: Vec<FrameRate> =
        headers.iter().map(|h| FrameRate { intensity_bits: h.intensity_bits as u64, event_bits: h.event_bits as u64 }).collect();
    let total: u64 = frames.iter().map(|f| f.total()).sum();
    let intensity: u64 = frames.iter().map(|f| f.intensity_bits).sum();
    let n = frames.len().max(1) as f64;
    let mean_bits = total as f64 / n;
    RateReport {
        mean_bits,
        bitrate_bps: mean_bits * frame_rate,
        intensity_fraction: if total == 0 { 1.0 } else { intensity as f64 / total as f64 },
        baseline_bps: UNCOMPRESSED_BASELINE_BPS,
        frames,
    }
}

/// Peak signal-to-noise ratio in dB; infinite for identical frames.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_size(b)?;
    let se: f64 = a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    let mse = se / a.pixels().len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (255.0f64 * 255.0 / mse).log10() })
}

/// JSON summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mota: Option<f64>,
    pub misses: u64,
    pub fps: u64,
    pub mismatches: u64,
    pub bitrate_bps: f64,
    pub intensity_fraction: f64,
}

impl RunSummary {
    pub fn new(mota: Option<&MotaSummary>, rates: &RateReport) -> Self {
        Self {
            mota: mota.map(|m| m.mota),
            misses: mota.map_or(0, |m| m.misses),
            fps: mota.map_or(0, |m| m.false_positives),
            mismatches: mota.map_or(0, |m| m.mismatches),
            bitrate_bps: rates.bitrate_bps,
            intensity_fraction: rates.intensity_fraction,
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetail {
    pub frame: u32,
    pub intensity_bits: u64,
    pub event_bits: u64,
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    pub ground_truth: u64,
    pub psnr_db: f64,
}

pub fn write_frame_csv<W: Write>(w: W, rows: &[FrameDetail]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::Source;
    use crate::rect::ClassId;

    fn gt(id: u32, x: f64) -> GroundTruthObject {
        GroundTruthObject { id, class: ClassId::OBJECT, rect: BoxRect::new(x, 0.0, 10.0, 10.0) }
    }

    fn pred(id: u64, x: f64) -> BoundingBox {
        BoundingBox { rect: BoxRect::new(x, 0.0, 10.0, 10.0), class: ClassId::OBJECT, score: 1.0, source: Source::Intensity, id }
    }

    #[test]
    fn exact_and_empty_predictions() {
        let mut acc = MotaAccumulator::new();
        let c = acc.add_frame(&[gt(0, 0.0), gt(1, 30.0)], &[pred(0, 0.0), pred(1, 30.0)]);
        assert_eq!((c.misses, c.false_positives, c.mismatches), (0, 0, 0));
        let c = acc.add_frame(&[gt(0, 0.0), gt(1, 30.0)], &[]);
        assert_eq!(c.misses, 2);
    }

    #[test]
    fn swapped_ids_count_two_mismatches() {
        let mut acc = MotaAccumulator::new();
        // objects approach, cross, and the tracker hands each id to the other object
        acc.add_frame(&[gt(0, 0.0), gt(1, 40.0)], &[pred(7, 0.0), pred(8, 40.0)]);
        acc.add_frame(&[gt(0, 15.0), gt(1, 25.0)], &[pred(7, 15.0), pred(8, 25.0)]);
        let c = acc.add_frame(&[gt(0, 25.0), gt(1, 15.0)], &[pred(8, 25.0), pred(7, 15.0)]);
        assert_eq!(c.mismatches, 2);
        let s = acc.summary().unwrap();
        assert_eq!((s.mismatches, s.ground_truth), (2, 6));
        assert!((s.mota - (1.0 - 2.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn mota_substitution() {
        assert!(mota(&[]).is_err());
        let perfect = [FrameCounts { ground_truth: 5, matches: 5, ..Default::default() }];
        assert_eq!(mota(&perfect).unwrap(), 1.0);
        let mut frames = vec![FrameCounts { ground_truth: 2, matches: 2, ..Default::default() }; 10];
        frames[3].misses = 1;
        frames[7].false_positives = 1;
        assert!((mota(&frames).unwrap() - 0.9).abs() < 1e-12);

        let mut big = vec![FrameCounts { ground_truth: 4, matches: 4, ..Default::default() }; 100];
        let before = mota(&big).unwrap();
        big[50].false_positives += 1;
        assert!((before - mota(&big).unwrap() - 0.0025).abs() < 1e-12);
    }

    #[test]
    fn rates_and_baseline() {
        let h = |i: u32, e: u32| PacketHeader {
            boundary: false,
            frame_index: 0,
            frame_side: 8,
            min_leaf_side: 1,
            n_bins: 4,
            pdr_count: 1,
            intensity_bits: i,
            event_bits: e,
        };
        let r = rate_report(&[h(100, 0), h(300, 0)], 30.0);
        assert_eq!(r.intensity_fraction, 1.0);
        assert!(r.frames.iter().all(|f| f.event_fraction() == 0.0));
        let r = rate_report(&[h(100, 20), h(60, 20)], 30.0);
        assert_eq!(r.mean_bits, 100.0);
        assert_eq!(r.bitrate_bps, 3000.0);
        assert!(r.frames.iter().all(|f| (f.intensity_fraction() + f.event_fraction() - 1.0).abs() < 1e-12));
        assert!((r.baseline_bps / 1e6 - 62.91).abs() < 0.005);
    }

    #[test]
    fn psnr_values() {
        let a = Frame::filled(4, 10, 0).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Frame::filled(4, 11, 0).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0 * 255f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn summary_json_keys() {
        let s = RunSummary { mota: Some(0.5), misses: 1, fps: 2, mismatches: 0, bitrate_bps: 1e6, intensity_fraction: 0.8 };
        let mut buf = Vec::new();
        s.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for k in ["mota", "misses", "fps", "mismatches", "bitrate_bps", "intensity_fraction"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
