use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    bin_events, frame_interval_us, read_events, synthesize_events, write_events, Event, EventVolume, Frame, GroundTruthObject,
    SyntheticSequence,
};
use crate::rect::{BoxRect, ClassId};

/// Frames with one event volume per frame interval. Frame `t` closes the
/// interval `[t*T, (t+1)*T)` whose events lead up to it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub frames: Vec<Frame>,
    /// Unpadded extent shared by all frames.
    pub active: (u32, u32),
    pub events: Vec<EventVolume>,
    pub ground_truth: Option<Vec<Vec<GroundTruthObject>>>,
    /// Sharp frames the oracle compares reconstructions against.
    pub reference: Vec<Frame>,
    pub interval_us: u64,
}

impl Dataset {
    pub fn from_synthetic(seq: &SyntheticSequence, n_bins: usize) -> Result<Self> {
        let events = (0..seq.frames.len())
            .map(|t| {
                let (lo, hi) = seq.interval(t);
                bin_events(&seq.events[t], lo, hi, n_bins)
            })
            .collect::<Result<_>>()?;
        let side = seq.frames.first().map_or(0, |f| f.side());
        let ds = Self {
            frames: seq.frames.clone(),
            active: (side, side),
            events,
            ground_truth: Some(seq.ground_truth.clone()),
            reference: seq.reference.clone(),
            interval_us: seq.interval_us,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Loads `*.pgm` frames in name order. Events come from `events` when
    /// given, else they are synthesized between consecutive frames.
    pub fn load(
        frames_dir: &Path,
        events: Option<&Path>,
        ground_truth: Option<&Path>,
        frame_rate: f64,
        n_bins: usize,
        contrast_threshold: f64,
    ) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(frames_dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Dataset(format!("no .pgm frames in {}", frames_dir.display())));
        }
        let mut frames = Vec::with_capacity(paths.len());
        let mut active = None;
        for (t, p) in paths.iter().enumerate() {
            let pf = Frame::load_pgm(p, t as u64)?;
            let a = (pf.active_width, pf.active_height);
            if active.is_some_and(|prev| prev != a) || frames.first().is_some_and(|f: &Frame| f.side() != pf.frame.side()) {
                return Err(Error::Dataset(format!("{} differs in size from the first frame", p.display())));
            }
            active = Some(a);
            frames.push(pf.frame);
        }
        let interval_us = frame_interval_us(frame_rate);
        let interval = |t: usize| (t as u64 * interval_us, (t as u64 + 1) * interval_us);
        let stream: Vec<Event> = match events {
            Some(path) => read_events(BufReader::new(File::open(path)?))?,
            None => {
                let mut out = Vec::new();
                for t in 1..frames.len() {
                    let (lo, hi) = interval(t);
                    out.extend(synthesize_events(&frames[t - 1], &frames[t], contrast_threshold, lo, hi)?);
                }
                out
            }
        };
        let end = interval(frames.len() - 1).1;
        if let Some(e) = stream.iter().find(|e| e.t >= end) {
            return Err(Error::Dataset(format!("event at t={} lies past the last frame interval (ends {end})", e.t)));
        }
        let mut volumes = Vec::with_capacity(frames.len());
        let mut rest = stream.as_slice();
        for t in 0..frames.len() {
            let (lo, hi) = interval(t);
            let n = rest.partition_point(|e| e.t < hi);
            volumes.push(bin_events(&rest[..n], lo, hi, n_bins)?);
            rest = &rest[n..];
        }
        let ground_truth = ground_truth.map(|p| read_ground_truth(File::open(p)?, frames.len())).transpose()?;
        let ds = Self {
            reference: frames.clone(),
            frames,
            active: active.expect("at least one frame"),
            events: volumes,
            ground_truth,
            interval_us,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn side(&self) -> u32 {
        self.frames[0].side()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Dataset("dataset has no frames".into()));
        }
        if self.events.len() != self.frames.len() {
            return Err(Error::Dataset(format!("{} frames but {} event intervals", self.frames.len(), self.events.len())));
        }
        if self.reference.len() != self.frames.len() {
            return Err(Error::Dataset("reference frames do not match the captured frames".into()));
        }
        if self.ground_truth.as_ref().is_some_and(|g| g.len() != self.frames.len()) {
            return Err(Error::Dataset("ground truth does not cover every frame".into()));
        }
        let side = self.side();
        if self.frames.iter().chain(&self.reference).any(|f| f.side() != side) {
            return Err(Error::Dataset("frames differ in size".into()));
        }
        for (t, v) in self.events.iter().enumerate() {
            let (lo, hi) = (t as u64 * self.interval_us, (t as u64 + 1) * self.interval_us);
            if (v.t_start, v.t_end) != (lo, hi) {
                return Err(Error::Dataset(format!("event volume {t} covers [{}, {}) instead of [{lo}, {hi})", v.t_start, v.t_end)));
            }
        }
        Ok(())
    }

    /// Writes `frame_NNNN.pgm`, `events.txt` and `gt.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (t, f) in self.frames.iter().enumerate() {
            f.save_pgm(dir.join(format!("frame_{t:04}.pgm")))?;
        }
        let all: Vec<Event> = self.events.iter().flat_map(|v| v.flatten()).collect();
        write_events(std::io::BufWriter::new(File::create(dir.join("events.txt"))?), &all)?;
        if let Some(gt) = &self.ground_truth {
            write_ground_truth(File::create(dir.join("gt.csv"))?, gt)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GtRow {
    frame: usize,
    id: u32,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    class: u16,
}

/// CSV `frame,id,x,y,w,h,class`.
pub fn read_ground_truth<R: Read>(r: R, n_frames: usize) -> Result<Vec<Vec<GroundTruthObject>>> {
    let mut out = vec![Vec::new(); n_frames];
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: GtRow = row?;
        let slot = out
            .get_mut(row.frame)
            .ok_or_else(|| Error::Dataset(format!("ground truth for frame {} but only {n_frames} frames", row.frame)))?;
        slot.push(GroundTruthObject { id: row.id, class: ClassId(row.class), rect: BoxRect::new(row.x, row.y, row.w, row.h) });
    }
    Ok(out)
}

pub fn write_ground_truth<W: Write>(w: W, gt: &[Vec<GroundTruthObject>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (frame, objs) in gt.iter().enumerate() {
        for o in objs {
            let r = o.rect;
            out.serialize(GtRow { frame, id: o.id, x: r.x, y: r.y, w: r.w, h: r.h, class: o.class.0 })?;
        }
    }
    out.flush()?;
    Ok(())
}
