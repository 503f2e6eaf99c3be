use serde::Serialize;

use super::{Dataset, RunConfig};
use crate::chip::{ChipPacket, ChipState};
use crate::error::{Error, Result};
use crate::host::{BoundingBox, HostState, OracleDetector};
use crate::metrics::{psnr, rate_report, FrameCounts, MotaAccumulator, MotaSummary, RateReport, RunSummary};
use crate::rd::SearchStatus;
use crate::rect::BoxRect;

/// Logical slots of one loop iteration, in the only order allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Optimize,
    Transmit,
    Host,
    Feedback,
}

const ORDER: [Stage; 4] = [Stage::Optimize, Stage::Transmit, Stage::Host, Stage::Feedback];

/// Rejects any stage entered out of order, so host work on frame `t+1`
/// cannot start before packet `t` has been decoded and fed back.
#[derive(Debug, Clone, Default)]
pub struct LoopSequencer {
    frame: u32,
    next: usize,
}

impl LoopSequencer {
    pub fn enter(&mut self, frame: u32, stage: Stage) -> Result<()> {
        let expected = ORDER[self.next];
        if frame != self.frame || stage != expected {
            return Err(Error::Ordering(format!(
                "entered {stage:?} of frame {frame} while expecting {expected:?} of frame {}",
                self.frame
            )));
        }
        self.next += 1;
        if self.next == ORDER.len() {
            self.next = 0;
            self.frame += 1;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameLog {
    pub frame: u32,
    /// ROIs that weighted this frame's chip step.
    pub rois: Vec<BoxRect>,
    pub status: SearchStatus,
    pub lambda: f64,
    pub budget_bits: u64,
    pub intensity_bits: u64,
    pub event_bits: u64,
    pub events_in: u64,
    pub events_kept: u64,
    pub tree_evaluations: usize,
    pub reported: Vec<BoundingBox>,
    pub rois_next: Vec<BoxRect>,
    pub counts: Option<FrameCounts>,
    pub psnr_db: f64,
    /// Chip-side and host-side reconstructions agree bit for bit.
    pub recon_match: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunLog {
    pub frames: Vec<FrameLog>,
    #[serde(skip)]
    pub packets: Vec<ChipPacket>,
    pub rates: RateReport,
    pub mota: Option<MotaSummary>,
    pub summary: RunSummary,
    /// Rate-constrained searches run by the chip (one per frame).
    pub optimizer_invocations: usize,
}

/// Chip encodes, the packet crosses the channel as bytes, the host decodes,
/// tracks and fuses, and its ROIs weight the next chip step.
pub fn run_closed_loop(cfg: &RunConfig, data: &Dataset) -> Result<RunLog> {
    cfg.validate()?;
    data.validate()?;
    let side = data.side();
    let budget = cfg.budget_bits(side);
    let mut chip = ChipState::with_active(side, data.active, cfg.chip_config()?)?;
    let gt = data.ground_truth.clone().unwrap_or_else(|| vec![Vec::new(); data.len()]);
    let oracle = OracleDetector::new(gt, data.reference.clone(), cfg.oracle_config());
    let mut host = HostState::new(side, cfg.host_config(), Box::new(oracle))?;
    let mut seq = LoopSequencer::default();
    let mut acc = MotaAccumulator::new();

    let mut rois: Vec<BoxRect> = Vec::new();
    let mut frames = Vec::with_capacity(data.len());
    let mut packets = Vec::with_capacity(data.len());
    for t in 0..data.len() {
        let idx = t as u32;
        seq.enter(idx, Stage::Optimize)?;
        let (packet, report) = chip.encode_step(&data.frames[t], &data.events[t], &rois, budget)?;

        seq.enter(idx, Stage::Transmit)?;
        let received = ChipPacket::from_bytes(&packet.to_bytes())?;

        seq.enter(idx, Stage::Host)?;
        let out = host.process(&received)?;
        let recon_match = out.recon.pixels() == chip.prev_recon().pixels();
        let counts = data.ground_truth.as_ref().map(|g| acc.add_frame(&g[t], &out.reported));

        seq.enter(idx, Stage::Feedback)?;
        let rois_next: Vec<BoxRect> = out.rois_next.iter().map(|b| b.rect).collect();
        frames.push(FrameLog {
            frame: idx,
            rois: std::mem::replace(&mut rois, rois_next.clone()),
            status: report.status,
            lambda: report.lambda,
            budget_bits: budget,
            intensity_bits: received.header.intensity_bits as u64,
            event_bits: received.header.event_bits as u64,
            events_in: report.events_in,
            events_kept: report.events_kept,
            tree_evaluations: report.tree_evaluations,
            reported: out.reported,
            rois_next,
            counts,
            psnr_db: psnr(&out.recon, &data.reference[t])?,
            recon_match,
        });
        packets.push(received);
    }

    let headers: Vec<_> = packets.iter().map(|p| p.header).collect();
    let rates = rate_report(&headers, cfg.frame_rate);
    let mota = match &data.ground_truth {
        Some(g) if g.iter().any(|f| !f.is_empty()) => Some(acc.summary()?),
        _ => None,
    };
    let summary = RunSummary::new(mota.as_ref(), &rates);
    Ok(RunLog { optimizer_invocations: frames.len(), frames, packets, rates, mota, summary })
}
