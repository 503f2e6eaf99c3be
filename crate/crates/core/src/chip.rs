//! Chip-side encoder and the `.evp` packet format.
//!
//! Packet layout, all integers big-endian:
//!
//! | bytes | field |
//! |------:|-------|
//! | 4 | magic `EVPK` |
//! | 1 | format version |
//! | 1 | flags (bit 0: budget boundary) |
//! | 4 | frame index |
//! | 4 | frame side |
//! | 2 | minimum leaf side |
//! | 1 | temporal bins |
//! | 1 | PDR candidate count |
//! | 4 | intensity bits `R_i` |
//! | 4 | event bits `R_e` |
//! | 4 | body bytes, `ceil((R_i + R_e) / 8)` |
//!
//! The body is the segmentation stream followed directly by the event
//! stream, MSB-first, zero-padded to a whole byte.

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{BitCursor, Bits};
use crate::error::{Error, Result};
use crate::event_codec::{decode_events, encode_events, huffman, leaf_event_bits, sample_ladder, Occupancy, PdrSchedule};
use crate::exec::ExecPolicy;
use crate::imaging::{EventVolume, Frame};
use crate::quadtree::{reconstruct_frame, QuadTreePlan};
use crate::rd::{
    sample_plan, search_lambda, CandidateTable, DistortionWeights, FrameInputs, LambdaIteration, LambdaSearchConfig,
    RdTotals, SearchStatus, WeightMap,
};
use crate::rect::BoxRect;

pub const PACKET_MAGIC: [u8; 4] = *b"EVPK";
pub const PACKET_VERSION: u8 = huffman::TABLE_VERSION;
pub const HEADER_BYTES: usize = 30;
const FLAG_BOUNDARY: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketHeader {
    pub boundary: bool,
    pub frame_index: u32,
    pub frame_side: u32,
    pub min_leaf_side: u16,
    pub n_bins: u8,
    pub pdr_count: u8,
    pub intensity_bits: u32,
    pub event_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChipPacket {
    pub header: PacketHeader,
    body: Bits,
}

impl ChipPacket {
    pub fn new(mut header: PacketHeader, seg: &BitSlice<u8, Msb0>, events: &BitSlice<u8, Msb0>) -> Result<Self> {
        let too_long = |n: usize| u32::try_from(n).map_err(|_| Error::LengthMismatch(format!("{n} bits overflow the header")));
        header.intensity_bits = too_long(seg.len())?;
        header.event_bits = too_long(events.len())?;
        let mut body = Bits::with_capacity(seg.len() + events.len());
        body.extend_from_bitslice(seg);
        body.extend_from_bitslice(events);
        Ok(Self { header, body })
    }

    pub fn body(&self) -> &BitSlice<u8, Msb0> {
        &self.body
    }

    pub fn segmentation_bits(&self) -> &BitSlice<u8, Msb0> {
        &self.body[..self.header.intensity_bits as usize]
    }

    pub fn event_bits(&self) -> &BitSlice<u8, Msb0> {
        &self.body[self.header.intensity_bits as usize..]
    }

    pub fn total_bits(&self) -> u64 {
        self.header.intensity_bits as u64 + self.header.event_bits as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let body_bytes = self.body.len().div_ceil(8);
        let mut out = Vec::with_capacity(HEADER_BYTES + body_bytes);
        out.extend_from_slice(&PACKET_MAGIC);
        out.push(PACKET_VERSION);
        out.push(if h.boundary { FLAG_BOUNDARY } else { 0 });
        out.extend_from_slice(&h.frame_index.to_be_bytes());
        out.extend_from_slice(&h.frame_side.to_be_bytes());
        out.extend_from_slice(&h.min_leaf_side.to_be_bytes());
        out.push(h.n_bins);
        out.push(h.pdr_count);
        out.extend_from_slice(&h.intensity_bits.to_be_bytes());
        out.extend_from_slice(&h.event_bits.to_be_bytes());
        out.extend_from_slice(&(body_bytes as u32).to_be_bytes());
        let mut body = self.body.clone();
        body.resize(body_bytes * 8, false);
        out.extend_from_slice(body.as_raw_slice());
        out
    }

    /// Reads one packet from the front of `data`, returning it with the
    /// number of bytes consumed.
    pub fn read_from(data: &[u8]) -> Result<(Self, usize)> {
        if data.len() >= 4 && data[..4] != PACKET_MAGIC {
            return Err(Error::BadMagic);
        }
        if data.len() >= 5 && data[4] != PACKET_VERSION {
            return Err(Error::VersionMismatch { found: data[4], expected: PACKET_VERSION });
        }
        if data.len() < HEADER_BYTES {
            return Err(Error::Truncated { offset: data.len() * 8 });
        }
        let u32_at = |i: usize| u32::from_be_bytes(data[i..i + 4].try_into().expect("4 bytes"));
        let header = PacketHeader {
            boundary: data[5] & FLAG_BOUNDARY != 0,
            frame_index: u32_at(6),
            frame_side: u32_at(10),
            min_leaf_side: u16::from_be_bytes([data[14], data[15]]),
            n_bins: data[16],
            pdr_count: data[17],
            intensity_bits: u32_at(18),
            event_bits: u32_at(22),
        };
        let body_bytes = u32_at(26) as usize;
        let bits = header.intensity_bits as usize + header.event_bits as usize;
        if body_bytes != bits.div_ceil(8) {
            return Err(Error::LengthMismatch(format!("{body_bytes} body bytes cannot hold exactly {bits} bits")));
        }
        let end = HEADER_BYTES + body_bytes;
        if data.len() < end {
            return Err(Error::Truncated { offset: data.len() * 8 });
        }
        let mut body = Bits::from_slice(&data[HEADER_BYTES..end]);
        body.truncate(bits);
        Ok((Self { header, body }, end))
    }

    /// Parses exactly one packet; trailing bytes are a length mismatch.
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let (p, used) = Self::read_from(data)?;
        if used != data.len() {
            return Err(Error::LengthMismatch(format!("{} trailing bytes after packet", data.len() - used)));
        }
        Ok(p)
    }
}

/// Host-side view of a packet: the plan with its PDR indices and the event
/// occupancy, one frame per bin and polarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedPacket {
    pub plan: QuadTreePlan,
    pub events: Occupancy,
}

pub fn decode_packet(packet: &ChipPacket) -> Result<DecodedPacket> {
    let h = &packet.header;
    let seg = packet.segmentation_bits();
    let mut cur = BitCursor::new(seg);
    let mut plan = QuadTreePlan::deserialize(&mut cur, h.frame_side, h.min_leaf_side as u32)?;
    if cur.remaining() != 0 {
        return Err(Error::LengthMismatch(format!("segmentation used {} of {} bits", cur.position(), seg.len())));
    }
    let ev = packet.event_bits();
    let mut cur = BitCursor::with_base(ev, seg.len());
    let (pdrs, events) = decode_events(&mut cur, &plan, h.n_bins as usize, h.pdr_count as usize)?;
    if cur.remaining() != 0 {
        return Err(Error::LengthMismatch(format!("event stream used {} of {} bits", cur.position(), ev.len())));
    }
    for (cfg, p) in plan.leaves_mut().zip(pdrs) {
        cfg.pdr_index = p;
    }
    Ok(DecodedPacket { plan, events })
}

/// How the per-frame budget is split between the modalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Allocation {
    /// One joint optimization over both modalities.
    Joint,
    /// A fixed share of the budget for intensity; events use the remainder
    /// with one uniform radius.
    Prefixed { intensity_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipConfig {
    pub n_bins: usize,
    pub schedule: PdrSchedule,
    pub min_leaf_side: u32,
    pub roi_weight: f64,
    pub background_weight: f64,
    pub event_weight: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub allocation: Allocation,
    pub exec: ExecPolicy,
}

impl Default for ChipConfig {
    fn default() -> Self {
        Self {
            n_bins: 4,
            schedule: PdrSchedule::constant(1.0),
            min_leaf_side: 1,
            roi_weight: 1000.0,
            background_weight: 1.0,
            event_weight: 500.0,
            tolerance: 0.05,
            max_iterations: 20,
            allocation: Allocation::Joint,
            exec: ExecPolicy::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeReport {
    pub status: SearchStatus,
    pub lambda: f64,
    pub totals: RdTotals,
    /// Tree-search evaluations spent on this frame.
    pub tree_evaluations: usize,
    pub iterations: Vec<LambdaIteration>,
    /// Events before and after thinning.
    pub events_in: u64,
    pub events_kept: u64,
}

#[derive(Debug, Clone)]
pub struct ChipState {
    prev_recon: Frame,
    last_lambda: Option<f64>,
    frame_index: u32,
    active: (u32, u32),
    config: ChipConfig,
}

impl ChipState {
    /// Starts from a uniform mid-gray reconstruction.
    pub fn new(side: u32, config: ChipConfig) -> Result<Self> {
        Self::with_active(side, (side, side), config)
    }

    /// `active` is the unpadded extent; padding carries no distortion weight.
    pub fn with_active(side: u32, active: (u32, u32), config: ChipConfig) -> Result<Self> {
        if config.n_bins == 0 || config.n_bins > 255 || config.min_leaf_side > u16::MAX as u32 {
            return Err(Error::InvalidArgument("n_bins must be in 1..=255 and min leaf side fit 16 bits".into()));
        }
        Ok(Self { prev_recon: Frame::filled(side, 128, 0)?, last_lambda: None, frame_index: 0, active, config })
    }

    pub fn prev_recon(&self) -> &Frame {
        &self.prev_recon
    }

    pub fn last_lambda(&self) -> Option<f64> {
        self.last_lambda
    }

    pub fn frame_index(&self) -> u32 {
        self.frame_index
    }

    pub fn config(&self) -> &ChipConfig {
        &self.config
    }

    /// Encodes one frame and its event volume against `r_max` bits, with
    /// `rois` up-weighted, then updates the local reconstruction by decoding
    /// the emitted packet.
    pub fn encode_step(&mut self, frame: &Frame, events: &EventVolume, rois: &[BoxRect], r_max: u64) -> Result<(ChipPacket, EncodeReport)> {
        let cfg = &self.config;
        self.prev_recon.ensure_same_size(frame)?;
        if events.n_bins() != cfg.n_bins {
            return Err(Error::SizeMismatch { expected: format!("{} bins", cfg.n_bins), actual: format!("{} bins", events.n_bins()) });
        }
        let side = frame.side();
        let occ = Occupancy::from_volume(events, side)?;
        let weights = DistortionWeights::uniform(cfg.background_weight, cfg.event_weight).with_rois(rois.iter().copied(), cfg.roi_weight);
        let wmap = WeightMap::new(&weights, side, self.active)?;
        let search_cfg = |budget: u64, warm: Option<f64>| LambdaSearchConfig {
            r_max: budget,
            tolerance: cfg.tolerance,
            max_iterations: cfg.max_iterations,
            warm_start: warm,
            ..LambdaSearchConfig::new(budget)
        };

        let (plan, sampled, outcome) = match cfg.allocation {
            Allocation::Joint => {
                let inputs = FrameInputs { frame, prev_recon: &self.prev_recon, events: &occ, weights: &wmap, schedule: &cfg.schedule, min_leaf_side: cfg.min_leaf_side };
                let table = CandidateTable::build(&inputs, cfg.exec)?;
                let out = search_lambda(&table, &search_cfg(r_max, self.last_lambda), cfg.exec)?;
                let sampled = sample_plan(&occ, &out.result.plan, &cfg.schedule);
                (out.result.plan.clone(), sampled, out)
            }
            Allocation::Prefixed { intensity_fraction: f } => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::InvalidArgument(format!("intensity fraction {f} outside [0, 1]")));
                }
                // intensity pass: events priced at their empty-map floor
                let no_events = Occupancy::empty(side, cfg.n_bins);
                let wi = wmap.clone().without_events();
                let inputs = FrameInputs { frame, prev_recon: &self.prev_recon, events: &no_events, weights: &wi, schedule: &cfg.schedule, min_leaf_side: cfg.min_leaf_side };
                let table = CandidateTable::build(&inputs, cfg.exec)?;
                let budget_i = (f * r_max as f64).floor() as u64;
                let out = search_lambda(&table, &search_cfg(budget_i, self.last_lambda), cfg.exec)?;
                let mut plan = out.result.plan.clone();
                let budget_e = r_max.saturating_sub(budget_i);
                let (pdr, sampled) = fit_uniform_pdr(&occ, &plan, &cfg.schedule, budget_e);
                for c in plan.leaves_mut() {
                    c.pdr_index = pdr as u8;
                }
                (plan, sampled, out)
            }
        };

        let seg = plan.serialize();
        let ev = encode_events(&plan, &sampled, cfg.schedule.len())?;
        let header = PacketHeader {
            boundary: outcome.status.is_boundary(),
            frame_index: self.frame_index,
            frame_side: side,
            min_leaf_side: cfg.min_leaf_side as u16,
            n_bins: cfg.n_bins as u8,
            pdr_count: cfg.schedule.len() as u8,
            intensity_bits: 0,
            event_bits: 0,
        };
        let packet = ChipPacket::new(header, &seg, &ev)?;

        // mirror the host: rebuild the reconstruction from the packet itself
        let decoded = decode_packet(&packet)?;
        self.prev_recon = reconstruct_frame(&self.prev_recon, &decoded.plan)?;
        self.prev_recon.timestamp_index = frame.timestamp_index;

        let lambda = outcome.lambda();
        if lambda > 0.0 && lambda < 1e17 {
            self.last_lambda = Some(lambda);
        }
        self.frame_index += 1;
        let mut totals = outcome.result.totals;
        totals.event_bits = ev.len() as u64;
        totals.event_distortion = wmap.event_weight() * (occ.total() - sampled.total());
        let report = EncodeReport {
            status: outcome.status,
            lambda,
            totals,
            tree_evaluations: outcome.iterations.len(),
            iterations: outcome.iterations,
            events_in: occ.total(),
            events_kept: sampled.total(),
        };
        Ok((packet, report))
    }
}

/// Smallest uniform radius whose event content fits `budget` bits above the
/// empty-map floor. When none fits, all events are dropped and the largest
/// index is signalled.
fn fit_uniform_pdr(occ: &Occupancy, plan: &QuadTreePlan, schedule: &PdrSchedule, budget: u64) -> (usize, Occupancy) {
    let m = schedule.len();
    let ladders: Vec<(crate::block::Block, Vec<Occupancy>)> = plan.leaves().iter().map(|l| (l.block, sample_ladder(&occ.extract(l.block), schedule))).collect();
    let floor: u64 = ladders.iter().map(|(b, _)| leaf_event_bits(&Occupancy::empty(b.side, occ.n_bins()), m)).sum();
    for k in 0..m {
        let bits: u64 = ladders.iter().map(|(_, l)| leaf_event_bits(&l[k], m)).sum();
        if bits - floor <= budget {
            let mut out = Occupancy::empty(occ.side(), occ.n_bins());
            for (b, l) in &ladders {
                out.insert(*b, &l[k]);
            }
            return (k, out);
        }
    }
    (m - 1, Occupancy::empty(occ.side(), occ.n_bins()))
}
