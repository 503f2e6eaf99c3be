//! Per-node leaf candidates for every quadtree node, computed once per frame.
//!
//! Mode and PDR choices of a leaf are independent: the intensity terms depend
//! only on the mode and the event terms only on the PDR index. The table
//! does not depend on the Lagrange multiplier, so the multiplier search
//! reuses it across evaluations.

use super::weights::WeightMap;
use crate::block::Block;
use crate::error::{Error, Result};
use crate::event_codec::{leaf_event_bits, sample_ladder, Occupancy, PdrSchedule};
use crate::exec::ExecPolicy;
use crate::imaging::Frame;
use crate::quadtree::{superpixel_value, LeafMode, QuadTreePlan};

/// Mode bit, plus 8 value bits when acquiring.
pub const SKIP_BITS: u64 = 1;
pub const ACQUIRE_BITS: u64 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventCandidate {
    pub distortion: u64,
    pub bits: u64,
    pub kept: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCandidates {
    pub block: Block,
    pub skip_distortion: u64,
    pub acquire_distortion: u64,
    pub value: u8,
    /// Indexed by PDR candidate.
    pub events: Vec<EventCandidate>,
}

/// Everything the tree search needs about one frame.
#[derive(Debug, Clone)]
pub struct CandidateTable {
    frame_side: u32,
    min_leaf_side: u32,
    pdr_count: usize,
    /// `levels[l]` holds the `4^l` nodes of side `frame_side >> l` in raster
    /// order of the node grid.
    levels: Vec<Vec<NodeCandidates>>,
}

pub struct FrameInputs<'a> {
    pub frame: &'a Frame,
    pub prev_recon: &'a Frame,
    pub events: &'a Occupancy,
    pub weights: &'a WeightMap,
    pub schedule: &'a PdrSchedule,
    pub min_leaf_side: u32,
}

impl FrameInputs<'_> {
    fn check(&self) -> Result<()> {
        let side = self.frame.side();
        self.frame.ensure_same_size(self.prev_recon)?;
        let sizes = [self.events.side(), self.weights.side()];
        if sizes.iter().any(|&s| s != side) {
            return Err(Error::SizeMismatch { expected: format!("side {side}"), actual: format!("sides {sizes:?}") });
        }
        if self.min_leaf_side == 0 || !self.min_leaf_side.is_power_of_two() || self.min_leaf_side > side {
            return Err(Error::InvalidArgument(format!("min leaf side {} invalid for side {side}", self.min_leaf_side)));
        }
        Ok(())
    }
}

pub fn node_candidates(inputs: &FrameInputs<'_>, block: Block) -> NodeCandidates {
    let (f, p, w) = (inputs.frame, inputs.prev_recon, inputs.weights);
    let value = superpixel_value(f, block).expect("block inside frame");
    let mut skip = 0u64;
    let mut acq = 0u64;
    for (x, y) in block.pixels() {
        let wt = w.get(x, y);
        let v = f.get(x, y);
        skip += wt * v.abs_diff(p.get(x, y)) as u64;
        acq += wt * v.abs_diff(value) as u64;
    }
    let local = inputs.events.extract(block);
    let total = local.total();
    let events = sample_ladder(&local, inputs.schedule)
        .iter()
        .map(|kept| {
            let k = kept.total();
            EventCandidate {
                distortion: w.event_weight() * (total - k),
                bits: leaf_event_bits(kept, inputs.schedule.len()),
                kept: k,
            }
        })
        .collect();
    NodeCandidates { block, skip_distortion: skip, acquire_distortion: acq, value, events }
}

impl CandidateTable {
    pub fn build(inputs: &FrameInputs<'_>, exec: ExecPolicy) -> Result<Self> {
        inputs.check()?;
        let side = inputs.frame.side();
        let mut levels = Vec::new();
        let mut s = side;
        while s >= inputs.min_leaf_side {
            let n = side / s;
            levels.push(exec.map_range((n * n) as usize, |k| {
                let (i, j) = (k as u32 % n, k as u32 / n);
                node_candidates(inputs, Block::new(i * s, j * s, s))
            }));
            s /= 2;
        }
        Ok(Self { frame_side: side, min_leaf_side: inputs.min_leaf_side, pdr_count: inputs.schedule.len(), levels })
    }

    pub fn frame_side(&self) -> u32 {
        self.frame_side
    }

    pub fn min_leaf_side(&self) -> u32 {
        self.min_leaf_side
    }

    pub fn pdr_count(&self) -> usize {
        self.pdr_count
    }

    pub fn levels(&self) -> &[Vec<NodeCandidates>] {
        &self.levels
    }

    pub fn node(&self, block: Block) -> &NodeCandidates {
        let level = (self.frame_side / block.side).trailing_zeros() as usize;
        let n = self.frame_side / block.side;
        &self.levels[level][((block.y / block.side) * n + block.x / block.side) as usize]
    }
}

/// Thins `events` leaf by leaf according to the plan's PDR indices.
pub fn sample_plan(events: &Occupancy, plan: &QuadTreePlan, schedule: &PdrSchedule) -> Occupancy {
    let mut out = Occupancy::empty(events.side(), events.n_bins());
    for leaf in plan.leaves() {
        let local = events.extract(leaf.block);
        let ladder = sample_ladder(&local, schedule);
        out.insert(leaf.block, &ladder[leaf.config.pdr_index as usize]);
    }
    out
}

/// Intensity rate of a mode.
pub fn mode_bits(mode: LeafMode) -> u64 {
    if mode.is_acquire() {
        ACQUIRE_BITS
    } else {
        SKIP_BITS
    }
}
