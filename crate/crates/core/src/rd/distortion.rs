use super::weights::WeightMap;
use crate::block::Block;
use crate::error::{Error, Result};
use crate::imaging::{EventCountMap, Frame};
use crate::quadtree::LeafMode;

/// Weighted absolute error of a leaf: against the previous reconstruction
/// for Skip, against the transmitted value for Acquire.
pub fn intensity_leaf_distortion(frame: &Frame, prev_recon: &Frame, block: Block, mode: LeafMode, weights: &WeightMap) -> u64 {
    let mut d = 0u64;
    for (x, y) in block.pixels() {
        let reference = match mode {
            LeafMode::Skip => prev_recon.get(x, y),
            LeafMode::Acquire(v) => v,
        };
        d += weights.get(x, y) * frame.get(x, y).abs_diff(reference) as u64;
    }
    d
}

/// `w_e * sum(E_org - E_dist)` over the block.
pub fn event_leaf_distortion(original: &EventCountMap, sampled: &EventCountMap, block: Block, event_weight: u64) -> Result<u64> {
    let mut dropped = 0u64;
    for (x, y) in block.pixels() {
        let (o, s) = (original.get(x, y), sampled.get(x, y));
        if s > o {
            return Err(Error::SampledExceedsOriginal { x, y, sampled: s, original: o });
        }
        dropped += (o - s) as u64;
    }
    Ok(event_weight * dropped)
}
