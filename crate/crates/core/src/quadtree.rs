//! Quadtree segmentation plans, their bit-exact serialization, and host-side
//! intensity reconstruction.
//!
//! Segmentation layout, MSB-first: split flags in pre-order (nodes at the
//! minimum leaf side carry none), then one mode bit per leaf in z-order
//! (`0` Skip, `1` Acquire), then an 8-bit value per Acquire leaf in z-order.

use serde::{Deserialize, Serialize};

use crate::bits::{push_bits, BitCursor, Bits};
use crate::block::Block;
use crate::error::{Error, Result};
use crate::imaging::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeafMode {
    Skip,
    Acquire(u8),
}

impl LeafMode {
    pub fn is_acquire(self) -> bool {
        matches!(self, LeafMode::Acquire(_))
    }

    pub fn value(self) -> Option<u8> {
        match self {
            LeafMode::Skip => None,
            LeafMode::Acquire(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeafConfig {
    pub mode: LeafMode,
    pub pdr_index: u8,
}

impl LeafConfig {
    pub fn skip() -> Self {
        Self { mode: LeafMode::Skip, pdr_index: 0 }
    }

    pub fn acquire(value: u8) -> Self {
        Self { mode: LeafMode::Acquire(value), pdr_index: 0 }
    }

    pub fn with_pdr(mut self, pdr_index: u8) -> Self {
        self.pdr_index = pdr_index;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Leaf {
    pub block: Block,
    pub config: LeafConfig,
}

/// Segmentation plus per-leaf decisions. Leaves are stored in depth-first
/// z-order and tile the frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadTreePlan {
    frame_side: u32,
    min_leaf_side: u32,
    leaves: Vec<Leaf>,
}

/// Bit counts of the three segmentation sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentationRates {
    pub seg: u64,
    pub mode: u64,
    pub value: u64,
}

impl SegmentationRates {
    pub fn total(&self) -> u64 {
        self.seg + self.mode + self.value
    }
}

fn check_sides(frame_side: u32, min_leaf_side: u32) -> Result<()> {
    if frame_side == 0 || !frame_side.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("frame side {frame_side} is not a power of two")));
    }
    if min_leaf_side == 0 || !min_leaf_side.is_power_of_two() || min_leaf_side > frame_side {
        return Err(Error::InvalidArgument(format!("min leaf side {min_leaf_side} invalid for frame side {frame_side}")));
    }
    Ok(())
}

impl QuadTreePlan {
    /// Validates that `leaves` are a z-ordered quadtree tiling.
    pub fn new(frame_side: u32, min_leaf_side: u32, leaves: Vec<Leaf>) -> Result<Self> {
        check_sides(frame_side, min_leaf_side)?;
        let plan = Self { frame_side, min_leaf_side, leaves };
        let mut next = 0;
        plan.walk(Block::new(0, 0, frame_side), &mut next, &mut |_, _| {})?;
        if next != plan.leaves.len() {
            return Err(Error::InvalidArgument(format!("{} leaves beyond the tiling", plan.leaves.len() - next)));
        }
        Ok(plan)
    }

    /// Builds a plan from leaf blocks, assigning each a config.
    pub fn from_blocks(frame_side: u32, min_leaf_side: u32, blocks: &[Block], mut config: impl FnMut(Block) -> LeafConfig) -> Result<Self> {
        let leaves = blocks.iter().map(|&b| Leaf { block: b, config: config(b) }).collect();
        Self::new(frame_side, min_leaf_side, leaves)
    }

    pub fn root_leaf(frame_side: u32, min_leaf_side: u32, config: LeafConfig) -> Result<Self> {
        Self::new(frame_side, min_leaf_side, vec![Leaf { block: Block::new(0, 0, frame_side), config }])
    }

    /// Pre-order traversal; `visit(node, is_split)` is called for every
    /// node. Fails unless the leaves from `*next` on tile `node`.
    fn walk(&self, node: Block, next: &mut usize, visit: &mut impl FnMut(Block, bool)) -> Result<()> {
        let leaf = self
            .leaves
            .get(*next)
            .ok_or_else(|| Error::InvalidArgument(format!("no leaf covers block {node:?}")))?;
        if leaf.block == node {
            visit(node, false);
            *next += 1;
            return Ok(());
        }
        let inside = leaf.block.x >= node.x
            && leaf.block.y >= node.y
            && leaf.block.side < node.side
            && leaf.block.x + leaf.block.side <= node.x + node.side
            && leaf.block.y + leaf.block.side <= node.y + node.side;
        if !inside || node.side <= self.min_leaf_side {
            return Err(Error::InvalidArgument(format!("leaf {:?} does not tile block {node:?} in z-order", leaf.block)));
        }
        visit(node, true);
        for c in node.children() {
            self.walk(c, next, visit)?;
        }
        Ok(())
    }

    pub fn frame_side(&self) -> u32 {
        self.frame_side
    }

    pub fn min_leaf_side(&self) -> u32 {
        self.min_leaf_side
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaves_mut(&mut self) -> impl Iterator<Item = &mut LeafConfig> {
        self.leaves.iter_mut().map(|l| &mut l.config)
    }

    /// Split flags in pre-order, one per node above the minimum side.
    pub fn split_flags(&self) -> Vec<bool> {
        let mut flags = Vec::new();
        let mut next = 0;
        let min = self.min_leaf_side;
        self.walk(Block::new(0, 0, self.frame_side), &mut next, &mut |n, split| {
            if n.side > min {
                flags.push(split);
            }
        })
        .expect("plan validated at construction");
        flags
    }

    pub fn rates(&self) -> SegmentationRates {
        SegmentationRates {
            seg: self.split_flags().len() as u64,
            mode: self.leaves.len() as u64,
            value: 8 * self.leaves.iter().filter(|l| l.config.mode.is_acquire()).count() as u64,
        }
    }

    pub fn serialize(&self) -> Bits {
        let mut out = Bits::new();
        for f in self.split_flags() {
            out.push(f);
        }
        for l in &self.leaves {
            out.push(l.config.mode.is_acquire());
        }
        for v in self.leaves.iter().filter_map(|l| l.config.mode.value()) {
            push_bits(&mut out, v as u64, 8);
        }
        out
    }

    /// Inverse of [`serialize`](Self::serialize), reading from `cursor`.
    /// PDR indices are not part of this stream and come back as 0.
    pub fn deserialize(cursor: &mut BitCursor<'_>, frame_side: u32, min_leaf_side: u32) -> Result<Self> {
        check_sides(frame_side, min_leaf_side)?;
        let mut blocks = Vec::new();
        let mut stack = vec![Block::new(0, 0, frame_side)];
        while let Some(node) = stack.pop() {
            if node.side > min_leaf_side && cursor.read_bit()? {
                stack.extend(node.children().into_iter().rev());
            } else {
                blocks.push(node);
            }
        }
        let mut acquire = Vec::with_capacity(blocks.len());
        for _ in &blocks {
            acquire.push(cursor.read_bit()?);
        }
        let mut leaves = Vec::with_capacity(blocks.len());
        for (b, a) in blocks.into_iter().zip(acquire) {
            let mode = if a { LeafMode::Acquire(cursor.read_bits(8)? as u8) } else { LeafMode::Skip };
            leaves.push(Leaf { block: b, config: LeafConfig { mode, pdr_index: 0 } });
        }
        Ok(Self { frame_side, min_leaf_side, leaves })
    }
}

/// Block mean rounded half away from zero.
pub fn superpixel_value(frame: &Frame, block: Block) -> Result<u8> {
    if block.side == 0 {
        return Err(Error::InvalidArgument("empty block".into()));
    }
    if !block.within(frame.side()) {
        return Err(Error::InvalidArgument(format!("block {block:?} outside a {0}x{0} frame", frame.side())));
    }
    let sum: u64 = block.pixels().map(|(x, y)| frame.get(x, y) as u64).sum();
    let n = block.area();
    Ok(((2 * sum + n) / (2 * n)).min(255) as u8)
}

pub fn reconstruct_frame(prev_recon: &Frame, plan: &QuadTreePlan) -> Result<Frame> {
    if prev_recon.side() != plan.frame_side() {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0}", plan.frame_side()),
            actual: format!("{0}x{0}", prev_recon.side()),
        });
    }
    let mut out = prev_recon.clone();
    for l in plan.leaves() {
        if let LeafMode::Acquire(v) = l.config.mode {
            out.fill_block(l.block, v);
        }
    }
    Ok(out)
}

/// Number of legal segmentations: `count(s) = 1 + count(s/2)^4` above the
/// minimum side.
pub fn count_segmentations(frame_side: u32, min_leaf_side: u32) -> u128 {
    if frame_side <= min_leaf_side {
        1
    } else {
        1 + count_segmentations(frame_side / 2, min_leaf_side).pow(4)
    }
}

/// Every legal segmentation as a z-ordered list of leaf blocks. Guarded to
/// `frame_side <= 16`; the count explodes beyond that.
pub fn enumerate_plans(frame_side: u32, min_leaf_side: u32) -> Result<Vec<Vec<Block>>> {
    if frame_side > 16 {
        return Err(Error::EnumerationGuard(frame_side));
    }
    check_sides(frame_side, min_leaf_side)?;
    let count = count_segmentations(frame_side, min_leaf_side);
    if count > 1_000_000 {
        return Err(Error::InvalidArgument(format!("{count} segmentations is too many to enumerate")));
    }
    Ok(enumerate_block(Block::new(0, 0, frame_side), min_leaf_side))
}

fn enumerate_block(node: Block, min: u32) -> Vec<Vec<Block>> {
    let mut out = vec![vec![node]];
    if node.side <= min {
        return out;
    }
    let [a, b, c, d] = node.children().map(|ch| enumerate_block(ch, min));
    for la in &a {
        for lb in &b {
            for lc in &c {
                for ld in &d {
                    let mut v = Vec::with_capacity(la.len() + lb.len() + lc.len() + ld.len());
                    v.extend_from_slice(la);
                    v.extend_from_slice(lb);
                    v.extend_from_slice(lc);
                    v.extend_from_slice(ld);
                    out.push(v);
                }
            }
        }
    }
    out
}
