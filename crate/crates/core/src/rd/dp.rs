//! Bottom-up tree dynamic program over the candidate table.
//!
//! `cost(node) = min(best_leaf + lambda * flag, sum(cost(children)) + lambda)`
//! where `flag` is the split bit a leaf above the minimum side still pays.
//! Ties prefer not splitting, then Skip, then the smaller PDR index.

use serde::{Deserialize, Serialize};

use super::candidates::{CandidateTable, NodeCandidates, ACQUIRE_BITS, SKIP_BITS};
use crate::block::Block;
use crate::exec::ExecPolicy;
use crate::quadtree::{Leaf, LeafConfig, LeafMode, QuadTreePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RdTotals {
    pub intensity_distortion: u64,
    pub event_distortion: u64,
    pub seg_bits: u64,
    pub mode_bits: u64,
    pub value_bits: u64,
    pub event_bits: u64,
}

impl RdTotals {
    pub fn distortion(&self) -> u64 {
        self.intensity_distortion + self.event_distortion
    }

    pub fn intensity_bits(&self) -> u64 {
        self.seg_bits + self.mode_bits + self.value_bits
    }

    pub fn rate(&self) -> u64 {
        self.intensity_bits() + self.event_bits
    }

    pub fn cost(&self, lambda: f64) -> f64 {
        self.distortion() as f64 + lambda * self.rate() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub plan: QuadTreePlan,
    pub totals: RdTotals,
    pub lambda: f64,
    /// Lagrangian cost as accumulated by the search.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
struct LeafPick {
    cost: f64,
    mode: LeafMode,
    pdr: usize,
}

fn best_leaf(node: &NodeCandidates, lambda: f64) -> LeafPick {
    let skip = node.skip_distortion as f64 + lambda * SKIP_BITS as f64;
    let acq = node.acquire_distortion as f64 + lambda * ACQUIRE_BITS as f64;
    let (mode, mode_cost) = if skip <= acq { (LeafMode::Skip, skip) } else { (LeafMode::Acquire(node.value), acq) };
    let mut pdr = 0;
    let mut ev_cost = f64::INFINITY;
    for (k, e) in node.events.iter().enumerate() {
        let c = e.distortion as f64 + lambda * e.bits as f64;
        if c < ev_cost {
            ev_cost = c;
            pdr = k;
        }
    }
    LeafPick { cost: mode_cost + ev_cost, mode, pdr }
}

/// Cheapest single-leaf choice for `node` at `lambda`.
pub(crate) fn best_leaf_config(node: &NodeCandidates, lambda: f64) -> LeafConfig {
    let p = best_leaf(node, lambda);
    LeafConfig { mode: p.mode, pdr_index: p.pdr as u8 }
}

#[derive(Debug, Clone, Copy)]
struct NodeState {
    cost: f64,
    split: bool,
    leaf: LeafPick,
}

pub fn optimize_tree(table: &CandidateTable, lambda: f64, exec: ExecPolicy) -> OptimizationResult {
    let min = table.min_leaf_side();
    let levels = table.levels();
    let mut states: Vec<Vec<NodeState>> = vec![Vec::new(); levels.len()];
    for l in (0..levels.len()).rev() {
        let nodes = &levels[l];
        let below = states.get(l + 1).filter(|s| !s.is_empty());
        let n = (nodes.len() as f64).sqrt().round() as usize;
        states[l] = exec.map_range(nodes.len(), |k| {
            let node = &nodes[k];
            let leaf = best_leaf(node, lambda);
            if node.block.side <= min {
                return NodeState { cost: leaf.cost, split: false, leaf };
            }
            let as_leaf = leaf.cost + lambda;
            let kids = below.expect("children level present");
            let (i, j) = (k % n, k / n);
            let cn = 2 * n;
            let children = [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)];
            let as_split = children.iter().map(|&(ci, cj)| kids[cj * cn + ci].cost).sum::<f64>() + lambda;
            if as_leaf <= as_split {
                NodeState { cost: as_leaf, split: false, leaf }
            } else {
                NodeState { cost: as_split, split: true, leaf }
            }
        });
    }

    let side = table.frame_side();
    let mut leaves = Vec::new();
    let mut totals = RdTotals::default();
    collect(table, &states, Block::new(0, 0, side), &mut leaves, &mut totals);
    let plan = QuadTreePlan::new(side, min, leaves).expect("tree search yields a valid tiling");
    OptimizationResult { plan, totals, lambda, cost: states[0][0].cost }
}

fn collect(table: &CandidateTable, states: &[Vec<NodeState>], block: Block, leaves: &mut Vec<Leaf>, totals: &mut RdTotals) {
    let level = (table.frame_side() / block.side).trailing_zeros() as usize;
    let n = table.frame_side() / block.side;
    let st = states[level][((block.y / block.side) * n + block.x / block.side) as usize];
    if block.side > table.min_leaf_side() {
        totals.seg_bits += 1;
    }
    if st.split {
        for c in block.children() {
            collect(table, states, c, leaves, totals);
        }
        return;
    }
    let node = table.node(block);
    let ev = node.events[st.leaf.pdr];
    match st.leaf.mode {
        LeafMode::Skip => totals.intensity_distortion += node.skip_distortion,
        LeafMode::Acquire(_) => {
            totals.intensity_distortion += node.acquire_distortion;
            totals.value_bits += 8;
        }
    }
    totals.mode_bits += 1;
    totals.event_distortion += ev.distortion;
    totals.event_bits += ev.bits;
    leaves.push(Leaf { block, config: LeafConfig { mode: st.leaf.mode, pdr_index: st.leaf.pdr as u8 } });
}
