//! Spending the bits a Lagrangian solution leaves below the budget.
//!
//! Identical blocks switch decisions at the same multiplier, so neighbouring
//! hull points can be far apart in rate. Two greedy passes close the gap:
//! subtrees where the over-budget neighbour differs are moved across, then
//! single leaves are refined (a richer mode or radius, or a split into the
//! children the over-budget multiplier would pick), always taking the
//! largest distortion saving per extra bit that still fits.

use std::collections::{BinaryHeap, HashMap};

use super::candidates::{mode_bits, CandidateTable, NodeCandidates};
use super::dp::{best_leaf_config, OptimizationResult, RdTotals};
use crate::block::Block;
use crate::quadtree::{Leaf, LeafConfig, LeafMode, QuadTreePlan};

pub(crate) fn fill_gap(table: &CandidateTable, fits: &OptimizationResult, over: &OptimizationResult, r_max: u64) -> OptimizationResult {
    let mixed = adopt_subtrees(table, fits, over, r_max);
    refine_leaves(table, &mixed, over.lambda, r_max)
}

fn leaf_cost(node: &NodeCandidates, cfg: LeafConfig) -> (u64, u64) {
    let ev = node.events[cfg.pdr_index as usize];
    let d = match cfg.mode {
        LeafMode::Skip => node.skip_distortion,
        LeafMode::Acquire(_) => node.acquire_distortion,
    };
    (mode_bits(cfg.mode) + ev.bits, d + ev.distortion)
}

fn totals_of(table: &CandidateTable, leaves: &[Leaf]) -> RdTotals {
    let mut t = RdTotals::default();
    let min = table.min_leaf_side();
    t.seg_bits = (leaves.len() as u64 - 1) / 3 + leaves.iter().filter(|l| l.block.side > min).count() as u64;
    for l in leaves {
        let node = table.node(l.block);
        let ev = node.events[l.config.pdr_index as usize];
        match l.config.mode {
            LeafMode::Skip => t.intensity_distortion += node.skip_distortion,
            LeafMode::Acquire(_) => {
                t.intensity_distortion += node.acquire_distortion;
                t.value_bits += 8;
            }
        }
        t.mode_bits += 1;
        t.event_distortion += ev.distortion;
        t.event_bits += ev.bits;
    }
    t
}

fn result(table: &CandidateTable, leaves: Vec<Leaf>, lambda: f64) -> OptimizationResult {
    let plan = QuadTreePlan::new(table.frame_side(), table.min_leaf_side(), leaves).expect("moves keep a quadtree tiling");
    let totals = totals_of(table, plan.leaves());
    OptimizationResult { cost: totals.cost(lambda), plan, totals, lambda }
}

fn gain(extra_bits: i64, saved: i64) -> f64 {
    if extra_bits <= 0 {
        f64::INFINITY
    } else {
        saved as f64 / extra_bits as f64
    }
}

/// A subtree where two solutions differ.
struct Unit {
    block: Block,
    extra_bits: i64,
    saved: i64,
}

fn leaves_in(leaves: &[Leaf], start: usize, node: Block) -> usize {
    let inside = |b: Block| b.x >= node.x && b.y >= node.y && b.x + b.side <= node.x + node.side && b.y + b.side <= node.y + node.side;
    leaves[start..].iter().take_while(|l| inside(l.block)).count()
}

/// Smallest subtrees where `a` and `b` differ, in z-order.
fn diff_units(table: &CandidateTable, a: &[Leaf], b: &[Leaf], node: Block, ia: &mut usize, ib: &mut usize, out: &mut Vec<Unit>) {
    let (na, nb) = (leaves_in(a, *ia, node), leaves_in(b, *ib, node));
    let (sa, sb) = (&a[*ia..*ia + na], &b[*ib..*ib + nb]);
    if sa != sb {
        if sa[0].block != node && sb[0].block != node {
            for c in node.children() {
                diff_units(table, a, b, c, ia, ib, out);
            }
            return;
        }
        let (ta, tb) = (totals_of(table, sa), totals_of(table, sb));
        out.push(Unit {
            block: node,
            extra_bits: tb.rate() as i64 - ta.rate() as i64,
            saved: ta.distortion() as i64 - tb.distortion() as i64,
        });
    }
    *ia += na;
    *ib += nb;
}

fn adopt_subtrees(table: &CandidateTable, fits: &OptimizationResult, over: &OptimizationResult, r_max: u64) -> OptimizationResult {
    let (a, b) = (fits.plan.leaves(), over.plan.leaves());
    let mut units = Vec::new();
    diff_units(table, a, b, Block::new(0, 0, table.frame_side()), &mut 0, &mut 0, &mut units);
    let mut order: Vec<usize> = (0..units.len()).filter(|&i| units[i].saved >= 0).collect();
    order.sort_by(|&i, &j| gain(units[j].extra_bits, units[j].saved).total_cmp(&gain(units[i].extra_bits, units[i].saved)).then(i.cmp(&j)));
    let mut rate = fits.totals.rate() as i64;
    let mut take = vec![false; units.len()];
    for i in order {
        if rate + units[i].extra_bits <= r_max as i64 {
            rate += units[i].extra_bits;
            take[i] = true;
        }
    }
    if !take.contains(&true) {
        return fits.clone();
    }
    let mut leaves = Vec::with_capacity(a.len().max(b.len()));
    let (mut ia, mut ib, mut next) = (0, 0, 0);
    while ia < a.len() {
        match units.get(next) {
            Some(u) if (a[ia].block.x, a[ia].block.y) == (u.block.x, u.block.y) => {
                let (na, nb) = (leaves_in(a, ia, u.block), leaves_in(b, ib, u.block));
                leaves.extend_from_slice(if take[next] { &b[ib..ib + nb] } else { &a[ia..ia + na] });
                ia += na;
                ib += nb;
                next += 1;
            }
            _ => {
                // shared leaf, identical in both
                leaves.push(a[ia]);
                ia += 1;
                ib += 1;
            }
        }
    }
    result(table, leaves, fits.lambda)
}

#[derive(Debug, Clone, PartialEq)]
struct Move {
    gain: f64,
    block: Block,
    /// The leaf config the move replaces; stale once that leaf is gone.
    from: LeafConfig,
    to: Option<LeafConfig>,
    extra_bits: i64,
    saved: i64,
}

impl Eq for Move {}

impl Ord for Move {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.gain.total_cmp(&o.gain).then_with(|| (o.block.side, o.block.y, o.block.x).cmp(&(self.block.side, self.block.y, self.block.x)))
    }
}

impl PartialOrd for Move {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// Best refinement of one leaf: another (mode, radius) pair or a split into
/// children chosen at `rich_lambda`.
fn best_move(table: &CandidateTable, block: Block, from: LeafConfig, rich_lambda: f64) -> Option<Move> {
    let node = table.node(block);
    let (r0, d0) = leaf_cost(node, from);
    let mut options: Vec<(Option<LeafConfig>, i64, i64)> = Vec::new();
    for mode in [LeafMode::Skip, LeafMode::Acquire(node.value)] {
        for k in 0..node.events.len() {
            let to = LeafConfig { mode, pdr_index: k as u8 };
            if to != from {
                let (r, d) = leaf_cost(node, to);
                options.push((Some(to), r as i64 - r0 as i64, d0 as i64 - d as i64));
            }
        }
    }
    if block.side > table.min_leaf_side() {
        let min = table.min_leaf_side();
        let (mut r, mut d) = (0u64, 0u64);
        for c in block.children() {
            let (cr, cd) = leaf_cost(table.node(c), best_leaf_config(table.node(c), rich_lambda));
            r += cr + (c.side > min) as u64;
            d += cd;
        }
        options.push((None, r as i64 - r0 as i64, d0 as i64 - d as i64));
    }
    options
        .into_iter()
        .filter(|&(_, extra, saved)| saved > 0 || (saved == 0 && extra < 0))
        .map(|(to, extra_bits, saved)| Move { gain: gain(extra_bits, saved), block, from, to, extra_bits, saved })
        .max()
}

fn refine_leaves(table: &CandidateTable, start: &OptimizationResult, rich_lambda: f64, r_max: u64) -> OptimizationResult {
    let lambda = rich_lambda;
    let mut current: HashMap<Block, LeafConfig> = start.plan.leaves().iter().map(|l| (l.block, l.config)).collect();
    let mut heap: BinaryHeap<Move> = start.plan.leaves().iter().filter_map(|l| best_move(table, l.block, l.config, lambda)).collect();
    let mut rate = start.totals.rate() as i64;
    let mut changed = false;
    while let Some(m) = heap.pop() {
        if current.get(&m.block) != Some(&m.from) || rate + m.extra_bits > r_max as i64 {
            continue;
        }
        rate += m.extra_bits;
        changed = true;
        match m.to {
            Some(to) => {
                current.insert(m.block, to);
                heap.extend(best_move(table, m.block, to, lambda));
            }
            None => {
                current.remove(&m.block);
                for c in m.block.children() {
                    let cfg = best_leaf_config(table.node(c), lambda);
                    current.insert(c, cfg);
                    heap.extend(best_move(table, c, cfg, lambda));
                }
            }
        }
    }
    if !changed {
        return start.clone();
    }
    let mut leaves = Vec::with_capacity(current.len());
    collect(&current, Block::new(0, 0, table.frame_side()), &mut leaves);
    let out = result(table, leaves, start.lambda);
    debug_assert_eq!(out.totals.rate() as i64, rate);
    out
}

fn collect(current: &HashMap<Block, LeafConfig>, block: Block, out: &mut Vec<Leaf>) {
    match current.get(&block) {
        Some(&config) => out.push(Leaf { block, config }),
        None => block.children().into_iter().for_each(|c| collect(current, c, out)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_codec::{Occupancy, PdrSchedule};
    use crate::exec::ExecPolicy;
    use crate::imaging::Frame;
    use crate::rd::{optimize_tree, DistortionWeights, FrameInputs, WeightMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(seed: u64) -> CandidateTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = Frame::new(16, (0..256).map(|_| rng.random()).collect(), 1).unwrap();
        let prev = Frame::filled(16, 128, 0).unwrap();
        let mut events = Occupancy::empty(16, 2);
        events.maps_mut().iter_mut().flatten().for_each(|c| *c = rng.random_bool(0.2));
        let weights = WeightMap::new(&DistortionWeights::uniform(1.0, 3.0), 16, (16, 16)).unwrap();
        let schedule = PdrSchedule::new(vec![1.0, 2.0]).unwrap();
        let inputs = FrameInputs { frame: &frame, prev_recon: &prev, events: &events, weights: &weights, schedule: &schedule, min_leaf_side: 1 };
        CandidateTable::build(&inputs, ExecPolicy::Sequential).unwrap()
    }

    #[test]
    fn refinement_only_adds_bits_within_budget_and_lowers_distortion() {
        for seed in 0..10 {
            let t = table(seed);
            let coarse = optimize_tree(&t, 1e18, ExecPolicy::Sequential);
            for extra in [0, 10, 100, 1000] {
                let budget = coarse.totals.rate() + extra;
                let r = refine_leaves(&t, &coarse, 0.0, budget);
                assert!(r.totals.rate() <= budget);
                assert!(r.totals.distortion() <= coarse.totals.distortion());
                assert_eq!(r.totals, totals_of(&t, r.plan.leaves()));
            }
        }
    }

    #[test]
    fn adopting_everything_reproduces_the_richer_solution() {
        let t = table(3);
        let (a, b) = (optimize_tree(&t, 1e4, ExecPolicy::Sequential), optimize_tree(&t, 1.0, ExecPolicy::Sequential));
        let mixed = adopt_subtrees(&t, &a, &b, b.totals.rate());
        assert_eq!(mixed.plan.leaves(), b.plan.leaves());
        assert_eq!(mixed.totals, b.totals);
        let none = adopt_subtrees(&t, &a, &b, a.totals.rate());
        assert_eq!(none.plan, a.plan);
    }
}
