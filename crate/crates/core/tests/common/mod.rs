//! Shared test scaffolding: random instances and independent oracles.
#![allow(dead_code)]

use qtev_core::block::Block;
use qtev_core::event_codec::{leaf_event_bits, pdr_for_block, poisson_disk_sample, scan_order, Occupancy, PdrSchedule};
use qtev_core::imaging::Frame;
use qtev_core::quadtree::{enumerate_plans, LeafConfig, QuadTreePlan};
use qtev_core::rd::{DistortionWeights, FrameInputs, WeightMap};
use qtev_core::rect::BoxRect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub frame: Frame,
    pub prev: Frame,
    pub events: Occupancy,
    pub weights: WeightMap,
    pub schedule: PdrSchedule,
    pub lambda: u64,
}

impl Instance {
    pub fn inputs(&self) -> FrameInputs<'_> {
        FrameInputs {
            frame: &self.frame,
            prev_recon: &self.prev,
            events: &self.events,
            weights: &self.weights,
            schedule: &self.schedule,
            min_leaf_side: 1,
        }
    }
}

/// Random 8x8 instance: smooth-ish frame, a perturbed previous
/// reconstruction, clustered events, an optional ROI and an integer
/// multiplier.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 8u32;
    let base: u8 = rng.random();
    let frame = Frame::new(side, (0..64).map(|_| base.saturating_add(rng.random_range(0..60))).collect(), 1).unwrap();
    let noise = rng.random_range(0..40u8);
    let prev = Frame::new(side, frame.pixels().iter().map(|&p| p.saturating_sub(rng.random_range(0..=noise))).collect(), 0).unwrap();
    let mut events = Occupancy::empty(side, 4);
    let (cx, cy) = (rng.random_range(0..8) as f64, rng.random_range(0..8) as f64);
    let density = rng.random_range(0.0..0.6);
    for m in events.maps_mut() {
        for (i, c) in m.iter_mut().enumerate() {
            let (x, y) = ((i % 8) as f64, (i / 8) as f64);
            let near = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() < 3.0;
            *c = rng.random_bool(if near { density } else { density / 8.0 });
        }
    }
    let mut w = DistortionWeights::uniform(rng.random_range(0..4) as f64, rng.random_range(0..3) as f64 / 64.0);
    if rng.random_bool(0.5) {
        let (x, y) = (rng.random_range(0..6) as f64, rng.random_range(0..6) as f64);
        w = w.with_rois([BoxRect::new(x, y, 3.0, 2.0)], rng.random_range(1..8) as f64);
    }
    let weights = WeightMap::new(&w, side, (side, side)).unwrap();
    let lambda = [0u64, 1, 2, 5, 10, 30, 100, 1000, 1_000_000][rng.random_range(0..9)];
    Instance { frame, prev, events, weights, schedule: PdrSchedule::new(vec![1.0, 2.0]).unwrap(), lambda }
}

/// Nested-ladder sampling rebuilt from the plain greedy sampler: largest
/// radius first, each smaller radius seeded with the larger kept set.
pub fn oracle_ladder(local: &Occupancy, schedule: &PdrSchedule) -> Vec<Occupancy> {
    let side = local.side();
    let mut out: Vec<Occupancy> = Vec::new();
    for k in (0..schedule.len()).rev() {
        let r = pdr_for_block(side, schedule.base()[k]);
        let seed: Vec<_> = out.last().map(|o| scan_order(o).collect()).unwrap_or_default();
        let rest: Vec<_> = scan_order(local).filter(|e| !seed.contains(e)).collect();
        let pts: Vec<(u32, u32)> = seed.iter().chain(&rest).map(|&(_, y, x, _)| (x, y)).collect();
        let keep = poisson_disk_sample(&pts, r);
        let mut kept = Occupancy::empty(side, local.n_bins());
        for (&(b, y, x, p), k) in seed.iter().chain(&rest).zip(keep) {
            if k {
                kept.set(b, p, x, y, true);
            }
        }
        out.push(kept);
    }
    out.reverse();
    out
}

/// Cheapest leaf cost of `block` over every (mode, PDR) pair, recomputed
/// from first principles in integers.
fn oracle_leaf_cost(inst: &Instance, block: Block) -> u128 {
    let lambda = inst.lambda as u128;
    let n = block.area() as f64;
    let mean = block.pixels().map(|(x, y)| inst.frame.get(x, y) as f64).sum::<f64>() / n;
    let value = mean.round().clamp(0.0, 255.0) as i64;
    let mut skip = 0u128;
    let mut acq = 0u128;
    for (x, y) in block.pixels() {
        let w = inst.weights.get(x, y) as u128;
        let f = inst.frame.get(x, y) as i64;
        skip += w * (f - inst.prev.get(x, y) as i64).unsigned_abs() as u128;
        acq += w * (f - value).unsigned_abs() as u128;
    }
    let local = inst.events.extract(block);
    let total = local.total() as u128;
    let mut best = u128::MAX;
    for (mode_d, mode_r) in [(skip, 1u128), (acq, 9)] {
        for kept in oracle_ladder(&local, &inst.schedule) {
            let d_e = inst.weights.event_weight() as u128 * (total - kept.total() as u128);
            let r_e = leaf_event_bits(&kept, inst.schedule.len()) as u128;
            best = best.min(mode_d + d_e + lambda * (mode_r + r_e));
        }
    }
    best
}

/// Minimum Lagrangian cost over every segmentation of the frame and every
/// per-leaf candidate.
pub fn exhaustive_min_cost(inst: &Instance) -> u128 {
    let side = inst.frame.side();
    let mut costs = std::collections::HashMap::new();
    let mut s = side;
    while s >= 1 {
        for y in (0..side).step_by(s as usize) {
            for x in (0..side).step_by(s as usize) {
                let b = Block::new(x, y, s);
                costs.insert(b, oracle_leaf_cost(inst, b));
            }
        }
        s /= 2;
    }
    let lambda = inst.lambda as u128;
    enumerate_plans(side, 1)
        .unwrap()
        .iter()
        .map(|leaves| {
            let internal = (leaves.len() as u128 - 1) / 3;
            let flagged = leaves.iter().filter(|b| b.side > 1).count() as u128;
            leaves.iter().map(|b| costs[b]).sum::<u128>() + lambda * (internal + flagged)
        })
        .min()
        .unwrap()
}

/// Random quadtree tiling with random leaf configs.
pub fn random_plan(rng: &mut impl Rng, side: u32, min_leaf_side: u32, pdr_count: usize) -> QuadTreePlan {
    fn grow(rng: &mut impl Rng, b: Block, min: u32, out: &mut Vec<Block>) {
        if b.side > min && rng.random_bool(0.55) {
            for c in b.children() {
                grow(rng, c, min, out);
            }
        } else {
            out.push(b);
        }
    }
    let mut blocks = Vec::new();
    grow(rng, Block::new(0, 0, side), min_leaf_side, &mut blocks);
    QuadTreePlan::from_blocks(side, min_leaf_side, &blocks, |_| {
        let c = if rng.random_bool(0.5) { LeafConfig::skip() } else { LeafConfig::acquire(rng.random()) };
        c.with_pdr(rng.random_range(0..pdr_count) as u8)
    })
    .unwrap()
}

/// Occupancy with each (bin, polarity, pixel) set independently.
pub fn random_occupancy(rng: &mut impl Rng, side: u32, n_bins: usize, density: f64) -> Occupancy {
    let mut occ = Occupancy::empty(side, n_bins);
    for m in occ.maps_mut() {
        for c in m.iter_mut() {
            *c = rng.random_bool(density);
        }
    }
    occ
}

/// Smallest distance between kept events, pooled over bins and polarities.
pub fn min_pairwise_distance(occ: &Occupancy) -> f64 {
    let pts: Vec<(u32, u32)> = scan_order(occ).map(|(_, y, x, _)| (x, y)).collect();
    let mut best = f64::INFINITY;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.min((a.0 as f64 - b.0 as f64).hypot(a.1 as f64 - b.1 as f64));
        }
    }
    best
}
