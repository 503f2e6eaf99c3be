//! Deterministic Poisson-disk thinning of event occupancy.
//!
//! Kept events are at least `r` apart in 2-D, measured over the whole block
//! volume: once a pixel keeps an event, later events at that pixel or within
//! `r` of it are dropped in every bin and polarity.

use serde::{Deserialize, Serialize};

use super::occupancy::Occupancy;
use crate::error::{Error, Result};
use crate::imaging::Polarity;

/// Blocks narrower than this keep all their events.
pub const MIN_SAMPLED_SIDE: u32 = 4;

/// Effective radius for a block: 0 below side 4, then `base`, `2*base` at
/// side 8 and `4*base` from side 16 up.
pub fn pdr_for_block(block_side: u32, base: f64) -> f64 {
    match block_side {
        s if s < MIN_SAMPLED_SIDE => 0.0,
        4 => base,
        8 => 2.0 * base,
        _ => 4.0 * base,
    }
}

/// Candidate base radii, ascending. Index 0 keeps the most events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdrSchedule {
    base: Vec<f64>,
}

impl PdrSchedule {
    pub fn new(base: Vec<f64>) -> Result<Self> {
        if base.is_empty() || base.len() > 255 {
            return Err(Error::InvalidArgument("need 1..=255 PDR candidates".into()));
        }
        if base.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || base.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!("PDR candidates must be finite, non-negative and ascending: {base:?}")));
        }
        Ok(Self { base })
    }

    pub fn constant(r: f64) -> Self {
        Self::new(vec![r]).expect("single radius")
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn radius(&self, index: usize, block_side: u32) -> f64 {
        pdr_for_block(block_side, self.base[index])
    }

    /// Bits spent on the PDR index in each leaf.
    pub fn index_bits(&self) -> u32 {
        index_bits(self.base.len())
    }
}

pub fn index_bits(count: usize) -> u32 {
    if count <= 1 {
        0
    } else {
        usize::BITS - (count - 1).leading_zeros()
    }
}

/// Plain greedy scan: keep a point iff no earlier kept point lies closer
/// than `r`. Returns a keep flag per input point.
pub fn poisson_disk_sample(points: &[(u32, u32)], r: f64) -> Vec<bool> {
    let r2 = r * r;
    let mut kept: Vec<(u32, u32)> = Vec::new();
    points
        .iter()
        .map(|&(x, y)| {
            let free = kept.iter().all(|&(kx, ky)| {
                let (dx, dy) = (kx as f64 - x as f64, ky as f64 - y as f64);
                dx * dx + dy * dy >= r2
            });
            if free {
                kept.push((x, y));
            }
            free
        })
        .collect()
}

/// Scan order of a block volume: bin, row, column, positive before negative.
pub fn scan_order(occ: &Occupancy) -> impl Iterator<Item = (usize, u32, u32, Polarity)> + '_ {
    let s = occ.side();
    (0..occ.n_bins()).flat_map(move |b| {
        (0..s).flat_map(move |y| {
            (0..s).flat_map(move |x| {
                [Polarity::Positive, Polarity::Negative].into_iter().filter(move |&p| occ.get(b, p, x, y)).map(move |p| (b, y, x, p))
            })
        })
    })
}

struct Blocker {
    side: i64,
    blocked: Vec<bool>,
    offsets: Vec<(i64, i64)>,
}

impl Blocker {
    fn new(side: u32, r: f64) -> Self {
        let reach = r.ceil() as i64;
        let r2 = r * r;
        let offsets = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) < r2)
            .collect();
        Self { side: side as i64, blocked: vec![false; side as usize * side as usize], offsets }
    }

    fn is_blocked(&self, x: u32, y: u32) -> bool {
        self.blocked[(y as i64 * self.side + x as i64) as usize]
    }

    fn block(&mut self, x: u32, y: u32) {
        for &(dx, dy) in &self.offsets {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < self.side && ny < self.side {
                self.blocked[(ny * self.side + nx) as usize] = true;
            }
        }
    }
}

/// Greedy thinning of a block-local volume. Events in `seed` are kept
/// unconditionally and block their neighbourhood first.
pub fn sample_block(occ: &Occupancy, r: f64, seed: Option<&Occupancy>) -> Occupancy {
    if r <= 0.0 {
        return occ.clone();
    }
    let mut blocker = Blocker::new(occ.side(), r);
    let mut kept = match seed {
        Some(s) => {
            for (_, y, x, _) in scan_order(s) {
                blocker.block(x, y);
            }
            s.clone()
        }
        None => Occupancy::empty(occ.side(), occ.n_bins()),
    };
    let order: Vec<_> = scan_order(occ).collect();
    for (b, y, x, p) in order {
        if kept.get(b, p, x, y) || blocker.is_blocked(x, y) {
            continue;
        }
        kept.set(b, p, x, y, true);
        blocker.block(x, y);
    }
    kept
}

/// Sampled volumes for every schedule entry of one block. The largest radius
/// is sampled first and each smaller radius starts from the next larger
/// kept set, so kept sets are nested: a larger index never keeps more.
pub fn sample_ladder(occ: &Occupancy, schedule: &PdrSchedule) -> Vec<Occupancy> {
    let side = occ.side();
    let mut out: Vec<Occupancy> = Vec::with_capacity(schedule.len());
    for k in (0..schedule.len()).rev() {
        let r = schedule.radius(k, side);
        let next = sample_block(occ, r, out.last());
        out.push(next);
    }
    out.reverse();
    out
}
