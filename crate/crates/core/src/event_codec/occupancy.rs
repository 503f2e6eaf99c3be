use crate::block::Block;
use crate::error::{Error, Result};
use crate::imaging::{EventCountMap, EventVolume, Polarity};

/// Binary event occupancy: one `side x side` map per (bin, polarity), stored
/// in codec order `bin0+, bin0-, bin1+, ...`. Several events at the same
/// pixel, bin and polarity collapse to one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occupancy {
    side: u32,
    n_bins: usize,
    maps: Vec<Vec<bool>>,
}

#[inline]
pub fn map_index(bin: usize, p: Polarity) -> usize {
    bin * 2 + p.index()
}

impl Occupancy {
    pub fn empty(side: u32, n_bins: usize) -> Self {
        Self { side, n_bins, maps: vec![vec![false; side as usize * side as usize]; 2 * n_bins] }
    }

    pub fn from_volume(volume: &EventVolume, side: u32) -> Result<Self> {
        let mut occ = Self::empty(side, volume.n_bins());
        for (bin, e) in volume.iter() {
            if e.x >= side || e.y >= side {
                return Err(Error::EventOutsideFrame { x: e.x, y: e.y, side });
            }
            occ.set(bin, e.p, e.x, e.y, true);
        }
        Ok(occ)
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Maps in codec order.
    pub fn maps(&self) -> &[Vec<bool>] {
        &self.maps
    }

    pub fn maps_mut(&mut self) -> &mut [Vec<bool>] {
        &mut self.maps
    }

    #[inline]
    pub fn get(&self, bin: usize, p: Polarity, x: u32, y: u32) -> bool {
        self.maps[map_index(bin, p)][(y * self.side + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, bin: usize, p: Polarity, x: u32, y: u32, v: bool) {
        let s = self.side;
        self.maps[map_index(bin, p)][(y * s + x) as usize] = v;
    }

    pub fn total(&self) -> u64 {
        self.maps.iter().map(|m| m.iter().filter(|&&b| b).count() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.iter().all(|m| !m.contains(&true))
    }

    /// Per-pixel number of set (bin, polarity) cells.
    pub fn counts(&self) -> EventCountMap {
        let mut c = EventCountMap::zeros(self.side);
        for m in &self.maps {
            for (dst, &b) in c.counts.iter_mut().zip(m) {
                *dst += b as u32;
            }
        }
        c
    }

    /// Event frame of one temporal bin, both polarities summed.
    pub fn bin_counts(&self, bin: usize) -> EventCountMap {
        let mut c = EventCountMap::zeros(self.side);
        for m in &self.maps[bin * 2..bin * 2 + 2] {
            for (dst, &b) in c.counts.iter_mut().zip(m) {
                *dst += b as u32;
            }
        }
        c
    }

    /// Copy of `block` in block-local coordinates.
    pub fn extract(&self, block: Block) -> Occupancy {
        let mut out = Occupancy::empty(block.side, self.n_bins);
        let (s, bs) = (self.side as usize, block.side as usize);
        for (dst, src) in out.maps.iter_mut().zip(&self.maps) {
            for r in 0..bs {
                let a = (block.y as usize + r) * s + block.x as usize;
                dst[r * bs..(r + 1) * bs].copy_from_slice(&src[a..a + bs]);
            }
        }
        out
    }

    pub fn insert(&mut self, block: Block, local: &Occupancy) {
        let (s, bs) = (self.side as usize, block.side as usize);
        for (dst, src) in self.maps.iter_mut().zip(&local.maps) {
            for r in 0..bs {
                let a = (block.y as usize + r) * s + block.x as usize;
                dst[a..a + bs].copy_from_slice(&src[r * bs..(r + 1) * bs]);
            }
        }
    }

    /// True iff every set cell of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Occupancy) -> bool {
        self.maps.iter().zip(&other.maps).all(|(a, b)| a.iter().zip(b).all(|(&x, &y)| !x || y))
    }
}
