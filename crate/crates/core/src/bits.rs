//! MSB-first bit buffers shared by the segmentation and event bitstreams.

use bitvec::prelude::*;

use crate::error::{Error, Result};

pub type Bits = BitVec<u8, Msb0>;

pub fn push_bits(out: &mut Bits, value: u64, width: u32) {
    for i in (0..width).rev() {
        out.push((value >> i) & 1 == 1);
    }
}

/// Sequential reader over a bit slice that reports absolute offsets on failure.
pub struct BitCursor<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
    base: usize,
}

impl<'a> BitCursor<'a> {
    pub fn new(bits: &'a BitSlice<u8, Msb0>) -> Self {
        Self { bits, pos: 0, base: 0 }
    }

    /// Offsets in errors are reported relative to `base`.
    pub fn with_base(bits: &'a BitSlice<u8, Msb0>, base: usize) -> Self {
        Self { bits, pos: 0, base }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        match self.bits.get(self.pos) {
            Some(b) => {
                self.pos += 1;
                Ok(*b)
            }
            None => Err(Error::Truncated { offset: self.base + self.pos }),
        }
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }
}
