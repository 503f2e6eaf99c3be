//! Per-leaf event payloads.
//!
//! A leaf payload is the PDR index (`ceil(log2 M)` bits) followed by one
//! run-length coded map per (bin, polarity) in codec order. Each map is a
//! raster scan of the block coded as zero-run symbols and closed by EOM;
//! trailing zeros are implied. Payloads are prefix-decodable back to back,
//! so no padding separates leaves.

use super::huffman::{code_len, read_symbol, write_symbol, Symbol, ESC_CONTINUE, ESC_LITERAL_BITS, MAX_DIRECT_RUN};
use super::occupancy::Occupancy;
use super::sampling::index_bits;
use crate::bits::{push_bits, BitCursor, Bits};
use crate::error::{Error, Result};
use crate::quadtree::QuadTreePlan;

/// Symbols for `run` zeros followed by a one; escapes carry their literal.
fn run_symbols(mut run: u32, mut emit: impl FnMut(Symbol, Option<u32>)) {
    while run >= ESC_CONTINUE {
        emit(Symbol::Esc, Some(ESC_CONTINUE));
        run -= ESC_CONTINUE;
    }
    if run <= MAX_DIRECT_RUN {
        emit(Symbol::Run(run as u8), None);
    } else {
        emit(Symbol::Esc, Some(run));
    }
}

fn for_each_symbol(map: &[bool], mut emit: impl FnMut(Symbol, Option<u32>)) {
    let mut run = 0u32;
    for &b in map {
        if b {
            run_symbols(run, &mut emit);
            run = 0;
        } else {
            run += 1;
        }
    }
    emit(Symbol::Eom, None);
}

/// Coded length of one map in bits.
pub fn map_bits(map: &[bool]) -> u64 {
    let mut n = 0u64;
    for_each_symbol(map, |s, lit| n += code_len(s) as u64 + if lit.is_some() { ESC_LITERAL_BITS as u64 } else { 0 });
    n
}

pub fn encode_map(map: &[bool], out: &mut Bits) {
    for_each_symbol(map, |s, lit| {
        write_symbol(out, s);
        if let Some(v) = lit {
            push_bits(out, v as u64, ESC_LITERAL_BITS);
        }
    });
}

pub fn decode_map(cur: &mut BitCursor<'_>, len: usize) -> Result<Vec<bool>> {
    let mut map = vec![false; len];
    let mut pos = 0usize;
    let overflow = |pos: usize| Error::InvalidArgument(format!("run reaches cell {pos} of a {len}-cell map"));
    loop {
        let (zeros, one) = match read_symbol(cur)? {
            Symbol::Eom => return Ok(map),
            Symbol::Run(n) => (n as usize, true),
            Symbol::Esc => {
                let v = cur.read_bits(ESC_LITERAL_BITS)? as u32;
                (v as usize, v != ESC_CONTINUE)
            }
        };
        pos += zeros;
        if one {
            if pos >= len {
                return Err(overflow(pos));
            }
            map[pos] = true;
            pos += 1;
        } else if pos > len {
            return Err(overflow(pos));
        }
    }
}

/// Bit length of a leaf payload, without building it.
pub fn leaf_event_bits(sampled: &Occupancy, pdr_count: usize) -> u64 {
    index_bits(pdr_count) as u64 + sampled.maps().iter().map(|m| map_bits(m)).sum::<u64>()
}

/// Payload bits for an empty leaf with `n_bins` bins.
pub fn empty_leaf_bits(n_bins: usize, pdr_count: usize) -> u64 {
    index_bits(pdr_count) as u64 + 2 * n_bins as u64 * code_len(Symbol::Eom) as u64
}

pub fn encode_leaf_events(sampled: &Occupancy, pdr_index: usize, pdr_count: usize, out: &mut Bits) -> Result<u64> {
    if pdr_index >= pdr_count.max(1) {
        return Err(Error::InvalidArgument(format!("PDR index {pdr_index} out of {pdr_count} candidates")));
    }
    let start = out.len();
    push_bits(out, pdr_index as u64, index_bits(pdr_count));
    for m in sampled.maps() {
        encode_map(m, out);
    }
    Ok((out.len() - start) as u64)
}

/// Decodes one leaf payload into a block-local volume.
pub fn decode_leaf_events(cur: &mut BitCursor<'_>, side: u32, n_bins: usize, pdr_count: usize) -> Result<(usize, Occupancy)> {
    let pdr = cur.read_bits(index_bits(pdr_count))? as usize;
    if pdr >= pdr_count.max(1) {
        return Err(Error::InvalidArgument(format!("PDR index {pdr} out of {pdr_count} candidates")));
    }
    let mut occ = Occupancy::empty(side, n_bins);
    let len = side as usize * side as usize;
    for m in occ.maps_mut() {
        *m = decode_map(cur, len)?;
    }
    Ok((pdr, occ))
}

/// Encodes the sampled volume of every leaf of `plan` in z-order, using
/// each leaf's PDR index. `sampled` must already be thinned per leaf.
pub fn encode_events(plan: &QuadTreePlan, sampled: &Occupancy, pdr_count: usize) -> Result<Bits> {
    if sampled.side() != plan.frame_side() {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0} occupancy", plan.frame_side()),
            actual: format!("{0}x{0}", sampled.side()),
        });
    }
    let mut out = Bits::new();
    for leaf in plan.leaves() {
        encode_leaf_events(&sampled.extract(leaf.block), leaf.config.pdr_index as usize, pdr_count, &mut out)?;
    }
    Ok(out)
}

/// Decodes the event stream for `plan`, returning the per-leaf PDR indices
/// and the full-frame occupancy (one event frame per bin and polarity).
pub fn decode_events(cur: &mut BitCursor<'_>, plan: &QuadTreePlan, n_bins: usize, pdr_count: usize) -> Result<(Vec<u8>, Occupancy)> {
    let mut occ = Occupancy::empty(plan.frame_side(), n_bins);
    let mut pdrs = Vec::with_capacity(plan.leaves().len());
    for (i, leaf) in plan.leaves().iter().enumerate() {
        let (pdr, local) = decode_leaf_events(cur, leaf.block.side, n_bins, pdr_count).map_err(|e| Error::MalformedLeaf { leaf: i, reason: e.to_string() })?;
        occ.insert(leaf.block, &local);
        pdrs.push(pdr as u8);
    }
    Ok((pdrs, occ))
}
