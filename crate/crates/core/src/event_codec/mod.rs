//! Lossy per-leaf event compression: Poisson-disk thinning, binary occupancy
//! maps and run-length + static Huffman coding.

mod codec;
pub mod huffman;
mod occupancy;
mod sampling;

pub use codec::{
    decode_events, decode_leaf_events, decode_map, empty_leaf_bits, encode_events, encode_leaf_events, encode_map,
    leaf_event_bits, map_bits,
};
pub use occupancy::{map_index, Occupancy};
pub use sampling::{
    index_bits, pdr_for_block, poisson_disk_sample, sample_block, sample_ladder, scan_order, PdrSchedule,
    MIN_SAMPLED_SIDE,
};
