//! Joint intensity and event rate-distortion optimization.
//!
//! Distortion is integral, in units of `1 / side^2`: region weights are
//! scaled by the frame area so that the tree search and its exhaustive check
//! compare exact integers.

mod candidates;
mod distortion;
mod dp;
mod fill;
mod lambda;
mod weights;

pub use candidates::{
    mode_bits, node_candidates, sample_plan, CandidateTable, EventCandidate, FrameInputs, NodeCandidates, ACQUIRE_BITS,
    SKIP_BITS,
};
pub use distortion::{event_leaf_distortion, intensity_leaf_distortion};
pub use dp::{optimize_tree, OptimizationResult, RdTotals};
pub use lambda::{search_lambda, write_iterations_csv, LambdaIteration, LambdaSearchConfig, SearchOutcome, SearchStatus};
pub use weights::{DistortionWeights, Region, WeightMap};
