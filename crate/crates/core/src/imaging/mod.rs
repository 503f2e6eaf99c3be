//! Sensor data types: frames, events, temporal binning and synthetic scenes.

mod events;
mod frame;
mod synth;

pub use events::{
    aggregate_counts, bin_events, bin_index, read_events, write_events, Event, EventCountMap, EventVolume, Polarity,
};
pub use frame::{Frame, PaddedFrame};
pub use synth::{
    frame_interval_us, generate_synthetic_sequence, synthesize_events, GroundTruthObject, SceneConfig, ShapeSpec,
    SyntheticSequence,
};
