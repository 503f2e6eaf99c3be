//! Joint intensity and event quadtree coding with a closed host/chip loop.

pub mod bits;
pub mod block;
pub mod chip;
pub mod error;
pub mod event_codec;
pub mod exec;
pub mod host;
pub mod imaging;
pub mod metrics;
pub mod quadtree;
pub mod rd;
pub mod rect;
pub mod runner;

pub use error::{Error, Result};
