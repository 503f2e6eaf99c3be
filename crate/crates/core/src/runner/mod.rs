//! Run configuration, datasets, the closed-loop driver and sweeps.

mod closed_loop;
mod dataset;
mod presets;
mod sweep;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use closed_loop::{run_closed_loop, FrameLog, LoopSequencer, RunLog, Stage};
pub use dataset::{read_ground_truth, write_ground_truth, Dataset};
pub use presets::{preset, PRESETS};
pub use sweep::{prefixed_grid, sweep, write_sweep_csv, SweepMode, SweepRow};

use crate::chip::{Allocation, ChipConfig};
use crate::error::{Error, Result};
use crate::event_codec::PdrSchedule;
use crate::exec::ExecPolicy;
use crate::host::{BlobConfig, FusionConfig, FusionStrategy, HostConfig, OracleConfig, SortConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Channel budget in bits per second for a `reference_side` square frame.
    pub rate_bps: f64,
    pub frame_rate: f64,
    /// Budgets scale with frame area relative to this side.
    pub reference_side: u32,
    pub n_bins: usize,
    pub pdr_base: Vec<f64>,
    pub event_weight: f64,
    pub roi_weight: f64,
    pub background_weight: f64,
    /// `None` for joint allocation, else the prefixed intensity share.
    pub intensity_fraction: Option<f64>,
    pub fusion_strategy: FusionStrategy,
    pub match_class: bool,
    pub detector_jitter: f64,
    pub detector_dropout: f64,
    /// Mean absolute reconstruction error above which the oracle misses.
    pub detector_gate: Option<f64>,
    pub event_tracking: bool,
    pub blob_min_area: usize,
    pub blob_dilation: u32,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub min_leaf_side: u32,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rate_bps: 1.5e6,
            frame_rate: 30.0,
            reference_side: 512,
            n_bins: 4,
            pdr_base: vec![1.0],
            event_weight: 500.0,
            roi_weight: 1000.0,
            background_weight: 1.0,
            intensity_fraction: None,
            fusion_strategy: FusionStrategy::Confidence,
            match_class: false,
            detector_jitter: 0.0,
            detector_dropout: 0.0,
            detector_gate: Some(40.0),
            event_tracking: true,
            blob_min_area: 2,
            blob_dilation: 6,
            tolerance: 0.05,
            max_iterations: 20,
            seed: 0,
            min_leaf_side: 1,
            parallel: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.rate_bps > 0.0 && self.frame_rate > 0.0) || self.reference_side == 0 {
            return bad("rate, frame rate and reference side must be positive");
        }
        if self.n_bins == 0 || self.n_bins > 255 {
            return bad("n_bins must be in 1..=255");
        }
        if self.intensity_fraction.is_some_and(|f| !(0.0..=1.0).contains(&f)) {
            return bad("intensity_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.detector_dropout) || self.detector_jitter < 0.0 {
            return bad("detector noise out of range");
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) || self.max_iterations < 3 {
            return bad("tolerance must be in (0, 1) and max_iterations at least 3");
        }
        PdrSchedule::new(self.pdr_base.clone()).map(|_| ()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Per-frame bit budget for a `side x side` frame.
    pub fn budget_bits(&self, side: u32) -> u64 {
        let scale = (side as f64 / self.reference_side as f64).powi(2);
        (self.rate_bps / self.frame_rate * scale).floor() as u64
    }

    pub fn exec(&self) -> ExecPolicy {
        if self.parallel {
            ExecPolicy::Parallel
        } else {
            ExecPolicy::Sequential
        }
    }

    pub fn chip_config(&self) -> Result<ChipConfig> {
        Ok(ChipConfig {
            n_bins: self.n_bins,
            schedule: PdrSchedule::new(self.pdr_base.clone())?,
            min_leaf_side: self.min_leaf_side,
            roi_weight: self.roi_weight,
            background_weight: self.background_weight,
            event_weight: self.event_weight,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            allocation: match self.intensity_fraction {
                None => Allocation::Joint,
                Some(f) => Allocation::Prefixed { intensity_fraction: f },
            },
            exec: self.exec(),
        })
    }

    pub fn host_config(&self) -> HostConfig {
        HostConfig {
            intensity_sort: SortConfig::default(),
            event_sort: SortConfig::default(),
            fusion: FusionConfig { strategy: self.fusion_strategy, match_class: self.match_class, ..FusionConfig::default() },
            blob: BlobConfig { min_area: self.blob_min_area, dilation: self.blob_dilation },
            event_tracking: self.event_tracking,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig { jitter: self.detector_jitter, dropout: self.detector_dropout, seed: self.seed, gate: self.detector_gate }
    }
}
