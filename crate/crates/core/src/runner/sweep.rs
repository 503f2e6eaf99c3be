use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{run_closed_loop, Dataset, RunConfig};
use crate::error::Result;
use crate::rd::SearchStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Prefixed,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: SweepMode,
    pub rate_bps: f64,
    /// Prefixed intensity share; empty for joint rows.
    pub intensity_fraction: Option<f64>,
    pub mota: Option<f64>,
    pub bitrate_bps: f64,
    pub achieved_intensity_fraction: f64,
    pub mean_psnr_db: f64,
    pub optimizer_invocations: usize,
    /// Frames whose budget was below the minimum achievable rate.
    pub infeasible_frames: usize,
    pub flagged: bool,
}

/// Intensity shares 10%, 20%, ..., 100%.
pub fn prefixed_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// One closed-loop run per (rate, allocation) point; points run in parallel.
pub fn sweep(cfg: &RunConfig, data: &Dataset, mode: SweepMode, rates: &[f64]) -> Result<Vec<SweepRow>> {
    let fractions: Vec<Option<f64>> = match mode {
        SweepMode::Joint => vec![None],
        SweepMode::Prefixed => prefixed_grid().into_iter().map(Some).collect(),
    };
    let points: Vec<(f64, Option<f64>)> = rates.iter().flat_map(|&r| fractions.iter().map(move |&f| (r, f))).collect();
    cfg.exec()
        .map(&points, |&(rate_bps, intensity_fraction)| {
            let run_cfg = RunConfig { rate_bps, intensity_fraction, ..cfg.clone() };
            let log = run_closed_loop(&run_cfg, data)?;
            let infeasible = log.frames.iter().filter(|f| f.status == SearchStatus::Boundary { infeasible: true }).count();
            let finite: Vec<f64> = log.frames.iter().map(|f| f.psnr_db).filter(|p| p.is_finite()).collect();
            Ok(SweepRow {
                mode,
                rate_bps,
                intensity_fraction,
                mota: log.mota.map(|m| m.mota),
                bitrate_bps: log.rates.bitrate_bps,
                achieved_intensity_fraction: log.rates.intensity_fraction,
                mean_psnr_db: if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 },
                optimizer_invocations: log.optimizer_invocations,
                infeasible_frames: infeasible,
                flagged: infeasible > 0,
            })
        })
        .into_iter()
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "mode",
        "rate_bps",
        "intensity_fraction",
        "mota",
        "bitrate_bps",
        "achieved_intensity_fraction",
        "mean_psnr_db",
        "optimizer_invocations",
        "infeasible_frames",
        "flagged",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
    for r in rows {
        let mode = match r.mode {
            SweepMode::Prefixed => "prefixed",
            SweepMode::Joint => "joint",
        };
        out.write_record([
            mode.to_string(),
            format!("{}", r.rate_bps),
            opt(r.intensity_fraction),
            opt(r.mota),
            format!("{:.1}", r.bitrate_bps),
            format!("{:.4}", r.achieved_intensity_fraction),
            format!("{:.2}", r.mean_psnr_db),
            r.optimizer_invocations.to_string(),
            r.infeasible_frames.to_string(),
            r.flagged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
