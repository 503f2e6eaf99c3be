//! Per-frame Lagrange multiplier search against a bit budget.
//!
//! Rate is non-increasing in lambda, so the search brackets the budget
//! geometrically from a warm start and bisects on `log(lambda)`. Lagrangian
//! solutions lie on the lower convex hull of the (R, D) cloud, so the budget
//! may fall into a hull gap, which is then narrowed greedily (see `fill`).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::candidates::CandidateTable;
use super::dp::{optimize_tree, OptimizationResult};
use super::fill::fill_gap;
use crate::error::{Error, Result};
use crate::exec::ExecPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearchConfig {
    pub r_max: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub lambda_max: f64,
    pub warm_start: Option<f64>,
}

impl LambdaSearchConfig {
    pub fn new(r_max: u64) -> Self {
        Self { r_max, tolerance: 0.05, max_iterations: 20, lambda_max: 1e18, warm_start: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} outside (0, 1)", self.tolerance)));
        }
        if self.max_iterations < 3 || !(self.lambda_max > 0.0) {
            return Err(Error::InvalidArgument("need at least 3 iterations and a positive lambda bound".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    /// The distortion-optimal solution already fits.
    Unconstrained,
    /// Rate within tolerance below the budget.
    Converged,
    /// Best solution found below the budget, further than tolerance from it.
    HullGap,
    /// Budget at or below the minimum achievable rate; the minimum-rate
    /// solution is returned. `infeasible` when it still exceeds the budget.
    Boundary { infeasible: bool },
}

impl SearchStatus {
    pub fn is_boundary(self) -> bool {
        matches!(self, SearchStatus::Boundary { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaIteration {
    pub lambda: f64,
    pub rate: u64,
    pub distortion: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub result: OptimizationResult,
    pub status: SearchStatus,
    pub iterations: Vec<LambdaIteration>,
}

impl SearchOutcome {
    pub fn lambda(&self) -> f64 {
        self.result.lambda
    }
}

struct Evaluator<'a> {
    table: &'a CandidateTable,
    exec: ExecPolicy,
    log: Vec<LambdaIteration>,
}

impl Evaluator<'_> {
    fn eval(&mut self, lambda: f64) -> OptimizationResult {
        let r = optimize_tree(self.table, lambda, self.exec);
        self.log.push(LambdaIteration {
            lambda,
            rate: r.totals.rate(),
            distortion: r.totals.distortion(),
            cost: r.totals.cost(lambda),
        });
        r
    }
}

pub fn search_lambda(table: &CandidateTable, cfg: &LambdaSearchConfig, exec: ExecPolicy) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut ev = Evaluator { table, exec, log: Vec::new() };
    let r_max = cfg.r_max;
    let done = |ev: Evaluator<'_>, result, status| Ok(SearchOutcome { result, status, iterations: ev.log });

    let min_rate = ev.eval(cfg.lambda_max);
    let r_min = min_rate.totals.rate();
    if r_min >= r_max {
        return done(ev, min_rate, SearchStatus::Boundary { infeasible: r_min > r_max });
    }
    let free = ev.eval(0.0);
    if free.totals.rate() <= r_max {
        return done(ev, free, SearchStatus::Unconstrained);
    }
    let target = (1.0 - cfg.tolerance) * r_max as f64;
    let good = |r: &OptimizationResult| r.totals.rate() as f64 >= target;

    // `hi` always fits the budget, `lo` never does.
    let mut hi = min_rate;
    let mut lo = free;
    let mut lo_lambda = 0.0f64;
    let mut guess = cfg.warm_start.filter(|w| w.is_finite() && *w > 0.0 && *w < cfg.lambda_max).unwrap_or(1.0);
    let mut probe_up: Option<bool> = None;
    while ev.log.len() < cfg.max_iterations {
        let r = ev.eval(guess);
        let fits = r.totals.rate() <= r_max;
        if fits {
            if good(&r) {
                return done(ev, r, SearchStatus::Converged);
            }
            hi = r;
            if probe_up == Some(true) {
                break;
            }
            probe_up = Some(false);
            guess /= 16.0;
        } else {
            lo_lambda = guess;
            lo = r;
            if probe_up == Some(false) {
                break;
            }
            probe_up = Some(true);
            guess = (guess * 16.0).min(cfg.lambda_max);
            if guess >= hi.lambda {
                break;
            }
        }
    }
    while ev.log.len() < cfg.max_iterations {
        let mid = if lo_lambda > 0.0 { (lo_lambda * hi.lambda).sqrt() } else { hi.lambda / 16.0 };
        if !(mid > lo_lambda && mid < hi.lambda) || hi.lambda / lo_lambda.max(f64::MIN_POSITIVE) < 1.0 + 1e-12 {
            break;
        }
        let r = ev.eval(mid);
        if r.totals.rate() <= r_max {
            hi = r;
            if good(&hi) {
                break;
            }
        } else {
            lo_lambda = mid;
            lo = r;
        }
    }
    if !good(&hi) {
        hi = fill_gap(table, &hi, &lo, r_max);
    }
    let status = if good(&hi) { SearchStatus::Converged } else { SearchStatus::HullGap };
    done(ev, hi, status)
}

/// Writes one CSV row per multiplier evaluation.
pub fn write_iterations_csv<W: Write>(w: W, rows: &[(usize, LambdaIteration)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["frame", "lambda", "rate", "distortion", "cost"])?;
    for (frame, it) in rows {
        out.write_record([frame.to_string(), it.lambda.to_string(), it.rate.to_string(), it.distortion.to_string(), it.cost.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
