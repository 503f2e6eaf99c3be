//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Failures are reported but only fail the process when
//! `QTEV_STRICT_ACCEPTANCE` is set, so the report always runs to the end.
//! Criterion numbers given as arguments restrict the run to those.

mod common;

use std::time::Instant;

use common::{exhaustive_min_cost, min_pairwise_distance, random_instance, random_occupancy, random_plan};
use qtev_core::block::Block;
use qtev_core::chip::{decode_packet, ChipConfig, ChipPacket, ChipState, PacketHeader};
use qtev_core::event_codec::{encode_events, sample_block, sample_ladder, Occupancy, PdrSchedule, MIN_SAMPLED_SIDE};
use qtev_core::exec::ExecPolicy;
use qtev_core::host::{BoundingBox, Source};
use qtev_core::imaging::{generate_synthetic_sequence, GroundTruthObject};
use qtev_core::metrics::{FrameCounts, MotaAccumulator};
use qtev_core::rd::{event_leaf_distortion, optimize_tree, sample_plan, CandidateTable, DistortionWeights, FrameInputs, SearchStatus, WeightMap};
use qtev_core::rect::{BoxRect, ClassId};
use qtev_core::runner::{preset, run_closed_loop, sweep, Dataset, RunConfig, SweepMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ground truth and predictions of one frame.
type Scored = (Vec<GroundTruthObject>, Vec<BoundingBox>);
type Criterion = fn() -> Outcome;

const DP_INSTANCES: u64 = 200;
const DP_TIME_LIMIT_S: f64 = 60.0;
const RATE_TOLERANCE: f64 = 0.05;
const RATES_BPS: [f64; 3] = [0.5e6, 1.0e6, 1.5e6];
const LAMBDA_GRID: usize = 10;
const CODEC_ROUND_TRIPS: u64 = 1000;
const PDS_BLOCKS: u64 = 500;
const DISTORTION_BLOCKS: u64 = 100;
const MOTA_EPS: f64 = 1e-12;
const GENEROUS_BPS: f64 = 4.0e6;
const TRACKING_MOTA_MIN: f64 = 0.95;
const JOINT_SHARE_MIN: f64 = 0.9;
const INVOCATION_RATIO: usize = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn moving_squares(n_frames: usize) -> Dataset {
    let scene = qtev_core::imaging::SceneConfig { n_frames, ..preset("moving-squares", 0).unwrap() };
    Dataset::from_synthetic(&generate_synthetic_sequence(&scene).unwrap(), 4).unwrap()
}

fn dp_optimality() -> Outcome {
    let t0 = Instant::now();
    let mut mismatches = Vec::new();
    for seed in 0..DP_INSTANCES {
        let mut inst = random_instance(seed);
        if seed % 2 == 0 {
            inst.schedule = PdrSchedule::constant(1.0);
        }
        let table = CandidateTable::build(&inst.inputs(), ExecPolicy::Parallel).unwrap();
        let r = optimize_tree(&table, inst.lambda as f64, ExecPolicy::Parallel);
        let oracle = exhaustive_min_cost(&inst);
        if r.cost != oracle as f64 {
            mismatches.push(seed);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        mismatches.is_empty() && secs < DP_TIME_LIMIT_S,
        format!("{DP_INSTANCES} 8x8 instances, {} cost mismatches {mismatches:?}, {secs:.1}s (limit {DP_TIME_LIMIT_S}s)", mismatches.len()),
    )
}

fn rate_control() -> Outcome {
    let data = moving_squares(20);
    let side = data.side();
    let mut misses = Vec::new();
    let mut non_monotone = Vec::new();
    let mut boundary = 0;
    for rate in RATES_BPS {
        let r_max = RunConfig { rate_bps: rate, ..RunConfig::default() }.budget_bits(side);
        let mut chip = ChipState::new(side, ChipConfig::default()).unwrap();
        for t in 0..data.len() {
            let prev = chip.prev_recon().clone();
            let (packet, report) = chip.encode_step(&data.frames[t], &data.events[t], &[], r_max).unwrap();
            let r = packet.total_bits();
            let ok = match report.status {
                SearchStatus::Boundary { .. } => {
                    boundary += 1;
                    true
                }
                SearchStatus::Unconstrained => r <= r_max,
                _ => r <= r_max && r as f64 >= (1.0 - RATE_TOLERANCE) * r_max as f64,
            };
            if !ok {
                misses.push(format!("{rate:e}@{t}: {r}/{r_max} {:?}", report.status));
            }

            let occ = Occupancy::from_volume(&data.events[t], side).unwrap();
            let cfg = ChipConfig::default();
            let w = WeightMap::new(&DistortionWeights::uniform(cfg.background_weight, cfg.event_weight), side, (side, side)).unwrap();
            let inputs = FrameInputs { frame: &data.frames[t], prev_recon: &prev, events: &occ, weights: &w, schedule: &cfg.schedule, min_leaf_side: 1 };
            let table = CandidateTable::build(&inputs, ExecPolicy::Parallel).unwrap();
            let points: Vec<(u64, u64)> = (0..LAMBDA_GRID)
                .map(|k| {
                    let lambda = 10f64.powf(-2.0 + k as f64);
                    let res = optimize_tree(&table, lambda, ExecPolicy::Parallel);
                    (res.totals.rate(), res.totals.distortion())
                })
                .collect();
            if points.windows(2).any(|p| p[1].0 > p[0].0 || p[1].1 < p[0].1) {
                non_monotone.push(format!("{rate:e}@{t}"));
            }
        }
    }
    outcome(
        misses.is_empty() && non_monotone.is_empty(),
        format!(
            "{} frame budgets, {} off-tolerance {misses:?}, {boundary} boundary-flagged, {} non-monotone R/D grids {non_monotone:?}",
            RATES_BPS.len() * 20,
            misses.len(),
            non_monotone.len()
        ),
    )
}

fn codec_bit_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    for i in 0..CODEC_ROUND_TRIPS {
        let side = 1u32 << rng.random_range(0..=5);
        let min_leaf = 1u32 << rng.random_range(0..=side.trailing_zeros().min(2));
        let n_bins = rng.random_range(1..=4);
        let schedule = PdrSchedule::new([1.0, 2.0, 3.0][..rng.random_range(1..=3)].to_vec()).unwrap();
        let plan = random_plan(&mut rng, side, min_leaf, schedule.len());
        let density = rng.random_range(0.0..0.4);
        let occ = random_occupancy(&mut rng, side, n_bins, density);
        let sampled = sample_plan(&occ, &plan, &schedule);
        let ev = encode_events(&plan, &sampled, schedule.len()).unwrap();
        let header = PacketHeader {
            boundary: rng.random_bool(0.5),
            frame_index: i as u32,
            frame_side: side,
            min_leaf_side: min_leaf as u16,
            n_bins: n_bins as u8,
            pdr_count: schedule.len() as u8,
            intensity_bits: 0,
            event_bits: 0,
        };
        let packet = ChipPacket::new(header, &plan.serialize(), &ev).unwrap();
        let decoded = ChipPacket::from_bytes(&packet.to_bytes()).and_then(|p| decode_packet(&p));
        if !matches!(decoded, Ok(d) if d.plan == plan && d.events == sampled) {
            failures += 1;
        }
    }
    let log = run_closed_loop(&RunConfig::default(), &moving_squares(30)).unwrap();
    let diverged = log.frames.iter().filter(|f| !f.recon_match).count();
    outcome(
        failures == 0 && diverged == 0 && log.frames.len() == 30,
        format!("{failures}/{CODEC_ROUND_TRIPS} round-trip failures, {diverged}/{} closed-loop frames with diverging reconstructions", log.frames.len()),
    )
}

fn poisson_disk() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let schedule = PdrSchedule::new(vec![1.0, 2.0, 3.0]).unwrap();
    let (mut spacing, mut dropped_small, mut sampled_blocks) = (0, 0, 0);
    for _ in 0..PDS_BLOCKS {
        let side = 1u32 << rng.random_range(0..=5);
        let density = rng.random_range(0.05..0.6);
        let occ = random_occupancy(&mut rng, side, 4, density);
        for (k, kept) in sample_ladder(&occ, &schedule).iter().enumerate() {
            if side < MIN_SAMPLED_SIDE {
                dropped_small += (kept != &occ) as usize;
            } else {
                sampled_blocks += 1;
                let r = schedule.radius(k, side);
                spacing += (min_pairwise_distance(kept) < r) as usize;
            }
        }
    }
    outcome(
        spacing == 0 && dropped_small == 0,
        format!("{sampled_blocks} sampled ladders with {spacing} spacing violations, {dropped_small} small blocks that lost events"),
    )
}

fn gt(id: u32, x: f64, y: f64) -> GroundTruthObject {
    GroundTruthObject { id, class: ClassId::OBJECT, rect: BoxRect::new(x, y, 10.0, 10.0) }
}

fn pred(id: u64, x: f64, y: f64) -> BoundingBox {
    BoundingBox { rect: BoxRect::new(x, y, 10.0, 10.0), class: ClassId::OBJECT, score: 1.0, source: Source::Intensity, id }
}

fn mota_of(frames: &[(Vec<GroundTruthObject>, Vec<BoundingBox>)]) -> f64 {
    let mut acc = MotaAccumulator::new();
    for (g, p) in frames {
        acc.add_frame(g, p);
    }
    acc.summary().unwrap().mota
}

fn distortion_and_mota() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut wrong = 0;
    for _ in 0..DISTORTION_BLOCKS {
        let side = 32;
        let density = rng.random_range(0.0..0.3);
        let occ = random_occupancy(&mut rng, side, 4, density);
        let bs = 1u32 << rng.random_range(0..=4);
        let block = Block::new(rng.random_range(0..side / bs) * bs, rng.random_range(0..side / bs) * bs, bs);
        let mut sampled = occ.clone();
        sampled.insert(block, &sample_block(&occ.extract(block), rng.random_range(0.0..4.0), None));
        let w = rng.random_range(0..1000u64);
        let got = event_leaf_distortion(&occ.counts(), &sampled.counts(), block, w).unwrap();
        let mut tally = 0u64;
        for (o, s) in occ.maps().iter().zip(sampled.maps()) {
            for (x, y) in block.pixels() {
                let i = (y * side + x) as usize;
                tally += (o[i] && !s[i]) as u64;
            }
        }
        wrong += (got != w * tally) as usize;
    }

    let two = |x: f64| vec![gt(0, 0.0, 0.0), gt(1, x, 50.0)];
    let scenarios: Vec<(&str, Vec<Scored>, f64)> = vec![
        ("perfect", (0..3).map(|t| (two(t as f64), vec![pred(0, 0.0, 0.0), pred(1, t as f64, 50.0)])).collect(), 1.0),
        ("all missed", (0..3).map(|t| (two(t as f64), vec![])).collect(), 0.0),
        (
            "id swap",
            vec![(two(0.0), vec![pred(0, 0.0, 0.0), pred(1, 0.0, 50.0)]), (two(0.0), vec![pred(1, 0.0, 0.0), pred(0, 0.0, 50.0)])],
            0.5,
        ),
        ("miss plus false positive", vec![(two(0.0), vec![pred(0, 0.0, 0.0), pred(7, 80.0, 80.0)])], 0.0),
        (
            "one false positive over 400 objects",
            (0..100)
                .map(|t| {
                    let g: Vec<_> = (0..4).map(|i| gt(i, 20.0 * i as f64, 0.0)).collect();
                    let mut p: Vec<_> = (0..4).map(|i| pred(i as u64, 20.0 * i as f64, 0.0)).collect();
                    if t == 0 {
                        p.push(pred(9, 100.0, 100.0));
                    }
                    (g, p)
                })
                .collect(),
            1.0 - 0.0025,
        ),
    ];
    let mut bad = Vec::new();
    for (name, frames, want) in &scenarios {
        let got = mota_of(frames);
        if (got - want).abs() > MOTA_EPS {
            bad.push(format!("{name}: {got} != {want}"));
        }
    }
    let zero = qtev_core::metrics::mota(&[FrameCounts { ground_truth: 400, matches: 400, ..FrameCounts::default() }]).unwrap();
    outcome(
        wrong == 0 && bad.is_empty() && zero == 1.0,
        format!("{wrong}/{DISTORTION_BLOCKS} event distortion mismatches, {} MOTA scenarios wrong {bad:?}", bad.len()),
    )
}

fn tracking_sanity() -> Outcome {
    let data = moving_squares(30);
    let run = |rate_bps| run_closed_loop(&RunConfig { rate_bps, ..RunConfig::default() }, &data).unwrap().mota.unwrap().mota;
    let (hi, lo) = (run(GENEROUS_BPS), run(GENEROUS_BPS / 10.0));
    outcome(
        hi >= TRACKING_MOTA_MIN && lo < hi,
        format!("MOTA {hi:.4} at {GENEROUS_BPS:e} bps (need >= {TRACKING_MOTA_MIN}), {lo:.4} at a tenth of it"),
    )
}

fn joint_vs_prefixed() -> Outcome {
    let data = moving_squares(30);
    let cfg = RunConfig::default();
    let pre = sweep(&cfg, &data, SweepMode::Prefixed, &RATES_BPS).unwrap();
    let joint = sweep(&cfg, &data, SweepMode::Joint, &RATES_BPS).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for j in &joint {
        let rows: Vec<_> = pre.iter().filter(|r| r.rate_bps == j.rate_bps).collect();
        let best = rows.iter().max_by(|a, b| a.mota.unwrap().total_cmp(&b.mota.unwrap())).unwrap();
        let (jm, bm) = (j.mota.unwrap(), best.mota.unwrap());
        let calls: usize = rows.iter().map(|r| r.optimizer_invocations).sum();
        let ok = jm >= JOINT_SHARE_MIN * bm && calls == INVOCATION_RATIO * j.optimizer_invocations;
        pass &= ok;
        parts.push(format!(
            "{:e} bps joint {jm:.3} vs best prefixed {bm:.3} at {:.1} ({:.0}%), invocations {} vs {calls}",
            j.rate_bps,
            best.intensity_fraction.unwrap(),
            100.0 * jm / bm,
            j.optimizer_invocations
        ));
    }
    outcome(pass, parts.join("; "))
}

fn event_substeps() -> Outcome {
    let data = Dataset::from_synthetic(&generate_synthetic_sequence(&preset("fast-crossing", 0).unwrap()).unwrap(), 4).unwrap();
    let run = |rate_bps, event_tracking| {
        let cfg = RunConfig { rate_bps, event_tracking, ..RunConfig::default() };
        run_closed_loop(&cfg, &data).unwrap().mota.unwrap().mota
    };
    let (with, without) = (run(GENEROUS_BPS, true), run(GENEROUS_BPS, false));
    let default_rate = RunConfig::default().rate_bps;
    let (with_d, without_d) = (run(default_rate, true), run(default_rate, false));
    outcome(
        with > without,
        format!(
            "MOTA {with:.4} with event tracking vs {without:.4} intensity-only at {GENEROUS_BPS:e} bps \
             (info: {with_d:.4} vs {without_d:.4} at {default_rate:e} bps)"
        ),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("tree search equals exhaustive enumeration", dp_optimality),
        ("rate control and R/D monotonicity", rate_control),
        ("codec and reconstruction bit-exactness", codec_bit_exactness),
        ("Poisson-disk spacing", poisson_disk),
        ("event distortion and MOTA fidelity", distortion_and_mota),
        ("closed-loop tracking sanity", tracking_sanity),
        ("joint vs prefixed allocation", joint_vs_prefixed),
        ("event sub-step benefit", event_substeps),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let o = check();
        failed += !o.pass as usize;
        println!("{} {}. {name}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail, t0.elapsed().as_secs_f64());
    }
    println!("{}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var_os("QTEV_STRICT_ACCEPTANCE").is_some() {
        std::process::exit(1);
    }
}
