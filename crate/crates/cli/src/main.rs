use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qtev_core::host::write_mot_csv;
use qtev_core::imaging::{generate_synthetic_sequence, SceneConfig};
use qtev_core::metrics::{write_frame_csv, FrameDetail};
use qtev_core::runner::{preset, run_closed_loop, sweep, write_sweep_csv, Dataset, RunConfig, SweepMode, PRESETS};

#[derive(Parser, Debug)]
#[command(name = "qtev", version, about = "Closed-loop joint intensity/event quadtree coding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the chip/host loop over one sequence and write logs.
    Run {
        #[command(flatten)]
        input: Input,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep channel rates under joint or prefixed allocation.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Comma-separated rates in bits per second.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic sequence as PGM frames, events and ground truth.
    Synth {
        #[arg(long, default_value = "moving-squares")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Input {
    /// TOML run configuration; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of 8-bit PGM frames, read in name order.
    #[arg(long, conflicts_with = "preset")]
    frames: Option<PathBuf>,
    /// Event file with one `x y t p` line per event (t in microseconds).
    #[arg(long, requires = "frames")]
    events: Option<PathBuf>,
    /// Ground-truth CSV `frame,id,x,y,w,h,class`.
    #[arg(long, requires = "frames")]
    gt: Option<PathBuf>,
    /// Log-intensity step per synthesized event when no event file is given.
    #[arg(long, default_value_t = SceneConfig::default().contrast_threshold)]
    contrast_threshold: f64,
    /// Built-in synthetic scene, used when no frames are given.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Prefixed,
    Joint,
}

impl From<Mode> for SweepMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Prefixed => SweepMode::Prefixed,
            Mode::Joint => SweepMode::Joint,
        }
    }
}

impl Input {
    fn load(&self) -> Result<(RunConfig, Dataset)> {
        let cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => RunConfig::default(),
        };
        let data = match (&self.frames, &self.preset) {
            (Some(dir), _) => Dataset::load(dir, self.events.as_deref(), self.gt.as_deref(), cfg.frame_rate, cfg.n_bins, self.contrast_threshold)
                .with_context(|| format!("loading frames from {}", dir.display()))?,
            (None, name) => synthetic(name.as_deref().unwrap_or("moving-squares"), self.seed, cfg.n_bins)?,
        };
        Ok((cfg, data))
    }
}

fn synthetic(name: &str, seed: u64, n_bins: usize) -> Result<Dataset> {
    let scene = preset(name, seed)?;
    let seq = generate_synthetic_sequence(&scene)?;
    Ok(Dataset::from_synthetic(&seq, n_bins)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(input: &Input, out: &Path) -> Result<()> {
    let (cfg, data) = input.load()?;
    let log = run_closed_loop(&cfg, &data)?;
    std::fs::create_dir_all(out)?;

    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    log.summary.write_json(create(&out.join("summary.json"))?)?;
    serde_json::to_writer_pretty(create(&out.join("log.json"))?, &log)?;

    let details: Vec<FrameDetail> = log
        .frames
        .iter()
        .map(|f| {
            let c = f.counts.unwrap_or_default();
            FrameDetail {
                frame: f.frame,
                intensity_bits: f.intensity_bits,
                event_bits: f.event_bits,
                misses: c.misses,
                false_positives: c.false_positives,
                mismatches: c.mismatches,
                ground_truth: c.ground_truth,
                psnr_db: f.psnr_db,
            }
        })
        .collect();
    write_frame_csv(create(&out.join("frames.csv"))?, &details)?;

    let rows: Vec<_> = log.frames.iter().flat_map(|f| f.reported.iter().map(move |b| (f.frame, *b))).collect();
    write_mot_csv(create(&out.join("tracks.csv"))?, &rows)?;

    let mut packets = create(&out.join("packets.evp"))?;
    for p in &log.packets {
        packets.write_all(&p.to_bytes())?;
    }
    packets.flush()?;

    if log.frames.iter().any(|f| !f.recon_match) {
        bail!("chip and host reconstructions diverged");
    }
    let s = &log.summary;
    let mota = s.mota.map_or("n/a".to_owned(), |m| format!("{m:.4}"));
    println!(
        "{} frames, {:.0} bps ({:.1}% intensity), MOTA {mota}, logs in {}",
        log.frames.len(),
        s.bitrate_bps,
        100.0 * s.intensity_fraction,
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { input, out } => run(&input, &out),
        Command::Sweep { input, mode, rates, out } => {
            let (cfg, data) = input.load()?;
            let rows = sweep(&cfg, &data, mode.into(), &rates)?;
            match out {
                Some(p) => write_sweep_csv(create(&p)?, &rows)?,
                None => write_sweep_csv(std::io::stdout().lock(), &rows)?,
            }
            Ok(())
        }
        Command::Synth { preset: name, seed, out } => {
            if !PRESETS.contains(&name.as_str()) {
                bail!("unknown preset `{name}`; expected one of {PRESETS:?}");
            }
            synthetic(&name, seed, RunConfig::default().n_bins)?.save(&out)?;
            println!("wrote preset `{name}` to {}", out.display());
            Ok(())
        }
    }
}
