//! `gfk` - gaze-fusion kit CLI.
//!
//! Orchestrates the screening-study pipeline: simulate a study, estimate
//! lung masks, build attention volumes, evaluate annotators and the CADe,
//! combine / fuse mark sets, run analytics and statistics, and bundle an
//! HTML report. Set `GFK_LOG=debug` (or `info`, `warn`) for log output.

mod commands;
mod config;
mod report;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gfk_core::evaluation::MatchParams;
use gfk_core::fusion::FusionMode;
use gfk_core::simulate::SimConfig;
use gfk_core::volume::{DEFAULT_CLOSING_RADIUS_MM, DEFAULT_HU_THRESHOLD};
use gfk_core::Error;

use config::{pick, FileConfig};
use study::Study;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "gfk", version, about = "Gaze-fusion kit for CT screening studies")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for scan-level parallelism (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Flip the left/right lung convention (anatomical right on high x).
    #[arg(long, global = true)]
    flip_lr: bool,

    /// Match marks within the nodule radius instead of its diameter.
    #[arg(long, global = true)]
    match_radius: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic screening study directory.
    Simulate {
        /// Output study directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of scans.
        #[arg(long)]
        scans: Option<usize>,
        /// Number of annotators.
        #[arg(long)]
        annotators: Option<usize>,
        /// Eye-tracker frequency in Hz.
        #[arg(long)]
        f: Option<f64>,
    },
    /// Estimate lung masks for every scan.
    Mask {
        #[arg(long)]
        study: PathBuf,
        /// Air threshold in Hounsfield units.
        #[arg(long, allow_hyphen_values = true)]
        hu_threshold: Option<f64>,
        /// Physical radius of the morphological closing, in mm.
        #[arg(long)]
        closing_mm: Option<f64>,
    },
    /// Build attention volumes from the recorded sessions.
    Attention {
        #[arg(long)]
        study: PathBuf,
        /// Restrict to one annotator.
        #[arg(long)]
        annotator: Option<String>,
    },
    /// Score annotators (and the automatic system) against ground truth.
    Eval {
        #[arg(long)]
        study: PathBuf,
        /// Restrict to one annotator.
        #[arg(long)]
        annotator: Option<String>,
    },
    /// Union two annotators' mark sets and evaluate the result.
    Combine {
        #[arg(long)]
        study: PathBuf,
        /// Two comma-separated annotator names.
        #[arg(long)]
        annotators: String,
    },
    /// Fold CADe candidates into an annotator's marks.
    Fuse {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        annotator: String,
        /// `all` or `low-attention`.
        #[arg(long)]
        fusion_mode: Option<String>,
        /// Normalized attention time below which candidates are added.
        #[arg(long)]
        attention_threshold: Option<f64>,
        /// Calibrate the candidate score threshold to this FP/scan budget.
        #[arg(long)]
        fp_target: Option<f64>,
    },
    /// Search-strategy curve, reading times and agreement tables.
    Analytics {
        #[arg(long)]
        study: PathBuf,
    },
    /// McNemar between annotator pairs and reading-time ANOVA.
    Stats {
        #[arg(long)]
        study: PathBuf,
    },
    /// Bundle existing artifacts into an HTML report (never recomputes).
    Report {
        #[arg(long)]
        study: PathBuf,
    },
}

fn parse_fusion_mode(s: &str) -> Result<FusionMode, Error> {
    match s {
        "all" => Ok(FusionMode::All),
        "low-attention" | "low_attention" => Ok(FusionMode::LowAttention),
        other => Err(Error::Parameter(format!(
            "unknown fusion mode `{other}` (expected `all` or `low-attention`)"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    let jobs = pick(cli.jobs, file_cfg.jobs, 0);
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let params = MatchParams { use_radius: pick(Some(cli.match_radius).filter(|&m| m), file_cfg.match_radius, false) };

    match cli.command {
        Command::Simulate { out, seed, scans, annotators, f } => {
            let defaults = SimConfig::default();
            let cfg = SimConfig {
                seed: pick(seed, file_cfg.seed, defaults.seed),
                n_scans: pick(scans, file_cfg.scans, defaults.n_scans),
                n_annotators: pick(annotators, file_cfg.annotators, defaults.n_annotators),
                f: pick(f, file_cfg.f, defaults.f),
                ..defaults
            };
            commands::cmd_simulate(&out, &cfg)
        }
        Command::Mask { study, hu_threshold, closing_mm } => {
            let study = Study::open(&study)?;
            commands::cmd_mask(
                &study,
                pick(hu_threshold, file_cfg.hu_threshold, DEFAULT_HU_THRESHOLD),
                pick(closing_mm, file_cfg.closing_mm, DEFAULT_CLOSING_RADIUS_MM),
            )
        }
        Command::Attention { study, annotator } => {
            let study = Study::open(&study)?;
            commands::cmd_attention(&study, &annotator)
        }
        Command::Eval { study, annotator } => {
            let study = Study::open(&study)?;
            commands::cmd_eval(&study, &annotator, params)
        }
        Command::Combine { study, annotators } => {
            let study = Study::open(&study)?;
            commands::cmd_combine(&study, &annotators, params)
        }
        Command::Fuse { study, annotator, fusion_mode, attention_threshold, fp_target } => {
            let study = Study::open(&study)?;
            let mode_str = fusion_mode
                .or(file_cfg.fusion_mode.clone())
                .unwrap_or_else(|| "all".to_string());
            commands::cmd_fuse(
                &study,
                &annotator,
                parse_fusion_mode(&mode_str)?,
                pick(attention_threshold, file_cfg.attention_threshold, 0.10),
                fp_target.or(file_cfg.fp_target),
                params,
            )
        }
        Command::Analytics { study } => {
            let study = Study::open(&study)?;
            let flip = pick(Some(cli.flip_lr).filter(|&v| v), file_cfg.flip_lr, false);
            commands::cmd_analytics(&study, params, flip)
        }
        Command::Stats { study } => {
            let study = Study::open(&study)?;
            commands::cmd_stats(&study, params)
        }
        Command::Report { study } => {
            let study = Study::open(&study)?;
            commands::cmd_report(&study)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GFK_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(EXIT_IO),
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
    }
}
