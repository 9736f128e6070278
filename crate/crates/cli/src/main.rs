//! Batch experiment runner: reproduces the library's reference curves and
//! tables as CSV files with JSON run reports.

mod config;
mod experiments;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_config, resolve_out, SeedSource, DEFAULT_SEED};

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing configuration; exit code 2.
    Config(String),
    /// Filesystem trouble; exit code 3.
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "harq-models",
    version,
    about = "Experiment runner for HARQ decoding-error models",
    after_help = "Each subcommand accepts --config FILE (JSON); flags override file keys.\n\
                  Outputs: one CSV plus a `.report.json` sidecar. Identical config and seed\n\
                  give byte-identical outputs. HARQ_MODELS_OUT_DIR sets the default output\n\
                  directory for relative paths."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every experiment.
#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master RNG seed (default 0xC0FFEE when absent here and in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Joint vs single pairwise error probability over an SNR-growth sweep.
    PepSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Rounds.
        #[arg(long)]
        k: Option<usize>,
        /// Codeword-pair Euclidean distance.
        #[arg(long)]
        d: Option<f64>,
        /// First-round SNR in dB.
        #[arg(long)]
        snr1_db: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Sweep points (geometric in t).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Link-level joint error measurement against the IE/DE predictions.
    LinkSim {
        #[command(flatten)]
        common: CommonArgs,
        /// Monte Carlo trials per sweep point.
        #[arg(long)]
        trials: Option<u64>,
        /// Message length in bits.
        #[arg(long)]
        nb: Option<usize>,
        /// SNRs of all rounds but the last, in dB (comma separated).
        #[arg(long, value_delimiter = ',')]
        first_rounds_db: Option<Vec<f64>>,
        /// Final accumulated SNR sweep, in dB.
        #[arg(long)]
        acc_db_min: Option<f64>,
        #[arg(long)]
        acc_db_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Rayleigh block-fading averages: exact vs DE closed form vs IE.
    FadingAvg {
        #[command(flatten)]
        common: CommonArgs,
        /// Round indices to average, comma separated.
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<u32>>,
        #[arg(long)]
        avg_snr_db_min: Option<f64>,
        #[arg(long)]
        avg_snr_db_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Outer fading draws per point.
        #[arg(long)]
        channel_trials: Option<u64>,
        /// Link-simulator trials per fading draw.
        #[arg(long)]
        link_trials: Option<u64>,
        /// PER model threshold in dB (with --per-g; otherwise fitted).
        #[arg(long)]
        per_th_db: Option<f64>,
        /// PER model decay slope per unit linear SNR.
        #[arg(long)]
        per_g: Option<f64>,
    },
    /// Expected HARQ round count: closed form and its series cross-check.
    AvgRounds {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        per_th_db: Option<f64>,
        #[arg(long)]
        per_g: Option<f64>,
        #[arg(long)]
        avg_snr_db_min: Option<f64>,
        #[arg(long)]
        avg_snr_db_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Fit the threshold-exponential PER model to measurements.
    FitPer {
        #[command(flatten)]
        common: CommonArgs,
        /// Measurement CSV with header `snr_db,per`; when absent the curve
        /// is simulated.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        nb: Option<usize>,
        #[arg(long)]
        snr_db_min: Option<f64>,
        #[arg(long)]
        snr_db_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Trials per simulated curve point.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Sample HARQ outcome streams from the IE or DE model.
    Sysgen {
        #[command(flatten)]
        common: CommonArgs,
        /// `ie` or `de`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        per_th_db: Option<f64>,
        #[arg(long)]
        per_g: Option<f64>,
        /// Table CSV (`snr_db,per`) overriding the threshold model.
        #[arg(long)]
        per_table: Option<PathBuf>,
        /// Per-round SNRs in dB, comma separated.
        #[arg(long, value_delimiter = ',')]
        sched_db: Option<Vec<f64>>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Number of outcomes to emit.
        #[arg(long)]
        count: Option<u64>,
    },
}

/// Seed precedence: flag, then config file, then the documented default.
fn effective_seed(flag: Option<u64>, file: Option<u64>) -> (u64, SeedSource) {
    match (flag, file) {
        (Some(s), _) => (s, SeedSource::Flag),
        (None, Some(s)) => (s, SeedSource::Config),
        (None, None) => (DEFAULT_SEED, SeedSource::Default),
    }
}

/// Seed key shared by every experiment's config file.
#[derive(serde::Deserialize, Default)]
struct SeedOnly {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    macro_rules! prepare {
        ($common:expr, $cfg_ty:ty, $default_out:expr) => {{
            let file_cfg: $cfg_ty = load_config($common.config.as_deref())?;
            let seed_cfg: SeedOnly = match $common.config.as_deref() {
                // Seed/out live beside the experiment keys; tolerate both.
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| {
                        CliError::Io(format!("cannot read config {}: {e}", p.display()))
                    })?;
                    serde_json::from_str::<serde_json::Value>(&text)
                        .ok()
                        .map(|v| SeedOnly {
                            seed: v.get("seed").and_then(|s| s.as_u64()),
                            out: v.get("out").and_then(|s| s.as_str()).map(PathBuf::from),
                        })
                        .unwrap_or_default()
                }
                None => SeedOnly::default(),
            };
            let (seed, source) = effective_seed($common.seed, seed_cfg.seed);
            let out = resolve_out($common.out.clone().or(seed_cfg.out), $default_out);
            (file_cfg, seed, source, out)
        }};
    }

    match cli.command {
        Command::PepSweep {
            common,
            k,
            d,
            snr1_db,
            t_min,
            t_max,
            points,
        } => {
            let (mut cfg, seed, source, out) =
                prepare!(common, experiments::PepSweepConfig, "pep-sweep.csv");
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(v) = d {
                cfg.d = v;
            }
            if let Some(v) = snr1_db {
                cfg.snr1_db = v;
            }
            if let Some(v) = t_min {
                cfg.t_min = v;
            }
            if let Some(v) = t_max {
                cfg.t_max = v;
            }
            if let Some(v) = points {
                cfg.points = v;
            }
            experiments::run_pep_sweep(cfg, seed, source, &out)
        }
        Command::LinkSim {
            common,
            trials,
            nb,
            first_rounds_db,
            acc_db_min,
            acc_db_max,
            points,
        } => {
            let (mut cfg, seed, source, out) =
                prepare!(common, experiments::LinkSimConfig, "link-sim.csv");
            if let Some(v) = trials {
                cfg.trials = v;
            }
            if let Some(v) = nb {
                cfg.code.nb = v;
            }
            if let Some(v) = first_rounds_db {
                cfg.first_rounds_db = v;
            }
            if let Some(v) = acc_db_min {
                cfg.acc_db_min = v;
            }
            if let Some(v) = acc_db_max {
                cfg.acc_db_max = v;
            }
            if let Some(v) = points {
                cfg.points = v;
            }
            experiments::run_link_sim(cfg, seed, source, &out)
        }
        Command::FadingAvg {
            common,
            k_list,
            avg_snr_db_min,
            avg_snr_db_max,
            points,
            channel_trials,
            link_trials,
            per_th_db,
            per_g,
        } => {
            let (mut cfg, seed, source, out) =
                prepare!(common, experiments::FadingAvgConfig, "fading-avg.csv");
            if let Some(v) = k_list {
                cfg.k_list = v;
            }
            if let Some(v) = avg_snr_db_min {
                cfg.avg_snr_db_min = v;
            }
            if let Some(v) = avg_snr_db_max {
                cfg.avg_snr_db_max = v;
            }
            if let Some(v) = points {
                cfg.points = v;
            }
            if let Some(v) = channel_trials {
                cfg.channel_trials = v;
            }
            if let Some(v) = link_trials {
                cfg.link_trials = v;
            }
            if let Some(v) = per_th_db {
                cfg.per_th_db = Some(v);
            }
            if let Some(v) = per_g {
                cfg.per_g = Some(v);
            }
            experiments::run_fading_avg(cfg, seed, source, &out)
        }
        Command::AvgRounds {
            common,
            per_th_db,
            per_g,
            avg_snr_db_min,
            avg_snr_db_max,
            points,
        } => {
            let (mut cfg, seed, source, out) =
                prepare!(common, experiments::AvgRoundsConfig, "avg-rounds.csv");
            if let Some(v) = per_th_db {
                cfg.per_th_db = v;
            }
            if let Some(v) = per_g {
                cfg.per_g = v;
            }
            if let Some(v) = avg_snr_db_min {
                cfg.avg_snr_db_min = v;
            }
            if let Some(v) = avg_snr_db_max {
                cfg.avg_snr_db_max = v;
            }
            if let Some(v) = points {
                cfg.points = v;
            }
            experiments::run_avg_rounds(cfg, seed, source, &out)
        }
        Command::FitPer {
            common,
            input,
            nb,
            snr_db_min,
            snr_db_max,
            points,
            trials,
        } => {
            let (mut cfg, seed, source, out) =
                prepare!(common, experiments::FitPerConfig, "fit-per.csv");
            if let Some(v) = input {
                cfg.input = Some(v.display().to_string());
            }
            if let Some(v) = nb {
                cfg.code.nb = v;
            }
            if let Some(v) = snr_db_min {
                cfg.snr_db_min = v;
            }
            if let Some(v) = snr_db_max {
                cfg.snr_db_max = v;
            }
            if let Some(v) = points {
                cfg.points = v;
            }
            if let Some(v) = trials {
                cfg.trials = v;
            }
            experiments::run_fit_per(cfg, seed, source, &out)
        }
        Command::Sysgen {
            common,
            model,
            per_th_db,
            per_g,
            per_table,
            sched_db,
            k_max,
            count,
        } => {
            let (mut cfg, seed, source, out) =
                prepare!(common, experiments::SysgenConfig, "sysgen.csv");
            if let Some(v) = model {
                cfg.model = v;
            }
            if let Some(v) = per_th_db {
                cfg.per_th_db = v;
            }
            if let Some(v) = per_g {
                cfg.per_g = Some(v);
            }
            if let Some(v) = per_table {
                cfg.per_table = Some(v.display().to_string());
            }
            if let Some(v) = sched_db {
                cfg.sched_db = v;
            }
            if let Some(v) = k_max {
                cfg.k_max = Some(v);
            }
            if let Some(v) = count {
                cfg.count = v;
            }
            experiments::run_sysgen(cfg, seed, source, &out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("harq-models: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Io(_) => ExitCode::from(3),
            }
        }
    }
}
