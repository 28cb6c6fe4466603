mod commands;
mod config;
mod error;
mod rundir;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use depthvo_core::nearfar::SigmaPolicy;

use crate::commands::map::{pass_rate_path, MapParams};
use crate::commands::{demo, eval, losses_gradcheck, map, sim, vo};
use crate::config::{RunConfig, SCHEMA};
use crate::error::{CliError, Result};

/// Monocular VO with learned-depth outlier filtering: simulate, track, map, evaluate.
///
/// Exit codes: 0 success, 1 I/O failure, 2 config or validation failure, 3 tracking lost.
#[derive(Parser)]
#[command(name = "depthvo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic sequences.
    Sim {
        #[command(subcommand)]
        action: SimAction,
    },
    /// Visual odometry.
    Vo {
        #[command(subcommand)]
        action: VoAction,
    },
    /// Dense mapping from keyframe depth maps.
    Map {
        #[command(subcommand)]
        action: MapAction,
    },
    /// Metrics.
    Eval {
        #[command(subcommand)]
        action: EvalAction,
    },
    /// Depth-network training losses.
    Losses {
        #[command(subcommand)]
        action: LossesAction,
    },
    /// Run configuration helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// sim -> vo (filter off and on) -> eval -> map, then print a summary table.
    Demo {
        /// Run config; defaults to the built-in demo config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimAction {
    /// Render a sequence directory: depth (PFM + mask), intensity (PGM), manifest, ground truth.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum VoAction {
    /// Track a sequence; writes the TUM trajectory, removal log, keyframe depths and summary.json.
    Run {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, value_enum)]
        filter: OnOff,
        /// Rank-displacement threshold: a number or "adaptive".
        #[arg(long, value_parser = parse_sigma)]
        sigma: Option<SigmaPolicy>,
        /// Run config; defaults to the config stored with the sequence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum MapAction {
    /// Consistency-check consecutive keyframes and fuse passing pixels into a PLY cloud.
    /// The per-keyframe pass rates go to `<stem>_pass_rate.csv` beside the cloud.
    Build {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        gamma: f64,
        /// Voxel edge for downsampling; 0 keeps every point.
        #[arg(long, default_value_t = 0.0)]
        voxel: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalAction {
    /// Absolute trajectory error between two TUM files.
    Ate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Skip the Sim3 alignment.
        #[arg(long)]
        no_align: bool,
        /// Metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Top-down x-z plot of both trajectories.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Depth metrics, either for a run's keyframes (--run, --seq) or one pair of maps (--pred, --gt).
    Depth {
        #[arg(long, requires = "seq", conflicts_with_all = ["pred", "gt"])]
        run: Option<PathBuf>,
        #[arg(long)]
        seq: Option<PathBuf>,
        /// Depth file stem (reads `<stem>.pfm` and an optional `<stem>_mask.pgm`).
        #[arg(long, requires = "gt")]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Evaluate without median scale recovery.
        #[arg(long)]
        no_scale_recover: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision, recall and false-removal rate of a run's removals.
    Filter {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LossesAction {
    /// Finite-difference check of the analytic loss gradients; exits 2 if any error >= 1e-4.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        probes: usize,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the default run config.
    Default,
    /// Print the JSON schema of the run config.
    Schema,
    /// Validate a run config.
    Check { file: PathBuf },
}

fn parse_sigma(s: &str) -> std::result::Result<SigmaPolicy, String> {
    if s == "adaptive" {
        return Ok(SigmaPolicy::Adaptive);
    }
    s.parse::<usize>().map(SigmaPolicy::Fixed).map_err(|_| format!("expected a non-negative integer or \"adaptive\", got {s:?}"))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn out_dir(cli: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    cli.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sim { action: SimAction::Generate { config, out } } => {
            let cfg = load_config(config.as_deref())?;
            let out = out_dir(out, &cfg)?;
            println!("{}", sim::generate(&cfg, &out)?.display());
        }
        Command::Vo { action: VoAction::Run { seq, filter, sigma, config, out } } => {
            let mut cfg = vo::resolve_config(&seq, config.as_deref())?;
            cfg.vo.filter.enabled = matches!(filter, OnOff::On);
            if let Some(s) = sigma {
                cfg.vo.filter.sigma = s;
            }
            let result = vo::run(&seq, &cfg, &out);
            let summary = std::fs::read_to_string(out.join(rundir::SUMMARY)).unwrap_or_default();
            print!("{summary}");
            result?;
        }
        Command::Map { action: MapAction::Build { run, delta, gamma, voxel, out } } => {
            let (cloud, rows) = map::build(&run, MapParams { delta, gamma, voxel }, &out)?;
            println!("kf_id passed/pixels");
            for r in &rows {
                println!("{:<5} {}/{}", r.kf_id, r.passed, r.pixels);
            }
            println!("{} points -> {} ({})", cloud.len(), out.display(), pass_rate_path(&out).display());
        }
        Command::Eval { action } => match action {
            EvalAction::Ate { est, gt, no_align, out, svg } => {
                let (value, table) = eval::ate(&est, &gt, !no_align, svg.as_deref())?;
                print!("{table}");
                let row = depthvo_core::metrics::MetricsRow { run: eval::run_name(&est), ate_rmse: Some(value), ..Default::default() };
                eval::write_csv(out.as_deref(), &[row])?;
            }
            EvalAction::Depth { run, seq, pred, gt, no_scale_recover, out } => {
                let rows = match (run, seq, pred, gt) {
                    (Some(run), Some(seq), None, None) => eval::depth_run(&run, &seq, !no_scale_recover)?,
                    (None, _, Some(pred), Some(gt)) => eval::depth_pair(&pred, &gt, !no_scale_recover)?,
                    _ => return Err(CliError::Config("pass either --run and --seq, or --pred and --gt".into())),
                };
                print!("{}", eval::depth_table(&rows));
                eval::write_csv(out.as_deref(), &eval::depth_rows(&rows))?;
            }
            EvalAction::Filter { run, out } => {
                let row = eval::filter(&run)?;
                print!("{}", eval::filter_table(&row));
                eval::write_csv(out.as_deref(), &[row])?;
            }
        },
        Command::Losses { action: LossesAction::Gradcheck { seed, probes } } => {
            let (_, table) = losses_gradcheck(seed, probes)?;
            print!("{table}");
        }
        Command::Config { action } => match action {
            ConfigAction::Default => print!("{}", RunConfig::default().to_json()),
            ConfigAction::Schema => print!("{SCHEMA}"),
            ConfigAction::Check { file } => {
                RunConfig::load(&file)?;
                println!("{}: ok", file.display());
            }
        },
        Command::Demo { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let out = out_dir(out, &cfg)?;
            print!("{}", demo::run(&cfg, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
