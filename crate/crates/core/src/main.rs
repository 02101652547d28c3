use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use physbench::calib::{calibrate_intrinsics, estimate_pose};
use physbench::camera::{CameraIntrinsics, CornerSet};
use physbench::pipeline::{self, emit_table, LoadedConfig, Mode, Report, RunError, RunOptions, TableStyle};

#[derive(Parser)]
#[command(name = "physbench", version, about = "Recover physical parameters from object tracks and score predicted videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BatchArgs {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit 1 when any video fails or any check does not hold.
    #[arg(long)]
    strict: bool,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic bundles for every configured experiment.
    Simulate(BatchArgs),
    /// Estimate parameters from recorded bundles.
    Estimate(BatchArgs),
    /// Score predicted videos against ground truth.
    Metrics(BatchArgs),
    /// Simulate, estimate and compare against the generating parameters.
    Validate(BatchArgs),
    /// Calibrate intrinsics from checkerboard views.
    Calibrate {
        /// JSON array of corner sets.
        #[arg(long)]
        views: PathBuf,
        /// Image size as WIDTHxHEIGHT.
        #[arg(long, value_parser = parse_size)]
        image_size: (u32, u32),
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Board pose from one corner set and known intrinsics.
    Pose {
        #[arg(long)]
        corners: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the config JSON schema.
    Schema,
    /// Print one table of an existing report as CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        style: TableStyle,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    Ok((w.parse().map_err(|e| format!("{e}"))?, h.parse().map_err(|e| format!("{e}"))?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => RunError::InputMissing(path.display().to_string()),
        _ => RunError::Failed(format!("{}: {e}", path.display())),
    })?;
    serde_json::from_str(&text).map_err(|e| RunError::ConfigInvalid(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), RunError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| RunError::Failed(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn batch(mode: Mode, a: BatchArgs) -> Result<bool, RunError> {
    let loaded = LoadedConfig::load(&a.config)?;
    let default_seed = match std::env::var("PHYSBENCH_SEED") {
        Ok(v) => Some(v.trim().parse().map_err(|_| RunError::ConfigInvalid(format!("PHYSBENCH_SEED={v:?} is not a u64")))?),
        Err(_) => None,
    };
    let opts = RunOptions { out: a.out, strict: a.strict, seed: a.seed, default_seed, jobs: a.jobs };
    let (report, ok) = pipeline::run(&loaded, mode, &opts)?;
    summarize(&report, &opts.out);
    Ok(ok)
}

fn summarize(report: &Report, out: &Path) {
    let failed_checks = report.checks.iter().filter(|c| !c.passed).count();
    let failed_videos = report.videos.iter().filter(|v| v.error.is_some()).count();
    eprintln!(
        "{}: {} videos ({} failed), {} parameter rows, {} metric rows, {} checks ({} failed) -> {}",
        report.mode,
        report.videos.len(),
        failed_videos,
        report.params.len(),
        report.metrics.len(),
        report.checks.len(),
        failed_checks,
        out.display()
    );
    for v in report.videos.iter().filter(|v| v.error.is_some()) {
        eprintln!("  {}: {}", v.source, v.error.as_deref().unwrap_or_default());
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("  FAIL {}: {}", c.name, c.detail);
    }
}

fn execute(cmd: Command) -> Result<bool, RunError> {
    match cmd {
        Command::Simulate(a) => batch(Mode::Simulate, a),
        Command::Estimate(a) => batch(Mode::Estimate, a),
        Command::Metrics(a) => batch(Mode::Metrics, a),
        Command::Validate(a) => batch(Mode::Validate, a),
        Command::Calibrate { views, image_size, out } => {
            let views: Vec<CornerSet> = read_json(&views)?;
            let board = views.first().ok_or_else(|| RunError::ConfigInvalid("no views".into()))?.board;
            let cal = calibrate_intrinsics(&views, &board, image_size).map_err(|e| RunError::Failed(e.to_string()))?;
            eprintln!("reprojection rms {:.4} px (initial {:.4} px)", cal.rms, cal.initial_rms);
            emit(&json(&cal.intrinsics), out.as_deref())?;
            Ok(true)
        }
        Command::Pose { corners, intrinsics, out } => {
            let corners: CornerSet = read_json(&corners)?;
            let intr: CameraIntrinsics = read_json(&intrinsics)?;
            let pose = estimate_pose(&corners, &corners.board, &intr).map_err(|e| RunError::Failed(e.to_string()))?;
            emit(&json(&pose), out.as_deref())?;
            Ok(true)
        }
        Command::Schema => {
            print!("{}", pipeline::config_schema());
            Ok(true)
        }
        Command::Report { input, style, out } => {
            let report: Report = read_json(&input)?;
            let text = emit_table(&report, style).map_err(|e| RunError::Failed(e.to_string()))?;
            emit(&text, out.as_deref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
