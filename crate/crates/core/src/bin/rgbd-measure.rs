//! Measures objects in a frame bundle directory and writes a JSON report.
//!
//! Exit codes: 0 success, 1 bundle or pipeline failure, 2 bad flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rgbd_measure::bundle::load_bundle;
use rgbd_measure::densify::DensifyConfig;
use rgbd_measure::measure::validate_percentiles;
use rgbd_measure::pipeline::{
    render_overlay, run_pipeline, PipelineConfig, DEFAULT_EDGE_THRESHOLD,
};

#[derive(Parser)]
#[command(
    name = "rgbd-measure",
    version,
    about = "Object dimensions from an RGB frame and a sparse depth cloud"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the measurement pipeline on one bundle.
    Measure(MeasureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Interp {
    Nn,
    Bilinear,
}

#[derive(clap::Args)]
struct MeasureArgs {
    /// Bundle directory.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value = "bilinear")]
    interp: Interp,
    /// Depth discontinuity gate in meters, or `off`.
    #[arg(long, value_parser = parse_edge_thresh)]
    edge_thresh: Option<EdgeThresh>,
    /// Extent percentiles as `LO,HI`.
    #[arg(long, value_parser = parse_percentiles, default_value = "0.01,0.99")]
    percentiles: (f64, f64),
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overlay PPM path.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Also time the linear-scan densifier and report the speedup.
    #[arg(long)]
    bench: bool,
}

#[derive(Clone, Copy)]
enum EdgeThresh {
    Off,
    Meters(f64),
}

fn parse_edge_thresh(s: &str) -> Result<EdgeThresh, String> {
    if s.eq_ignore_ascii_case("off") {
        return Ok(EdgeThresh::Off);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(EdgeThresh::Meters(v)),
        _ => Err(format!(
            "expected a positive number of meters or `off`, got `{s}`"
        )),
    }
}

fn parse_percentiles(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad low percentile `{lo}`"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad high percentile `{hi}`"))?;
    validate_percentiles((lo, hi)).map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

fn config(args: &MeasureArgs) -> PipelineConfig {
    let base = match args.interp {
        Interp::Nn => DensifyConfig::nearest(),
        Interp::Bilinear => DensifyConfig::bilinear().with_edge_threshold(DEFAULT_EDGE_THRESHOLD),
    };
    let densify = match args.edge_thresh {
        None => base,
        Some(EdgeThresh::Off) => DensifyConfig {
            edge_threshold: None,
            ..base
        },
        Some(EdgeThresh::Meters(m)) => base.with_edge_threshold(m),
    };
    PipelineConfig {
        densify,
        percentiles: args.percentiles,
        bench: args.bench,
        ..PipelineConfig::default()
    }
}

fn run(args: &MeasureArgs) -> Result<(), String> {
    let bundle =
        load_bundle(&args.bundle).map_err(|e| format!("bundle {}: {e}", args.bundle.display()))?;
    if bundle.dropped_cloud_rows > 0 {
        eprintln!(
            "warning: dropped {} cloud rows with non-positive depth",
            bundle.dropped_cloud_rows
        );
    }
    let out = run_pipeline(&bundle, &config(args)).map_err(|e| format!("pipeline: {e}"))?;
    for err in &out.report.errors {
        eprintln!(
            "warning: object {} ({}): {}",
            err.index, err.label, err.message
        );
    }
    if let Some(bench) = &out.report.bench {
        eprintln!(
            "bench: {} px, tree {:.1} ms, linear {:.1} ms, speedup {:.1}x",
            bench.pixels, bench.tree_ms, bench.linear_ms, bench.speedup
        );
    }
    let json = out.report.to_json();
    match &args.out {
        Some(path) => {
            std::fs::write(path, json).map_err(|e| format!("writing {}: {e}", path.display()))?
        }
        None => print!("{json}"),
    }
    if let Some(path) = &args.overlay {
        let overlay = render_overlay(&bundle.rgb, &out.objects);
        std::fs::write(path, overlay.encode())
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Measure(args) = cli.command;
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
