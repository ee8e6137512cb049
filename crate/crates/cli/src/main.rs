//! `lshape` — scenario simulation, pipeline execution and evaluation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lshape_core::config::PipelineConfig;
use lshape_core::eval;
use lshape_core::io;
use lshape_core::pipeline::{FrameOutput, Pipeline};
use lshape_core::sim::{self, GroundTruth, GtFrame, ScenarioSpec};
use lshape_core::Result;

#[derive(Parser)]
#[command(
    name = "lshape",
    about = "Vehicle segmentation, L-shape fitting and tracking from multi-layer 2D LIDAR scans",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrackMode {
    /// Three-model Kalman bank fused by multiple-model association.
    Mma,
    /// Single constant-velocity filter (comparison baseline).
    SingleCv,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file into scan and ground-truth JSONL streams.
    Simulate {
        /// Scenario spec (flat key-value file).
        #[arg(long)]
        scenario: PathBuf,
        /// Output scan JSONL path.
        #[arg(long)]
        out: PathBuf,
        /// Output ground-truth JSONL path.
        #[arg(long)]
        gt_out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run segmentation, fitting, association and tracking over scans.
    Track {
        /// Scan JSONL path.
        #[arg(long)]
        scans: PathBuf,
        /// Pipeline config (flat key-value file); defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output per-frame results JSONL path.
        #[arg(long)]
        out: PathBuf,
        /// Override the tracker mode from the config file.
        #[arg(long, value_enum)]
        mode: Option<TrackMode>,
    },
    /// Produce metric tables (CSV) and plot-data series from results.
    Evaluate {
        /// Results JSONL path.
        #[arg(long)]
        results: PathBuf,
        /// Optional second results file (e.g. the single-model baseline).
        #[arg(long)]
        results_b: Option<PathBuf>,
        /// Ground-truth JSONL path.
        #[arg(long)]
        gt: PathBuf,
        /// Output directory for CSV tables and plot data.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// simulate + track (both tracker modes) + evaluate in one run.
    RunAll {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print the default pipeline configuration.
    DefaultConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_kv_text(&std::fs::read_to_string(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    ScenarioSpec::from_kv_text(&std::fs::read_to_string(path)?)
}

fn read_gt(path: &Path) -> Result<GroundTruth> {
    Ok(GroundTruth {
        frames: io::read_jsonl::<GtFrame>(path)?,
    })
}

fn track_scans(
    scans: &[lshape_core::Scan],
    mut cfg: PipelineConfig,
    mode: Option<TrackMode>,
) -> Vec<FrameOutput> {
    if let Some(mode) = mode {
        cfg.track.single_model = matches!(mode, TrackMode::SingleCv);
    }
    let mut pipeline = Pipeline::new(cfg);
    scans.iter().map(|s| pipeline.process_frame(s)).collect()
}

fn evaluate_into(
    out_dir: &Path,
    gt: &GroundTruth,
    result_sets: &[Vec<FrameOutput>],
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let primary = &result_sets[0];

    let stats = eval::heading_error_stats(primary, gt)?;
    std::fs::write(
        out_dir.join("heading_stats.csv"),
        eval::heading_stats_csv(&stats),
    )?;
    let errors = eval::heading_errors_by_method(primary, gt)?;
    std::fs::write(
        out_dir.join("heading_distribution.csv"),
        eval::heading_distribution_csv(&errors),
    )?;

    let mut trajectory_rows = Vec::new();
    let mut id_rows = Vec::new();
    for results in result_sets {
        let mode = results
            .first()
            .map(|f| f.mode.clone())
            .unwrap_or_else(|| "mma".to_string());
        for (state, stats) in eval::trajectory_error_stats(results, gt)? {
            trajectory_rows.push((mode.clone(), state, stats));
        }
        id_rows.push((mode.clone(), eval::id_consistency(results, gt)));
        let series = eval::trajectory_plot_points(results, gt)?;
        io::write_jsonl(&out_dir.join(format!("trajectory_series_{mode}.jsonl")), &series)?;
    }
    std::fs::write(
        out_dir.join("trajectory_error.csv"),
        eval::trajectory_csv(&trajectory_rows),
    )?;
    std::fs::write(
        out_dir.join("id_consistency.csv"),
        eval::id_consistency_csv(&id_rows),
    )?;
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            scenario,
            out,
            gt_out,
            seed,
        } => {
            let spec = load_scenario(&scenario)?;
            let (scans, gt) = sim::simulate(&spec, seed)?;
            io::write_scans(&out, &scans)?;
            io::write_jsonl(&gt_out, &gt.frames)?;
            Ok(())
        }
        Command::Track {
            scans,
            config,
            out,
            mode,
        } => {
            let scans = io::read_scans(&scans)?;
            let cfg = load_config(&config)?;
            let results = track_scans(&scans, cfg, mode);
            io::write_jsonl(&out, &results)?;
            Ok(())
        }
        Command::Evaluate {
            results,
            results_b,
            gt,
            out_dir,
        } => {
            let gt = read_gt(&gt)?;
            let mut sets = vec![io::read_jsonl::<FrameOutput>(&results)?];
            if let Some(b) = results_b {
                sets.push(io::read_jsonl::<FrameOutput>(&b)?);
            }
            evaluate_into(&out_dir, &gt, &sets)
        }
        Command::RunAll {
            scenario,
            config,
            out_dir,
            seed,
        } => {
            let spec = load_scenario(&scenario)?;
            let cfg = load_config(&config)?;
            std::fs::create_dir_all(&out_dir)?;
            let (scans, gt) = sim::simulate(&spec, seed)?;
            io::write_scans(&out_dir.join("scans.jsonl"), &scans)?;
            io::write_jsonl(&out_dir.join("gt.jsonl"), &gt.frames)?;

            let mma = track_scans(&scans, cfg.clone(), Some(TrackMode::Mma));
            io::write_jsonl(&out_dir.join("results_mma.jsonl"), &mma)?;
            let single = track_scans(&scans, cfg, Some(TrackMode::SingleCv));
            io::write_jsonl(&out_dir.join("results_single_cv.jsonl"), &single)?;

            evaluate_into(&out_dir, &gt, &[mma, single])
        }
        Command::DefaultConfig => {
            print!("{}", PipelineConfig::default().to_kv_string());
            Ok(())
        }
    }
}
