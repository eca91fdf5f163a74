use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use actioncrop::error::Error;
use actioncrop::evalharness::{self, SyntheticSpec, Trajectory};
use actioncrop::pipeline::{self, FileConfig, PipelineConfig};
use actioncrop::retarget::{RetargetParams, Resample};
use actioncrop::temporal::TrackKind;
use actioncrop::videoio::{self, SequenceFormat};

#[derive(Parser)]
#[command(name = "actioncrop", version, about = "Subject-centered square video retargeting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pyramid_levels: Option<u32>,
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    open_radius: Option<u32>,
    #[arg(long)]
    close_radius: Option<u32>,
    #[arg(long)]
    a_min_fraction: Option<f64>,
    #[arg(long)]
    pivot_budget: Option<usize>,
    #[arg(long)]
    pivot_fraction: Option<f64>,
    #[arg(long)]
    out_size: Option<u32>,
    /// bilinear | nearest
    #[arg(long)]
    resample: Option<Resample>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let file: FileConfig = toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
            file.apply(&mut cfg).map_err(CliError::Usage)?;
        }
        if let Some(v) = self.pyramid_levels {
            cfg.flow.pyramid_levels = v;
        }
        if let Some(v) = self.window_size {
            cfg.flow.window_size = v;
        }
        if let Some(v) = self.iterations {
            cfg.flow.iterations = v;
        }
        if let Some(v) = self.clusters {
            cfg.clusters = v;
        }
        if let Some(v) = self.open_radius {
            cfg.open_radius = v;
        }
        if let Some(v) = self.close_radius {
            cfg.close_radius = v;
        }
        if let Some(v) = self.a_min_fraction {
            cfg.a_min_fraction = v;
        }
        if let Some(v) = self.pivot_budget {
            cfg.pivot_budget = Some(v);
        }
        if let Some(v) = self.pivot_fraction {
            cfg.pivot_fraction = v;
        }
        if let Some(v) = self.out_size {
            cfg.out_size = v;
        }
        if let Some(v) = self.resample {
            cfg.resample = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        eprintln!("resolved config: {cfg:?}");
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: ingest, localize, smooth, crop, write
    Crop {
        /// Input directory (image sequence or raw + manifest)
        input: PathBuf,
        /// Output directory
        output: PathBuf,
        /// png | ppm | raw
        #[arg(long, default_value = "png")]
        format: SequenceFormat,
        /// Use a precomputed smoothed track sidecar instead of localizing
        #[arg(long)]
        track: Option<PathBuf>,
        /// Write track_raw.json and track_smoothed.json next to the output
        #[arg(long)]
        dump_tracks: bool,
        /// Dump per-frame debug artifacts under this directory
        #[arg(long)]
        debug_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Emit the raw per-frame localization track only
    Localize {
        input: PathBuf,
        /// Output track JSON path
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Smooth a raw track sidecar (track JSON in, track JSON out)
    Smooth {
        input: PathBuf,
        output: PathBuf,
        /// Frame width the track belongs to (for clamping)
        #[arg(long)]
        frame_width: u32,
        /// Frame height the track belongs to (for clamping)
        #[arg(long)]
        frame_height: u32,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic video with a ground-truth track
    Synth {
        output: PathBuf,
        #[arg(long, default_value = "128")]
        width: u32,
        #[arg(long, default_value = "128")]
        height: u32,
        #[arg(long, default_value = "64")]
        frames: usize,
        #[arg(long, default_value = "40")]
        subject_size: u32,
        #[arg(long, default_value = "1.0")]
        vx: f64,
        #[arg(long, default_value = "0.0")]
        vy: f64,
        /// linear | sinusoidal | random-walk
        #[arg(long, default_value = "linear")]
        trajectory: Trajectory,
        #[arg(long)]
        drifting_background: bool,
        #[arg(long, default_value = "0.0")]
        noise_sigma: f64,
        #[arg(long, default_value = "0.0")]
        jitter_frames: f64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long, default_value = "png")]
        format: SequenceFormat,
    },
    /// Run the pipeline on synthetic videos and report metrics as JSON
    Eval {
        /// Seeds to sweep, e.g. 0,1,2
        #[arg(long, default_value = "0", value_delimiter = ',')]
        seeds: Vec<u64>,
        /// linear | sinusoidal | random-walk (repeatable via commas)
        #[arg(long, default_value = "linear", value_delimiter = ',')]
        trajectories: Vec<Trajectory>,
        #[arg(long, default_value = "64")]
        frames: usize,
        #[arg(long, default_value = "0.0")]
        jitter_frames: f64,
        /// Optional CSV output across the sweep
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

enum CliError {
    Usage(String),
    Data(Error),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Crop { input, output, format, track, dump_tracks, debug_dir, config } => {
            let cfg = config.resolve()?;
            let seq = videoio::read_sequence(&input, None)?;
            if let Some(dir) = &debug_dir {
                pipeline::dump_debug_artifacts(&seq, &cfg, dir)?;
            }
            if let Some(track_path) = track {
                let smoothed = videoio::read_track_sidecar(&track_path, TrackKind::Smoothed)?;
                let params = RetargetParams { out_size: cfg.out_size, resample: cfg.resample };
                let out = actioncrop::retarget::retarget_video(&seq, &smoothed, &params)?;
                videoio::write_sequence(&out, &output, format)?;
            } else {
                let result = pipeline::run_pipeline(&seq, &cfg)?;
                videoio::write_sequence(&result.output, &output, format)?;
                if dump_tracks {
                    videoio::write_track_sidecar(&result.raw_track, &output.join("track_raw.json"))?;
                    videoio::write_track_sidecar(
                        &result.smoothed_track,
                        &output.join("track_smoothed.json"),
                    )?;
                }
                let r = &result.report;
                eprintln!(
                    "frames: {}, pivots: {:?}, low-confidence frames: {:?}",
                    r.frame_count, r.pivots, r.low_confidence_frames
                );
                eprintln!(
                    "timings (ms): flow {}, segment+localize {}, temporal {}, retarget {}",
                    r.timings.flow_ms,
                    r.timings.segment_localize_ms,
                    r.timings.temporal_ms,
                    r.timings.retarget_ms
                );
            }
            Ok(())
        }
        Command::Localize { input, output, config } => {
            let cfg = config.resolve()?;
            let seq = videoio::read_sequence(&input, None)?;
            let (track, low_confidence, _) = pipeline::localize_video(&seq, &cfg);
            videoio::write_track_sidecar(&track, &output)?;
            if !low_confidence.is_empty() {
                eprintln!("low-confidence frames: {low_confidence:?}");
            }
            Ok(())
        }
        Command::Smooth { input, output, frame_width, frame_height, config } => {
            let cfg = config.resolve()?;
            let raw = videoio::read_track_sidecar(&input, TrackKind::Raw)?;
            let (smoothed, pivots) =
                pipeline::smooth_raw_track(&raw, &cfg, frame_width, frame_height)?;
            videoio::write_track_sidecar(&smoothed, &output)?;
            eprintln!("pivots: {pivots:?}");
            Ok(())
        }
        Command::Synth {
            output,
            width,
            height,
            frames,
            subject_size,
            vx,
            vy,
            trajectory,
            drifting_background,
            noise_sigma,
            jitter_frames,
            seed,
            format,
        } => {
            let spec = SyntheticSpec {
                frame_w: width,
                frame_h: height,
                frames,
                subject_size,
                velocity: (vx, vy),
                trajectory,
                drifting_background,
                noise_sigma,
                jitter_frames,
                seed,
            };
            let (seq, gt) = evalharness::generate_synthetic(&spec)?;
            videoio::write_sequence(&seq, &output, format)?;
            videoio::write_track_sidecar(&gt, &output.join("track_gt.json"))?;
            Ok(())
        }
        Command::Eval { seeds, trajectories, frames, jitter_frames, csv, config } => {
            let cfg = config.resolve()?;
            let mut rows = Vec::new();
            for &seed in &seeds {
                for &trajectory in &trajectories {
                    let spec = SyntheticSpec {
                        frames,
                        trajectory,
                        jitter_frames,
                        seed,
                        ..Default::default()
                    };
                    let metrics = pipeline::run_synthetic_eval(&spec, &cfg)?;
                    rows.push((seed, trajectory, metrics));
                }
            }
            let json: Vec<serde_json::Value> = rows
                .iter()
                .map(|(seed, traj, m)| {
                    serde_json::json!({
                        "seed": seed,
                        "trajectory": format!("{traj:?}"),
                        "metrics": m,
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&json)
                    .map_err(|e| CliError::Internal(e.to_string()))?
            );
            if let Some(path) = csv {
                let mut text = String::from(
                    "seed,trajectory,mean_iou_gt,center_rmse,jitter_raw,jitter_smoothed,containment\n",
                );
                for (seed, traj, m) in &rows {
                    text.push_str(&format!(
                        "{seed},{traj:?},{},{},{},{},{}\n",
                        m.mean_iou_gt, m.center_rmse, m.jitter_raw, m.jitter_smoothed, m.containment
                    ));
                }
                std::fs::write(&path, text)
                    .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
            }
            Ok(())
        }
    }
}
