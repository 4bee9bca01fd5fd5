//! `humeval`: calibrate, score, correlate and rank generated human videos
//! from pre-extracted feature files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use humeval_core::anatomical::BodyPart;
use humeval_core::config::CONFIG_ENV;
use humeval_core::features::{
    parse_ratings, write_keypoint_stream, write_motion_tracks, MetricName,
};
use humeval_core::harness::{
    categories_csv, category_breakdown, category_plot_json, correlate, correlations_csv,
    leaderboard, leaderboard_csv, leaderboard_table, CorrelateOptions,
};
use humeval_core::pipeline::{
    calibrate_dir, parse_reports, score_dir, write_corpus, write_reports,
};
use humeval_core::synth::{self, CorpusConfig, Degrade, SmoothParams};
use humeval_core::{CalibrationSet, EngineConfig, Error, Result};

#[derive(Parser)]
#[command(
    name = "humeval",
    version,
    about = "Quality scoring for human-centric generated video"
)]
struct Cli {
    #[command(flatten)]
    engine: EngineArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EngineArgs {
    /// TOML config file; flags below override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Part visibility threshold.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Gaussian sigma in frames for jerk smoothing.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Scale of the local stability map, rad/s³.
    #[arg(long, global = true)]
    lambda_local: Option<f64>,
    /// Scale of the global stability map (orientation deviation).
    #[arg(long, global = true)]
    lambda_global: Option<f64>,
    /// Worker threads for per-video scoring (default: CPU count).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Calibrate on the p-th and (100-p)-th percentiles instead of extrema.
    #[arg(long, global = true)]
    percentile: Option<f64>,
}

impl EngineArgs {
    fn resolve(&self) -> Result<EngineConfig> {
        let mut cfg = match &self.config {
            Some(path) => EngineConfig::load(path)?,
            None => EngineConfig::default(),
        };
        if let Some(v) = self.tau {
            cfg.anat.tau = v;
        }
        if let Some(v) = self.sigma {
            cfg.kin.gaussian_sigma_frames = v;
        }
        if let Some(v) = self.lambda_local {
            cfg.kin.phi_lambda_local = v;
        }
        if let Some(v) = self.lambda_global {
            cfg.kin.phi_lambda_global = v;
        }
        if self.percentile.is_some() {
            cfg.percentile = self.percentile;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit raw-score bounds on a corpus of real-footage feature files.
    Calibrate {
        corpus_dir: PathBuf,
        #[arg(long, default_value = "calibration.json")]
        out: PathBuf,
        /// Label stored with the bounds (default: directory name).
        #[arg(long)]
        corpus_id: Option<String>,
    },
    /// Score every video in a features directory.
    Score {
        features_dir: PathBuf,
        #[arg(long, default_value = "calibration.json")]
        calibration: PathBuf,
        #[arg(long, default_value = "reports.ndjson")]
        out: PathBuf,
    },
    /// Spearman correlation between scores and human ratings.
    Correlate {
        #[arg(long, default_value = "reports.ndjson")]
        reports: PathBuf,
        #[arg(long, default_value = "ratings.csv")]
        ratings: PathBuf,
        #[arg(long, default_value = "correlations.csv")]
        out: PathBuf,
        /// Add rows for the prior and each branch alone.
        #[arg(long)]
        ablation: bool,
        /// Skip rated videos that have no report.
        #[arg(long)]
        allow_missing: bool,
        /// Extension: also compute correlations within each model.
        #[arg(long)]
        per_model: bool,
    },
    /// Per-model means, plus per-category tables when categories are known.
    Leaderboard {
        #[arg(long, default_value = "reports.ndjson")]
        reports: PathBuf,
        /// Ratings file supplying model ids and categories.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Synthetic feature files with controlled artifacts.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Smooth,
    Jitter,
    Flip,
    Kps,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// One motion track or keypoint stream.
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value_t = 22)]
        joints: usize,
        /// Jitter amplitude in radians.
        #[arg(long, default_value_t = 0.05)]
        amplitude: f64,
        /// First flipped frame (default: mid-sequence).
        #[arg(long)]
        flip_frame: Option<usize>,
        #[arg(long, default_value_t = 180.0)]
        angle: f64,
        /// Flip axis as x,y,z.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 1.0])]
        axis: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        persons: usize,
        #[arg(long, default_value_t = 0.9)]
        confidence: f64,
        /// Degrade one part, e.g. `left_hand=0.1`.
        #[arg(long)]
        degrade: Option<String>,
        #[arg(long)]
        video_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-model benchmark corpus, including manifest and ratings files.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        videos_per_model: usize,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        /// Single-model corpus with independently varied artifact levels.
        #[arg(long)]
        ablation: bool,
    },
    /// Stand-in real-footage corpus for calibration.
    Calibration {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        videos: usize,
        #[arg(long, default_value_t = 60)]
        frames: usize,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.engine.resolve()?;
    let jobs = cli.engine.jobs;
    match cli.command {
        Command::Calibrate {
            corpus_dir,
            out,
            corpus_id,
        } => {
            let id = corpus_id.unwrap_or_else(|| {
                corpus_dir
                    .canonicalize()
                    .ok()
                    .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                    .unwrap_or_else(|| "corpus".into())
            });
            let cal = calibrate_dir(&corpus_dir, &cfg, &id, jobs)?;
            write(&out, &cal.to_json())?;
            for m in MetricName::ALL {
                let b = cal.get(m);
                println!(
                    "{m}: n={} min={} max={}",
                    b.sample_count, b.min_real, b.max_real
                );
            }
        }
        Command::Score {
            features_dir,
            calibration,
            out,
        } => {
            let cal = CalibrationSet::load(&calibration)?;
            let reports = score_dir(&features_dir, &cfg, &cal, jobs)?;
            write(&out, &write_reports(&reports))?;
            println!("scored {} videos", reports.len());
        }
        Command::Correlate {
            reports,
            ratings,
            out,
            ablation,
            allow_missing,
            per_model,
        } => {
            let reports = parse_reports(&read(&reports)?)?;
            let ratings = parse_ratings(&read(&ratings)?)?;
            let opts = CorrelateOptions {
                ablation,
                allow_missing,
                per_model,
                pairs: Vec::new(),
            };
            let result = correlate(&reports, &ratings, &opts)?;
            let csv = correlations_csv(&result.results);
            write(&out, &csv)?;
            print!("{csv}");
            if !result.missing.is_empty() {
                eprintln!(
                    "skipped {} rated videos without a report",
                    result.missing.len()
                );
            }
            for (metric, dim, scope) in &result.undefined {
                eprintln!(
                    "undefined correlation: {metric} vs {dim} ({})",
                    scope.as_deref().unwrap_or("pooled")
                );
            }
        }
        Command::Leaderboard {
            reports,
            ratings,
            out_dir,
        } => {
            let reports = parse_reports(&read(&reports)?)?;
            let ratings = match ratings {
                Some(p) => parse_ratings(&read(&p)?)?,
                None => Vec::new(),
            };
            let rows = leaderboard(&reports, &ratings);
            write(&out_dir.join("leaderboard.csv"), &leaderboard_csv(&rows))?;
            print!("{}", leaderboard_table(&rows));
            if !ratings.is_empty() || reports.iter().all(|r| r.category.is_some()) {
                let cats = category_breakdown(&reports, &ratings)?;
                write(&out_dir.join("categories.csv"), &categories_csv(&cats))?;
                write(&out_dir.join("plotdata.json"), &category_plot_json(&cats))?;
            }
        }
        Command::Synth(cmd) => run_synth(cmd)?,
    }
    Ok(())
}

fn parse_degrade(arg: &str) -> Result<Degrade> {
    let (part, conf) = arg
        .split_once('=')
        .ok_or_else(|| Error::Input(format!("expected part=confidence, got \"{arg}\"")))?;
    let part: BodyPart = part.trim().parse()?;
    let confidence = conf
        .trim()
        .parse()
        .map_err(|_| Error::Input(format!("bad confidence \"{conf}\"")))?;
    Ok(Degrade { part, confidence })
}

fn run_synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Gen {
            kind,
            seed,
            frames,
            fps,
            joints,
            amplitude,
            flip_frame,
            angle,
            axis,
            persons,
            confidence,
            degrade,
            video_id,
            out,
        } => {
            let text = if let Kind::Kps = kind {
                let degrade = degrade.as_deref().map(parse_degrade).transpose()?;
                let mut stream =
                    synth::gen_keypoint_stream(seed, frames, persons, confidence, degrade)?;
                stream.fps = fps;
                if let Some(id) = video_id {
                    stream.video_id = id;
                }
                write_keypoint_stream(&stream)
            } else {
                let mut track =
                    synth::gen_smooth_track(seed, frames, fps, joints, &SmoothParams::default())?;
                match kind {
                    Kind::Jitter => {
                        track = synth::inject_jitter(&track, amplitude, synth::derive_seed(seed, 1))
                    }
                    Kind::Flip => {
                        let k = flip_frame.unwrap_or(frames / 2);
                        let axis = flip_axis(&axis)?;
                        track = synth::inject_flip(&track, k, angle, axis);
                    }
                    _ => {}
                }
                if let Some(id) = video_id {
                    track.video_id = id;
                }
                write_motion_tracks(&[track])
            };
            write(&out, &text)?;
        }
        SynthCommand::Corpus {
            out,
            seed,
            videos_per_model,
            frames,
            ablation,
        } => {
            let cfg = CorpusConfig {
                frames,
                ..CorpusConfig::default()
            };
            let videos = if ablation {
                synth::ablation_corpus(seed, videos_per_model, &cfg)?
            } else {
                synth::benchmark_corpus(seed, &synth::default_profiles(), videos_per_model, &cfg)?
            };
            write_corpus(&out, &videos, true)?;
            println!("wrote {} videos", videos.len());
        }
        SynthCommand::Calibration {
            out,
            seed,
            videos,
            frames,
        } => {
            let cfg = CorpusConfig {
                frames,
                ..CorpusConfig::default()
            };
            let videos = synth::calibration_corpus(seed, videos, &cfg)?;
            write_corpus(&out, &videos, false)?;
            println!("wrote {} videos", videos.len());
        }
    }
    Ok(())
}

fn flip_axis(v: &[f64]) -> Result<synth::Axis> {
    match v {
        [x, y, z] if (x * x + y * y + z * z) > 0.0 => Ok(synth::Axis::new(*x, *y, *z)),
        _ => Err(Error::Input(
            "flip axis must be a non-zero x,y,z triple".into(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let summary = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{summary}");
            ExitCode::FAILURE
        }
    }
}
