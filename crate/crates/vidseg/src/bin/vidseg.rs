//! Command-line surface over the library: dataset evaluation,
//! conversion, synthesis, tracking, and leaderboard rendering.
//!
//! Exit codes: 0 success, 2 usage or input-set mismatch, 3 validation,
//! 4 i/o.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use vidseg::data::io::{self, DatasetRoot};
use vidseg::data::video::pan_to_sem;
use vidseg::error::{Error, Result};
use vidseg::eval::{evaluate_vps, evaluate_vss, VcAggregation, VpsOptions, VssOptions};
use vidseg::metrics::semantic::VcMode;
use vidseg::pipeline::{frame_queries_from_file, run_tracking, AssociationConfig};
use vidseg::report::{render_report, LeaderboardFixture, ReportFormat};
use vidseg::synth::{self, CorruptionSpec, SceneConfig};

#[derive(Parser)]
#[command(
    name = "vidseg",
    version,
    about = "Evaluation toolkit for video panoptic and semantic segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate video panoptic segmentation: VPQ per window, VPQ, STQ.
    #[command(name = "evaluate-vps")]
    EvaluateVps {
        /// Ground-truth dataset root.
        #[arg(long)]
        gt: PathBuf,
        /// Prediction dataset root.
        #[arg(long)]
        pred: PathBuf,
        /// VPQ window lengths.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6")]
        windows: Vec<usize>,
        /// Average per-video scores instead of pooling stats per class.
        #[arg(long)]
        per_video: bool,
        /// Exclude stuff tracks from association quality.
        #[arg(long)]
        things_only_aq: bool,
        /// Worker threads (0 = machine default).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Report file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate video semantic segmentation: mIoU, weighted IoU, VC.
    #[command(name = "evaluate-vss")]
    EvaluateVss {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Consistency window lengths.
        #[arg(long, value_delimiter = ',', default_value = "8,16")]
        vc: Vec<usize>,
        /// strict: prediction must match ground truth across the window;
        /// self: prediction only has to stay constant.
        #[arg(long, default_value = "strict", value_parser = ["strict", "self"])]
        vc_mode: String,
        /// per-video: mean of per-video window means; pooled: pooled
        /// pixel tallies over all windows.
        #[arg(long, default_value = "per-video", value_parser = ["per-video", "pooled"])]
        vc_agg: String,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Format conversions.
    Convert {
        #[command(subcommand)]
        what: ConvertCommand,
    },
    /// Render a synthetic dataset root from a scene config.
    Synth {
        /// Scene config: a single scene object or {"videos": [{"id", "scene"}]}.
        #[arg(long)]
        config: PathBuf,
        /// Seed mixed into every scene's own seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Corruption spec applied to the rendered videos.
        #[arg(long)]
        corrupt: Option<PathBuf>,
    },
    /// Re-track a dataset root from per-segment embeddings.
    Track {
        /// Input dataset root; input track ids are ignored.
        #[arg(long)]
        data: PathBuf,
        /// Queries sidecar override; requires a single-video root. By
        /// default each video reads videos/<id>/queries.json.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        clip_len: usize,
        #[arg(long, default_value_t = 21)]
        window: usize,
        /// Minimum cosine similarity for keeping a track id.
        #[arg(long, default_value_t = 0.3)]
        threshold: f64,
        /// Frames a track may stay unseen before expiring.
        #[arg(long, default_value_t = 5)]
        patience: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a leaderboard fixture, re-checking stored VPQ aggregates.
    Report {
        /// CSV fixture with a header row of metric names.
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long, default_value = "markdown", value_parser = ["markdown", "csv"])]
        format: String,
    },
}

#[derive(Subcommand)]
enum ConvertCommand {
    /// Merge panoptic instances into per-class semantic masks.
    Pan2sem {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli.command) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::EvaluateVps {
            gt,
            pred,
            windows,
            per_video,
            things_only_aq,
            workers,
            out,
        } => {
            let options = VpsOptions {
                windows,
                per_video_aggregation: per_video,
                include_stuff_in_aq: !things_only_aq,
                workers,
            };
            let report = evaluate_vps(&gt, &pred, &options)?;
            report.write_to(&out)?;
            let vpq = report.aggregate.vpq_percent.as_ref().expect("vps report");
            let stq = report.aggregate.stq.expect("vps report");
            eprintln!(
                "VPQ {:.2}  STQ {:.4}  ({} videos, {:.3}s)",
                vpq.vpq,
                stq.stq,
                report.per_video.len(),
                report.wall_time_secs
            );
            Ok(())
        }
        Command::EvaluateVss {
            gt,
            pred,
            vc,
            vc_mode,
            vc_agg,
            workers,
            out,
        } => {
            let options = VssOptions {
                vc,
                vc_mode: if vc_mode == "self" {
                    VcMode::SelfConsistent
                } else {
                    VcMode::Strict
                },
                vc_aggregation: if vc_agg == "pooled" {
                    VcAggregation::Pooled
                } else {
                    VcAggregation::PerVideoMean
                },
                workers,
            };
            let report = evaluate_vss(&gt, &pred, &options)?;
            report.write_to(&out)?;
            eprintln!(
                "mIoU {:.4}  wIoU {:.4}  ({} videos, {:.3}s)",
                report.aggregate.miou.expect("vss report"),
                report.aggregate.weighted_iou.expect("vss report"),
                report.per_video.len(),
                report.wall_time_secs
            );
            Ok(())
        }
        Command::Convert {
            what: ConvertCommand::Pan2sem { input, out },
        } => convert_pan2sem(&input, &out),
        Command::Synth {
            config,
            seed,
            out,
            corrupt,
        } => synth_dataset(&config, seed, &out, corrupt.as_deref()),
        Command::Track {
            data,
            queries,
            clip_len,
            window,
            threshold,
            patience,
            out,
        } => track_dataset(
            &data,
            queries.as_deref(),
            AssociationConfig {
                clip_len,
                window_len: window,
                similarity_threshold: threshold,
                patience,
            },
            &out,
        ),
        Command::Report { fixture, format } => {
            let fixture = LeaderboardFixture::load(&fixture)?;
            let format = if format == "csv" {
                ReportFormat::Csv
            } else {
                ReportFormat::Markdown
            };
            let rendered = render_report(&fixture, format)?;
            print!("{}", rendered.text);
            if rendered.flagged.is_empty() {
                eprintln!("aggregates consistent for all {} rows", fixture.rows.len());
            } else {
                eprintln!("flagged rows: {}", rendered.flagged.join(", "));
            }
            Ok(())
        }
    }
}

fn convert_pan2sem(input: &Path, out: &Path) -> Result<()> {
    let in_root = DatasetRoot::new(input);
    let out_root = DatasetRoot::new(out);
    let categories = in_root.load_categories()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::save_category_table(&categories, &out_root.categories_path())?;
    if in_root.manifest_path().is_file() {
        let manifest = in_root.load_manifest()?;
        io::save_manifest(&manifest, &out_root.manifest_path())?;
    }
    for video_id in in_root.video_ids()? {
        let dir = in_root.video_dir(&video_id);
        let semantic = if io::is_panoptic_video_dir(&dir) {
            let video = io::load_video(&dir, &categories)?;
            pan_to_sem(&video, &categories)?
        } else {
            io::load_semantic_video(&dir, &categories)?
        };
        io::write_semantic_video(&semantic, &out_root.video_dir(&video_id))?;
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct SynthVideoEntry {
    id: String,
    scene: SceneConfig,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum SynthConfigFile {
    Dataset { videos: Vec<SynthVideoEntry> },
    Single(SceneConfig),
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum CorruptConfigFile {
    PerVideo { videos: BTreeMap<String, CorruptionSpec> },
    All(CorruptionSpec),
}

fn synth_dataset(config_path: &Path, seed: u64, out: &Path, corrupt: Option<&Path>) -> Result<()> {
    let text =
        std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let parsed: SynthConfigFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(config_path, e))?;
    let videos: Vec<SynthVideoEntry> = match parsed {
        SynthConfigFile::Dataset { videos } => videos,
        SynthConfigFile::Single(scene) => vec![SynthVideoEntry {
            id: "v000000".into(),
            scene,
        }],
    };
    if videos.is_empty() {
        return Err(Error::Usage("scene config lists no videos".into()));
    }

    let specs: BTreeMap<String, CorruptionSpec> = match corrupt {
        None => BTreeMap::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let parsed: CorruptConfigFile =
                serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
            match parsed {
                CorruptConfigFile::PerVideo { videos: specs } => specs,
                CorruptConfigFile::All(spec) => videos
                    .iter()
                    .map(|entry| (entry.id.clone(), spec.clone()))
                    .collect(),
            }
        }
    };

    let entries: Vec<(String, SceneConfig, CorruptionSpec)> = videos
        .into_iter()
        .enumerate()
        .map(|(index, entry)| {
            let mut scene = entry.scene;
            scene.seed = synth::mix_seed(scene.seed, seed ^ index as u64);
            let spec = specs.get(&entry.id).cloned().unwrap_or_default();
            (entry.id, scene, spec)
        })
        .collect();
    synth::write_dataset_root(out, &entries)?;
    eprintln!("wrote {} videos to {}", entries.len(), out.display());
    Ok(())
}

fn track_dataset(
    data: &Path,
    queries_override: Option<&Path>,
    config: AssociationConfig,
    out: &Path,
) -> Result<()> {
    let in_root = DatasetRoot::new(data);
    let out_root = DatasetRoot::new(out);
    let categories = in_root.load_categories()?;
    let video_ids = in_root.video_ids()?;
    if queries_override.is_some() && video_ids.len() != 1 {
        return Err(Error::Usage(format!(
            "--queries overrides the sidecar and needs a single-video root, found {} videos",
            video_ids.len()
        )));
    }

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::save_category_table(&categories, &out_root.categories_path())?;
    if in_root.manifest_path().is_file() {
        let manifest = in_root.load_manifest()?;
        io::save_manifest(&manifest, &out_root.manifest_path())?;
    }

    for video_id in &video_ids {
        let video = io::load_video(&in_root.video_dir(video_id), &categories)?;
        let queries_path = match queries_override {
            Some(path) => path.to_path_buf(),
            None => in_root.queries_path(video_id),
        };
        let queries_file = io::load_queries(&queries_path)?;
        let queries = frame_queries_from_file(&video, &queries_file)?;
        let tracked = run_tracking(&video, &queries, &config)?;
        tracked.validate(&categories)?;
        io::write_video(&tracked, &out_root.video_dir(video_id))?;
    }
    eprintln!("tracked {} videos into {}", video_ids.len(), out.display());
    Ok(())
}
