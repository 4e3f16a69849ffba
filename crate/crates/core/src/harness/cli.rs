//! `cbiou` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. `--config FILE` reads
//! `key=value` lines whose values take precedence over the matching flags.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data_io::{
    attach_features, format_detections, format_ground_truth, format_results, nms_merge, read_detections,
    read_embeddings, read_ground_truth, read_results, DEFAULT_NMS_IOU,
};
use crate::exec::Execution;
use crate::geometry::{BufferScale, Similarity};
use crate::harness::scene::{builtin, builtin_names, generate_scene, SceneSpec};
use crate::harness::{ablate, tune, GridSearchSpec, HarnessError, Objective, Sequence};
use crate::metrics::{evaluate, FrameAnnotations};
use crate::refine::{refine, DEFAULT_TAU};
use crate::tracker::{run_sequence, TrackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cbiou", version, about = "Cascaded buffered-IoU tracking toolkit")]
struct Cli {
    /// key=value file; its values override command-line flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run data-parallel stages on the calling thread
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Iou,
    Giou,
    Diou,
    Biou,
}

impl From<SimilarityArg> for Similarity {
    fn from(s: SimilarityArg) -> Self {
        match s {
            SimilarityArg::Iou => Similarity::Iou,
            SimilarityArg::Giou => Similarity::Giou,
            SimilarityArg::Diou => Similarity::Diou,
            SimilarityArg::Biou => Similarity::Buffered,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Hota,
    Idf1,
    Mota,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum ReportFormat {
    #[default]
    Text,
    Kv,
}

#[derive(Debug, Args, Default)]
struct TrackerArgs {
    /// Small buffer scale (first matching round)
    #[arg(long)]
    b1: Option<f64>,
    /// Large buffer scale (second matching round)
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    max_age: Option<u32>,
    #[arg(long)]
    min_hits: Option<u32>,
    /// Number of recent displacements averaged by the motion model (2..=5)
    #[arg(long)]
    motion_cap: Option<usize>,
    /// Pairs with similarity at or below this value are never matched
    #[arg(long)]
    match_floor: Option<f64>,
    #[arg(long, value_enum)]
    similarity: Option<SimilarityArg>,
    /// Single matching round at b2
    #[arg(long)]
    no_cascade: bool,
    /// Predict tracks as static
    #[arg(long)]
    no_motion: bool,
}

#[derive(Debug, Args)]
struct SequenceArgs {
    /// Built-in scene name or scene file (repeatable)
    #[arg(long)]
    scene: Vec<String>,
    /// DET,GT file pair (repeatable)
    #[arg(long, value_name = "DET,GT")]
    sequence: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track detections and write a result file
    Track {
        #[command(flatten)]
        tracker: TrackerArgs,
        detections: PathBuf,
        output: PathBuf,
    },
    /// Merge tracklets by appearance
    Refine {
        /// Clustering distance threshold
        #[arg(long)]
        tau: Option<f64>,
        results: PathBuf,
        embeddings: PathBuf,
        output: PathBuf,
    },
    /// Score a result file against ground truth
    Eval {
        results: PathBuf,
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: ReportFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid-search the buffer pair (b1 < b2)
    Tune {
        #[command(flatten)]
        sequences: SequenceArgs,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[command(flatten)]
        tracker: TrackerArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare association variants on one sequence
    Ablate {
        #[command(flatten)]
        sequences: SequenceArgs,
        #[command(flatten)]
        tracker: TrackerArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic scene
    Synth {
        /// Built-in scene name or scene file
        scene: String,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Merge two detection files with non-maximum suppression
    Nms {
        first: PathBuf,
        second: PathBuf,
        output: PathBuf,
        /// Suppress boxes whose IoU with a kept box exceeds this
        #[arg(long)]
        iou: Option<f64>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Geometry(_) | HarnessError::EmptyGrid => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Values from a `--config` file, keyed with `_` separators.
#[derive(Debug, Default)]
struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    const KEYS: &'static [&'static str] = &[
        "b1",
        "b2",
        "max_age",
        "min_hits",
        "motion_cap",
        "match_floor",
        "similarity",
        "cascade",
        "motion",
        "tau",
        "nms_iou",
        "objective",
    ];

    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !Self::KEYS.contains(&key.as_str()) {
                return Err(usage(format!("{}:{}: unknown key `{key}`", path.display(), i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| usage(format!("config: invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    fn get_enum<T: ValueEnum>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| T::from_str(v, true).map_err(|_| usage(format!("config: invalid value `{v}` for `{key}`"))))
            .transpose()
    }
}

fn tracker_config(args: &TrackerArgs, file: &ConfigFile) -> Result<TrackerConfig, CliError> {
    let defaults = TrackerConfig::default();
    let pick = |flag: Option<f64>, key: &str, default: f64| -> Result<f64, CliError> {
        Ok(file.get(key)?.or(flag).unwrap_or(default))
    };
    let b1 = pick(args.b1, "b1", defaults.b1.value())?;
    let b2 = pick(args.b2, "b2", defaults.b2.value())?;
    let config = TrackerConfig {
        b1: BufferScale::new(b1).map_err(usage)?,
        b2: BufferScale::new(b2).map_err(usage)?,
        motion_cap: file.get("motion_cap")?.or(args.motion_cap).unwrap_or(defaults.motion_cap),
        max_age: file.get("max_age")?.or(args.max_age).unwrap_or(defaults.max_age),
        min_hits: file.get("min_hits")?.or(args.min_hits).unwrap_or(defaults.min_hits),
        match_floor: pick(args.match_floor, "match_floor", defaults.match_floor)?,
        similarity: file
            .get_enum::<SimilarityArg>("similarity")?
            .or(args.similarity)
            .map_or(defaults.similarity, Similarity::from),
        cascade: file.get("cascade")?.unwrap_or(!args.no_cascade),
        motion: file.get("motion")?.unwrap_or(!args.no_motion),
    };
    config.validate().map_err(usage)?;
    Ok(config)
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_output(p, text),
        None => out.write_all(text.as_bytes()).map_err(data),
    }
}

fn load_scene(name: &str) -> Result<SceneSpec, CliError> {
    if builtin_names().any(|n| n == name) {
        return builtin(name).map_err(data);
    }
    let text = std::fs::read_to_string(name).map_err(|e| {
        data(format!(
            "{name}: {e} (built-in scenes: {})",
            builtin_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    SceneSpec::parse(&text).map_err(data)
}

fn load_sequences(args: &SequenceArgs) -> Result<Vec<Sequence>, CliError> {
    if args.scene.is_empty() && args.sequence.is_empty() {
        return Err(usage("give at least one --scene or --sequence"));
    }
    let mut out = Vec::new();
    for name in &args.scene {
        let spec = load_scene(name)?;
        out.push(Sequence::from(generate_scene(&spec).map_err(data)?));
    }
    for pair in &args.sequence {
        let (det, gt) = pair
            .split_once(',')
            .ok_or_else(|| usage(format!("--sequence expects DET,GT, got `{pair}`")))?;
        out.push(Sequence {
            name: det.to_string(),
            detections: read_detections(Path::new(det)).map_err(data)?,
            ground_truth: read_ground_truth(Path::new(gt)).map_err(data)?,
        });
    }
    Ok(out)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };

    match cli.command {
        Command::Track {
            tracker,
            detections,
            output,
        } => {
            let config = tracker_config(&tracker, &file)?;
            let dets = read_detections(&detections).map_err(data)?;
            let tracklets = run_sequence(&dets, &config).map_err(data)?;
            write_output(&output, &format_results(&tracklets))
        }
        Command::Refine {
            tau,
            results,
            embeddings,
            output,
        } => {
            let tau = file.get("tau")?.or(tau).unwrap_or(DEFAULT_TAU);
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(usage(format!("tau must be a non-negative number, got {tau}")));
            }
            let tracklets = read_results(&results).map_err(data)?;
            let emb = read_embeddings(&embeddings).map_err(data)?;
            let tracklets = attach_features(tracklets, &emb).map_err(data)?;
            let merged = refine(&tracklets, tau, exec).map_err(data)?;
            write_output(&output, &format_results(&merged))
        }
        Command::Eval {
            results,
            gt,
            format,
            output,
        } => {
            let pred = FrameAnnotations::from_tracklets(&read_results(&results).map_err(data)?).map_err(data)?;
            let gt_ann = read_ground_truth(&gt).map_err(data)?;
            if gt_ann.is_empty() {
                return Err(data(HarnessError::NoGroundTruth(gt.display().to_string())));
            }
            let report = evaluate(&gt_ann, &pred, exec);
            let text = match format {
                ReportFormat::Text => report.to_text(),
                ReportFormat::Kv => report.to_key_value(),
            };
            emit(out, output.as_deref(), &text)
        }
        Command::Tune {
            sequences,
            objective,
            tracker,
            output,
        } => {
            let config = tracker_config(&tracker, &file)?;
            let objective = match file.get_enum::<ObjectiveArg>("objective")?.or(objective) {
                Some(ObjectiveArg::Idf1) => Objective::Idf1,
                Some(ObjectiveArg::Mota) => Objective::Mota,
                _ => Objective::Hota,
            };
            let seqs = load_sequences(&sequences)?;
            let spec = GridSearchSpec {
                objective,
                ..GridSearchSpec::default()
            };
            let result = tune(&seqs, &spec, &config, exec)?;
            emit(out, output.as_deref(), &result.to_text())
        }
        Command::Ablate {
            sequences,
            tracker,
            output,
        } => {
            let config = tracker_config(&tracker, &file)?;
            let seqs = load_sequences(&sequences)?;
            let mut text = String::new();
            for seq in &seqs {
                let table = ablate(seq, &config, exec)?;
                if seqs.len() > 1 {
                    text.push_str(&format!("# {}\n", seq.name));
                }
                text.push_str(&table.to_text());
            }
            emit(out, output.as_deref(), &text)
        }
        Command::Synth {
            scene,
            detections,
            gt,
            seed,
        } => {
            let mut spec = load_scene(&scene)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let generated = generate_scene(&spec).map_err(data)?;
            write_output(&detections, &format_detections(&generated.detections))?;
            write_output(&gt, &format_ground_truth(&generated.ground_truth))
        }
        Command::Nms {
            first,
            second,
            output,
            iou,
        } => {
            let threshold = file.get("nms_iou")?.or(iou).unwrap_or(DEFAULT_NMS_IOU);
            if !(0.0..=1.0).contains(&threshold) {
                return Err(usage(format!("nms IoU threshold must be in [0, 1], got {threshold}")));
            }
            let a = read_detections(&first).map_err(data)?;
            let b = read_detections(&second).map_err(data)?;
            write_output(&output, &format_detections(&nms_merge(&[a, b], threshold)))
        }
    }
}

/// Runs the CLI with explicit argument list and output streams; returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
