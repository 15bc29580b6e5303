//! `foodbench`: one entry point for every pipeline stage.
//!
//! stdout carries only the machine-readable result; diagnostics go to
//! stderr. Exit status is 0 on success, 1 on a data error and 2 on a usage
//! error.

mod serve;
mod stats_out;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use foodbench_core::coco::{
    fix_bboxes_with, parse_dataset, parse_results, serialize_dataset, serialize_results,
    validate_with, DatasetDoc, ValidateOptions,
};
use foodbench_core::eval::{Comparator, Interpolation, IouDomain};
use foodbench_core::fusion::{ScoreAggregation, WeightArea};
use foodbench_core::{evaluate, fuse, FusionConfig, MatchConfig};

#[derive(Debug, Parser)]
#[command(name = "foodbench", version, about = "Food recognition benchmark toolkit")]
pub struct Cli {
    /// Diagnostic verbosity on stderr: error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn", env = "FOODBENCH_LOG_LEVEL")]
    pub log_level: tracing::Level,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset; prints the validation report.
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0, env = "FOODBENCH_BBOX_TOLERANCE")]
        bbox_tolerance: f64,
    },
    /// Recompute every bbox from its mask; report goes to stderr.
    FixBboxes {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0, env = "FOODBENCH_BBOX_TOLERANCE")]
        bbox_tolerance: f64,
    },
    /// Score a results file against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Merge several results files into one.
    Fuse {
        /// Results file; repeat once per model or augmentation pass.
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5, env = "FOODBENCH_GROUP_IOU")]
        group_iou: f64,
        /// Default: 1.0 for one input, 0.5 for several.
        #[arg(long, env = "FOODBENCH_SINGLETON_FACTOR")]
        singleton_factor: Option<f64>,
        /// max or mean.
        #[arg(long, default_value = "max", value_parser = kebab_enum::<ScoreAggregation>)]
        score_agg: ScoreAggregation,
        /// bbox or mask.
        #[arg(long, default_value = "bbox", value_parser = kebab_enum::<IouDomain>)]
        iou_domain: IouDomain,
        /// mask or bbox.
        #[arg(long, default_value = "mask", value_parser = kebab_enum::<WeightArea>)]
        weight_area: WeightArea,
    },
    /// Dataset statistics. With no selector, all are computed.
    Stats(StatsArgs),
    /// Run the submission service.
    Serve(serve::ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    #[arg(long, default_value_t = 0.5, env = "FOODBENCH_IOU")]
    pub iou: f64,
    /// strict-greater or greater-or-equal.
    #[arg(long, default_value = "strict-greater", env = "FOODBENCH_COMPARATOR", value_parser = kebab_enum::<Comparator>)]
    pub comparator: Comparator,
    /// 101-point or all-point.
    #[arg(long, default_value = "101-point", env = "FOODBENCH_INTERPOLATION", value_parser = kebab_enum::<Interpolation>)]
    pub interpolation: Interpolation,
    #[arg(long, default_value_t = 100, env = "FOODBENCH_MAX_DETS")]
    pub max_dets: usize,
    /// mask or bbox.
    #[arg(long, default_value = "mask", env = "FOODBENCH_IOU_DOMAIN", value_parser = kebab_enum::<IouDomain>)]
    pub match_domain: IouDomain,
}

impl MatchArgs {
    pub fn config(&self) -> Result<MatchConfig, CliError> {
        let cfg = MatchConfig {
            iou_threshold: self.iou,
            comparator: self.comparator,
            max_dets_per_image: self.max_dets,
            interpolation: self.interpolation,
            iou_domain: self.match_domain,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Annotations per category.
    #[arg(long)]
    pub class_counts: bool,
    /// Co-occurrence matrix filtered at --min-count.
    #[arg(long)]
    pub cooccurrence: bool,
    #[arg(long, default_value_t = 40, env = "FOODBENCH_MIN_COUNT")]
    pub min_count: u64,
    /// Histogram of polygon vertex counts up to --max-points.
    #[arg(long)]
    pub polygon_hist: bool,
    #[arg(long, default_value_t = 1500, env = "FOODBENCH_MAX_POINTS")]
    pub max_points: u64,
    /// Image width and height histograms.
    #[arg(long)]
    pub size_hist: bool,
    /// Also list categories with at least this many annotations.
    #[arg(long, env = "FOODBENCH_MIN_ANNOTATIONS")]
    pub min_annotations: Option<u64>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// CSV needs exactly one selected statistic.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "{m}"),
        }
    }
}

fn data<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", context.display()))
}

/// Accepts the same spelling as the JSON configuration.
fn kebab_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(data(path))
}

fn load_dataset(path: &Path) -> Result<DatasetDoc, CliError> {
    parse_dataset(&read(path)?).map_err(data(path))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, bytes).map_err(data(p)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn with_newline(mut bytes: Vec<u8>) -> Vec<u8> {
    bytes.push(b'\n');
    bytes
}

fn pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    with_newline(serde_json::to_vec_pretty(v).expect("output serializes"))
}

fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate {
            input,
            bbox_tolerance,
        } => {
            let opts = ValidateOptions { bbox_tolerance };
            let doc = load_dataset(&input)?;
            let report = validate_with(&doc, &opts);
            emit(None, &pretty(&report))?;
            if report.errors.is_empty() {
                Ok(())
            } else {
                Err(CliError::Data(format!(
                    "{}: {} validation errors",
                    input.display(),
                    report.errors.len()
                )))
            }
        }
        Command::FixBboxes {
            input,
            output,
            bbox_tolerance,
        } => {
            let opts = ValidateOptions { bbox_tolerance };
            let doc = load_dataset(&input)?;
            let (fixed, report) = fix_bboxes_with(&doc, &opts);
            eprintln!("{}", String::from_utf8_lossy(&pretty(&report)).trim_end());
            emit(output.as_deref(), &with_newline(serialize_dataset(&fixed)))
        }
        Command::Evaluate {
            gt,
            results,
            matching,
        } => {
            let cfg = matching.config()?;
            let gt_doc = load_dataset(&gt)?;
            let dets = parse_results(&read(&results)?).map_err(data(&results))?;
            let report = evaluate(&gt_doc, &dets, &cfg).map_err(data(&results))?;
            tracing::info!(map = report.map, mar = report.mar, "evaluated");
            emit(None, &pretty(&report))
        }
        Command::Fuse {
            inputs,
            output,
            group_iou,
            singleton_factor,
            score_agg,
            iou_domain,
            weight_area,
        } => {
            let cfg = FusionConfig {
                group_iou,
                score_aggregation: score_agg,
                singleton_factor,
                iou_domain,
                weight_area,
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let mut sets = Vec::with_capacity(inputs.len());
            for (source, path) in inputs.iter().enumerate() {
                let dets = parse_results(&read(path)?).map_err(data(path))?;
                sets.push((source as u32, dets));
            }
            let fused = fuse(&sets, &cfg).map_err(|e| CliError::Data(e.to_string()))?;
            tracing::info!(
                inputs = sets.iter().map(|s| s.1.len()).sum::<usize>(),
                outputs = fused.len(),
                "fused"
            );
            emit(output.as_deref(), &with_newline(serialize_results(&fused)))
        }
        Command::Stats(args) => {
            let selection = stats_out::Selection::from_args(&args)?;
            let doc = load_dataset(&args.input)?;
            emit(None, &selection.render(&doc, &args)?)
        }
        Command::Serve(args) => serve::run(args),
    }
}

/// Parses `argv` and runs one subcommand. Logging is set up here so that
/// library code only ever writes to stderr.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version print to stdout and exit 0; everything else is 2
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_max_level(cli.log_level)
        .with_target(false)
        .init();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("foodbench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
