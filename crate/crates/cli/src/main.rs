use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pixlens::detection::{load_archive, DEFAULT_CONFIDENCE_THRESHOLD};
use pixlens::disentangle::{
    analyze, build_prompt_grid, ClassifierConfig, DisentangleConfig, LatentArchive, DEFAULT_CLASS_CAP,
};
use pixlens::evaluators::{relevant_labels, EvalParams};
use pixlens::pipeline::{
    aggregate, load_edit_dataset, render_report, render_table, run_evaluation, DatasetSource, EvaluationReport, Format,
    GroupBy, RunConfig, RunInputs, IMAGE_EXTENSIONS,
};

#[derive(Parser)]
#[command(
    name = "pixlens",
    version,
    about = "Evaluate text-guided image edits from detection archives"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Markdown,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Markdown => Format::Markdown,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Editval,
    #[value(alias = "magicbrush")]
    MagicbrushAdapted,
    Custom,
}

impl From<Source> for DatasetSource {
    fn from(s: Source) -> Self {
        match s {
            Source::Editval => DatasetSource::Editval,
            Source::MagicbrushAdapted => DatasetSource::MagicbrushAdapted,
            Source::Custom => DatasetSource::Custom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Grouping {
    #[value(alias = "edit_type")]
    EditType,
    Model,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Target {
    /// Input images, keyed by image_id
    Input,
    /// Edited images, keyed by edit_id
    Edited,
}

#[derive(Subcommand)]
enum Commands {
    /// Score every edit of a dataset
    Evaluate(EvaluateArgs),
    /// Disentanglement scores for a latent archive
    Disentangle(DisentangleArgs),
    /// Combine JSON reports into one table
    Aggregate(AggregateArgs),
    /// Write the disentanglement prompt grid
    Grid(GridArgs),
    /// Build a detection archive by calling the external bridge
    Detect(DetectArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Edit dataset JSON
    #[arg(long)]
    edits: PathBuf,
    /// Dataset layout
    #[arg(long, value_enum, default_value = "editval")]
    source: Source,
    /// Directory of input images
    #[arg(long)]
    images: PathBuf,
    /// Directory of edited images, one per edit_id
    #[arg(long)]
    edited: PathBuf,
    /// Detection archive for the input images
    #[arg(long)]
    detections_input: PathBuf,
    /// Detection archive for the edited images
    #[arg(long)]
    detections_edited: PathBuf,
    /// Minimum detection confidence
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    threshold: f64,
    /// Report file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Name of the editing model, used as the column label when aggregating
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct DisentangleArgs {
    /// Latent archive directory
    #[arg(long)]
    latents: PathBuf,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.3)]
    test_split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Maximum Z-diff examples per category
    #[arg(long, default_value_t = DEFAULT_CLASS_CAP)]
    class_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Glob matching report files
    #[arg(long)]
    reports: String,
    #[arg(long, value_enum, default_value = "edit-type")]
    group_by: Grouping,
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Edit dataset JSON, used to derive label queries
    #[arg(long)]
    edits: PathBuf,
    #[arg(long, value_enum, default_value = "editval")]
    source: Source,
    /// Image directory to run detection on
    #[arg(long)]
    images: PathBuf,
    /// Which images `--images` holds
    #[arg(long, value_enum, default_value = "input")]
    target: Target,
    /// Output archive directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    threshold: f64,
    /// Detector backend id forwarded to the bridge
    #[arg(long)]
    detector: Option<String>,
    /// Bridge executable
    #[arg(long, default_value = "pixlens-bridge")]
    bridge: PathBuf,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => std::io::stdout().write_all(bytes).context("writing stdout"),
    }
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let EvaluateArgs {
        edits,
        source,
        images,
        edited,
        detections_input,
        detections_edited,
        threshold,
        out,
        workers,
        format,
        model,
    } = args;
    let dataset = load_edit_dataset(&edits, source.into())?;
    for (id, problems) in &dataset.violations {
        eprintln!("warning: edit `{id}`: {}", problems.join("; "));
    }
    let det_in = load_archive(&detections_input)?;
    let det_ed = load_archive(&detections_edited)?;
    for w in det_in.warnings.iter().chain(&det_ed.warnings) {
        eprintln!("warning: {w}");
    }
    let config = RunConfig {
        params: EvalParams {
            threshold,
            ..EvalParams::default()
        },
        workers,
        model,
    };
    let inputs = RunInputs {
        images_dir: &images,
        edited_dir: &edited,
        detections_input: &det_in,
        detections_edited: &det_ed,
    };
    let report = run_evaluation(&dataset, &inputs, &config)?;
    let o = &report.summary.overall;
    eprintln!("{} edits: {} evaluated, {} failed", o.total, o.successful, o.failed);
    emit(out.as_deref(), &render_report(&report, format.into()))
}

fn disentangle(args: DisentangleArgs) -> Result<()> {
    let DisentangleArgs {
        latents,
        epochs,
        test_split,
        seed,
        learning_rate,
        class_cap,
        out,
    } = args;
    let archive = LatentArchive::load(&latents)?;
    let cfg = DisentangleConfig {
        classifier: ClassifierConfig {
            epochs,
            test_fraction: test_split,
            learning_rate,
            seed,
        },
        class_cap,
    };
    let report = analyze(&archive, &build_prompt_grid(), &cfg)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(out.as_deref(), text.as_bytes())
}

fn aggregate_reports(pattern: &str, group_by: Grouping, format: OutputFormat, out: Option<&Path>) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob `{pattern}`"))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no reports match `{pattern}`");
    }
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            EvaluationReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let group_by = match group_by {
        Grouping::EditType => GroupBy::EditType,
        Grouping::Model => GroupBy::Model,
    };
    emit(out, &render_table(&aggregate(&reports, group_by), format.into()))
}

fn grid(out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&build_prompt_grid())?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn find_image(dir: &Path, id: &str) -> Option<String> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| format!("{id}.{ext}"))
        .find(|name| dir.join(name).is_file())
}

fn detect(args: DetectArgs) -> Result<()> {
    let DetectArgs {
        edits,
        source,
        images,
        target,
        out,
        threshold,
        detector,
        bridge,
    } = args;
    let dataset = load_edit_dataset(&edits, source.into())?;
    let mut queries: std::collections::BTreeMap<String, Vec<String>> = Default::default();
    for e in &dataset.edits {
        let key = if target == Target::Edited {
            &e.edit_id
        } else {
            &e.image_id
        };
        queries.entry(key.clone()).or_default().extend(relevant_labels(e));
    }
    let mut entries = Vec::new();
    for (id, mut labels) in queries {
        labels.sort();
        labels.dedup();
        let image = find_image(&images, &id).with_context(|| format!("no image for `{id}` in {}", images.display()))?;
        entries.push(json!({"image_id": id, "image": image, "labels": labels}));
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let query_path = out.join("queries.json");
    let body = json!({"threshold": threshold, "queries": entries});
    fs::write(&query_path, serde_json::to_string_pretty(&body)?)?;

    let mut call = Command::new(&bridge);
    call.arg("detect")
        .arg("--images")
        .arg(&images)
        .arg("--queries")
        .arg(&query_path)
        .arg("--threshold")
        .arg(threshold.to_string())
        .arg("--out")
        .arg(&out);
    if let Some(d) = &detector {
        call.arg("--detector").arg(d);
    }
    let status = call
        .status()
        .with_context(|| format!("cannot run bridge `{}`", bridge.display()))?;
    if !status.success() {
        bail!("bridge exited with {status}");
    }
    let archive = load_archive(&out)?;
    for w in &archive.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "archive: {} images, {} detector errors",
        archive.len(),
        archive.errors.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Commands::Evaluate(args) => evaluate(args),
        Commands::Disentangle(args) => disentangle(args),
        Commands::Aggregate(a) => aggregate_reports(&a.reports, a.group_by, a.format, a.out.as_deref()),
        Commands::Grid(a) => grid(a.out.as_deref()),
        Commands::Detect(args) => detect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
