//! `lexivar` command line: `inspect` computes a results document from a
//! dataset, `visualize` turns one into chart files.

use std::fs;
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lexivar::charts::{visualize, OutputFormat, VisualizerArgs};
use lexivar::corpus::{ColumnRef, DatasetSource, Format};
use lexivar::inspector::{self, run_inspection_with, InspectionConfig, RunOptions};
use lexivar::metrics::MetricId;
use lexivar::unitizer::{PreprocessOptions, TokenizerSpec, UnitConfig};
use lexivar::variables::VariableDecl;

#[derive(Parser)]
#[command(name = "lexivar", version, about = "Unit-variable association metrics and charts for text corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute metrics over a dataset and write a results document.
    Inspect(InspectArgs),
    /// Plan and render charts from a results document.
    Visualize(VisualizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Ngram,
    Cooccurrence,
}

#[derive(Args)]
struct InspectArgs {
    /// Dataset file (TSV or CSV).
    #[arg(long, required_unless_present = "config")]
    data: Option<PathBuf>,
    /// Dataset format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// The dataset has no header row; columns are named by index.
    #[arg(long)]
    no_header: bool,
    /// Text column (name or index); give twice to compare two text columns.
    #[arg(long = "text-col", required_unless_present = "config")]
    text_cols: Vec<String>,
    /// Variable declaration NAME:TYPE:SEMANTICS[:bins=K][:axis=latitude|longitude].
    #[arg(long = "var")]
    vars: Vec<String>,
    /// Metric id; repeat the flag or separate ids with commas.
    #[arg(long = "metric", value_delimiter = ',', required_unless_present = "config")]
    metrics: Vec<String>,
    #[arg(long)]
    lowercase: bool,
    /// Stopword file, one word per line.
    #[arg(long)]
    stopwords: Vec<PathBuf>,
    #[arg(long = "extra-stopword")]
    extra_stopwords: Vec<String>,
    #[arg(long, value_enum, default_value = "ngram")]
    unit: UnitArg,
    /// n-gram length, or co-occurrence tuple size.
    #[arg(short = 'n', long = "n", default_value_t = 1)]
    n: usize,
    /// Co-occurrence window in tokens.
    #[arg(long)]
    window: Option<usize>,
    /// Skip co-occurrences that repeat the same surface form.
    #[arg(long)]
    dedup: bool,
    /// `whitespace` (default) or the id of a registered tokenizer such as `char`.
    #[arg(long)]
    tokenizer: Option<String>,
    #[arg(short = 'o', long, default_value = "results.json")]
    output: PathBuf,
    /// Read the full inspection configuration from a JSON file instead of flags.
    #[arg(long, conflicts_with_all = ["data", "text_cols", "vars", "metrics"])]
    config: Option<PathBuf>,
    /// Write a fixed creation timestamp for byte-stable output.
    #[arg(long)]
    timestamp_zero: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "LEXIVAR_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct VisualizeArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value = "charts")]
    output_dir: PathBuf,
    /// Output formats, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "html,json")]
    format: Vec<OutputFormat>,
    /// Keep the k best units per tuple.
    #[arg(long, conflicts_with = "filter_unit")]
    top_k: Option<usize>,
    /// Keep units matching this regular expression anywhere.
    #[arg(long)]
    filter_regex: Option<String>,
    /// Keep only this unit; repeatable.
    #[arg(long = "filter-unit")]
    filter_unit: Vec<String>,
    /// GeoJSON FeatureCollection with region shapes for choropleths.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Feature property matched against region values.
    #[arg(long, default_value = lexivar::charts::DEFAULT_PROPERTY)]
    geometry_property: String,
    /// GeoJSON drawn behind spatial scatter plots and binned maps.
    #[arg(long)]
    background: Option<PathBuf>,
}

enum Failure {
    User(String),
    Internal(String),
}

impl Failure {
    fn user(e: impl std::fmt::Display) -> Self {
        Failure::User(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = panic::catch_unwind(|| match cli.command {
        Command::Inspect(args) => inspect(args),
        Command::Visualize(args) => visualize_cmd(args),
    });
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::User(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn build_config(args: &InspectArgs) -> Result<InspectionConfig, Failure> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::User(format!("cannot read --config {}: {e}", path.display())))?;
        return serde_json::from_str(&text)
            .map_err(|e| Failure::User(format!("invalid --config {}: {e}", path.display())));
    }

    let data = args.data.clone().expect("clap requires --data without --config");
    let mut source = DatasetSource::path(data);
    if let Some(f) = args.format {
        source.format = match f {
            FormatArg::Tsv => Format::Tsv,
            FormatArg::Csv => Format::Csv,
        };
    }
    if args.no_header {
        source = source.without_header();
    }
    let metrics = args
        .metrics
        .iter()
        .map(|m| m.trim().parse::<MetricId>().map_err(Failure::user))
        .collect::<Result<Vec<_>, _>>()?;
    let variables = args
        .vars
        .iter()
        .map(|v| VariableDecl::parse(v).map_err(|e| Failure::User(format!("--var {v}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let unit = match args.unit {
        UnitArg::Ngram => {
            if args.window.is_some() || args.dedup {
                return Err(Failure::User("--window and --dedup need --unit cooccurrence".into()));
            }
            UnitConfig::ngram(args.n)
        }
        UnitArg::Cooccurrence => {
            let window = args
                .window
                .ok_or_else(|| Failure::User("--unit cooccurrence needs --window".into()))?;
            UnitConfig::cooccurrence(args.n, window, args.dedup)
        }
    };
    let tokenizer = match args.tokenizer.as_deref() {
        None | Some("whitespace") => TokenizerSpec::DefaultWhitespace,
        Some(id) => TokenizerSpec::custom(id),
    };

    Ok(InspectionConfig {
        source,
        texts: args.text_cols.iter().map(|c| ColumnRef::parse(c)).collect(),
        variables,
        tokenizer,
        preprocess: PreprocessOptions {
            lowercase: args.lowercase,
            stopword_files: args.stopwords.clone(),
            extra_stopwords: args.extra_stopwords.clone(),
        },
        unit,
        metrics,
    })
}

fn inspect(args: InspectArgs) -> Result<(), Failure> {
    let config = build_config(&args)?;
    let options = RunOptions {
        threads: args.threads,
        pin_timestamp: args.timestamp_zero,
        ..RunOptions::default()
    };
    let doc = run_inspection_with(&config, &options).map_err(|e| {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::user(e)
        }
    })?;
    for w in &doc.metadata.warnings {
        eprintln!("warning: {w}");
    }
    fs::write(&args.output, inspector::serialize(&doc))
        .map_err(|e| Failure::User(format!("cannot write {}: {e}", args.output.display())))?;
    println!("{} output={}", doc.metadata.summary, args.output.display());
    Ok(())
}

fn visualize_cmd(args: VisualizeArgs) -> Result<(), Failure> {
    let bytes = fs::read(&args.results)
        .map_err(|e| Failure::User(format!("cannot read --results {}: {e}", args.results.display())))?;
    let doc = inspector::deserialize(&bytes).map_err(Failure::user)?;
    let mut vargs = VisualizerArgs::new(&args.output_dir);
    vargs.formats = args.format.into_iter().collect();
    vargs.top_k = args.top_k;
    vargs.unit_filter_list = (!args.filter_unit.is_empty()).then_some(args.filter_unit);
    vargs.unit_pattern = args.filter_regex;
    vargs.geometry = args.geometry;
    vargs.geometry_property = args.geometry_property;
    vargs.background = args.background;
    let report = visualize(&doc, &vargs).map_err(Failure::user)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "charts={} files={} output_dir={}",
        report.charts.len(),
        report.files.len(),
        args.output_dir.display()
    );
    Ok(())
}
