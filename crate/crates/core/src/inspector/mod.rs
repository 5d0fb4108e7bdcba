//! Full analysis runs: ingest, unitize, assign tuples, count and score,
//! producing a [`ResultsDocument`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    load_dataset, select_columns, ColumnRef, CorpusError, DatasetSource, LogicalRow,
    TEXT_SOURCE_VARIABLE,
};
use crate::metrics::{
    basic_stats, class_relevance, lexical_diversity, pmi, CountsTable, MetricError,
    MetricId, MetricKind, RowObservation,
};
use crate::unitizer::{
    unitize, PreprocessOptions, Preprocessor, Tokenizer, TokenizerRegistry, TokenizerSpec,
    UnitConfig, UnitError,
};
use crate::variables::{assign_tuples, ValueTuple, VariableDecl, VariableError};

mod document;

pub use document::{
    deserialize, round_significant, serialize, MetricResult, Metadata, ResultsDocument,
    RunSummary, SchemaError, ToolInfo, PINNED_TIMESTAMP, SCHEMA_VERSION, SCORE_DIGITS,
};

/// Everything that determines the content of a results document. Echoed
/// verbatim into its metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectionConfig {
    pub source: DatasetSource,
    pub texts: Vec<ColumnRef>,
    #[serde(default)]
    pub variables: Vec<VariableDecl>,
    #[serde(default)]
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    #[serde(default)]
    pub unit: UnitConfig,
    pub metrics: Vec<MetricId>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("at least one metric is required")]
    NoMetrics,
    #[error("metric `{0}` is requested more than once")]
    DuplicateMetric(MetricId),
    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),
    #[error(transparent)]
    Variable(#[from] VariableError),
    #[error(transparent)]
    Unit(#[from] UnitError),
}

impl InspectionConfig {
    pub fn new(source: DatasetSource, texts: Vec<ColumnRef>, metrics: Vec<MetricId>) -> Self {
        InspectionConfig {
            source,
            texts,
            variables: Vec::new(),
            tokenizer: TokenizerSpec::default(),
            preprocess: PreprocessOptions::default(),
            unit: UnitConfig::default(),
            metrics,
        }
    }

    pub fn with_variables(mut self, variables: Vec<VariableDecl>) -> Self {
        self.variables = variables;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.metrics.is_empty() {
            return Err(ConfigError::NoMetrics);
        }
        let mut seen = HashSet::new();
        for m in &self.metrics {
            if !seen.insert(*m) {
                return Err(ConfigError::DuplicateMetric(*m));
            }
        }
        let mut names = HashSet::new();
        for decl in &self.variables {
            decl.validate()?;
            if !names.insert(decl.name.as_str()) {
                return Err(ConfigError::DuplicateVariable(decl.name.clone()));
            }
        }
        self.unit.validate()?;
        Ok(())
    }
}

/// Execution settings that never influence scores, kept out of the
/// echoed configuration so documents compare equal across them.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Worker threads, which is also the number of row shards.
    /// `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Write [`PINNED_TIMESTAMP`] instead of the current time.
    pub pin_timestamp: bool,
    pub tokenizers: TokenizerRegistry,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: None,
            pin_timestamp: false,
            tokenizers: TokenizerRegistry::with_builtins(),
        }
    }
}

impl RunOptions {
    pub fn pinned() -> Self {
        RunOptions {
            pin_timestamp: true,
            ..RunOptions::default()
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    fn thread_count(&self) -> usize {
        self.threads
            .filter(|&t| t > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Select,
    Preprocess,
    Tokenize,
    Unitize,
    AssignTuples,
    Score,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Select => "select",
            Stage::Preprocess => "preprocess",
            Stage::Tokenize => "tokenize",
            Stage::Unitize => "unitize",
            Stage::AssignTuples => "assign_tuples",
            Stage::Score => "score",
        })
    }
}

fn at_row(row: &Option<usize>) -> String {
    row.map(|r| format!(" (data row {r})")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum InspectError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Corpus { stage: Stage, source: CorpusError },
    #[error("{stage}{}: {source}", at_row(.row))]
    Unit {
        stage: Stage,
        row: Option<usize>,
        source: UnitError,
    },
    #[error("assign_tuples: {0}")]
    Variables(#[source] VariableError),
    #[error("score {metric}: {source}")]
    Metric { metric: MetricId, source: MetricError },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl InspectError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            InspectError::Config(_) => Some(Stage::Config),
            InspectError::Corpus { stage, .. } | InspectError::Unit { stage, .. } => Some(*stage),
            InspectError::Variables(_) => Some(Stage::AssignTuples),
            InspectError::Metric { .. } => Some(Stage::Score),
            InspectError::Pool(_) => None,
        }
    }

    /// Errors not caused by the configuration or the data.
    pub fn is_internal(&self) -> bool {
        matches!(self, InspectError::Pool(_))
    }
}

pub fn run_inspection(config: &InspectionConfig) -> Result<ResultsDocument, InspectError> {
    run_inspection_with(config, &RunOptions::default())
}

pub fn run_inspection_with(
    config: &InspectionConfig,
    options: &RunOptions,
) -> Result<ResultsDocument, InspectError> {
    config.validate()?;

    let corpus_err = |stage| move |source| InspectError::Corpus { stage, source };
    let raw = load_dataset(&config.source).map_err(corpus_err(Stage::Load))?;
    let variable_refs: Vec<ColumnRef> = config
        .variables
        .iter()
        .filter(|d| d.name != TEXT_SOURCE_VARIABLE)
        .map(|d| {
            if config.source.has_header {
                ColumnRef::Name(d.name.clone())
            } else {
                ColumnRef::parse(&d.name)
            }
        })
        .collect();
    let table =
        select_columns(&raw, &config.texts, &variable_refs).map_err(corpus_err(Stage::Select))?;

    let preprocessor = Preprocessor::new(&config.preprocess).map_err(|source| InspectError::Unit {
        stage: Stage::Preprocess,
        row: None,
        source,
    })?;
    let tokenizer = options
        .tokenizers
        .resolve(&config.tokenizer)
        .map_err(|source| InspectError::Unit {
            stage: Stage::Tokenize,
            row: None,
            source,
        })?;
    let assignment = assign_tuples(&table, &config.variables).map_err(InspectError::Variables)?;

    let threads = options.thread_count();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let shard = Shard {
        tokenizer: &tokenizer,
        preprocessor: &preprocessor,
        unit: &config.unit,
    };
    let rows = table.rows();
    let chunk = rows.len().div_ceil(threads).max(1);

    let (counts, metrics, warnings) = pool.install(|| {
        let partials: Vec<Result<CountsTable, InspectError>> = rows
            .par_chunks(chunk)
            .zip(assignment.tuples.par_chunks(chunk))
            .map(|(rows, tuples)| shard.count(rows, tuples))
            .collect();
        let mut counts = CountsTable::default();
        for partial in partials {
            counts.merge(partial?);
        }
        let mut warnings = assignment.warnings.clone();
        let mut metrics = BTreeMap::new();
        for &id in &config.metrics {
            let result = score(&counts, id, &mut warnings)
                .map_err(|source| InspectError::Metric { metric: id, source })?;
            metrics.insert(id, result);
        }
        Ok::<_, InspectError>((counts, metrics, warnings))
    })?;

    let global_stats = config
        .metrics
        .contains(&MetricId::Stats)
        .then(|| basic_stats(&counts).global);
    let summary = RunSummary {
        rows: table.physical_row_count() as u64,
        texts: table.row_count() as u64,
        tuples: counts.tuples().count() as u64,
        units: counts.total(),
        vocab: counts.vocab_size() as u64,
    };
    let metadata = Metadata {
        tool: ToolInfo::current(),
        created: if options.pin_timestamp {
            PINNED_TIMESTAMP.to_owned()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        },
        config: config.clone(),
        variables: assignment.inventories,
        summary,
        warnings,
    };
    Ok(ResultsDocument::new(metadata, metrics, global_stats))
}

struct Shard<'a> {
    tokenizer: &'a Tokenizer,
    preprocessor: &'a Preprocessor,
    unit: &'a UnitConfig,
}

impl Shard<'_> {
    fn count(&self, rows: &[LogicalRow], tuples: &[ValueTuple]) -> Result<CountsTable, InspectError> {
        let mut counts = CountsTable::default();
        for (row, tuple) in rows.iter().zip(tuples) {
            let unit_err = |stage| {
                move |source| InspectError::Unit {
                    stage,
                    row: Some(row.physical + 1),
                    source,
                }
            };
            let tokens = self
                .tokenizer
                .tokenize(&row.text)
                .map_err(unit_err(Stage::Tokenize))?;
            let tokens = self.preprocessor.apply(tokens);
            let bag = unitize(&tokens, self.unit).map_err(unit_err(Stage::Unitize))?;
            counts.observe(RowObservation {
                tuple,
                text: &row.text,
                tokens: &tokens,
                bag: &bag,
            });
        }
        Ok(counts)
    }
}

fn score(counts: &CountsTable, id: MetricId, warnings: &mut Vec<String>) -> Result<MetricResult, MetricError> {
    Ok(match id.kind() {
        MetricKind::Pmi(flavor) => {
            let scored = pmi(counts, flavor)?;
            warnings.extend(scored.warnings.into_iter().map(|w| format!("{id}: {w}")));
            MetricResult::Association(scored.table)
        }
        MetricKind::Relevance(flags) => MetricResult::Association(class_relevance(counts, flags)?),
        MetricKind::Diversity(measure) => MetricResult::Diversity(lexical_diversity(counts, measure)),
        MetricKind::Stats => MetricResult::Stats(basic_stats(counts).per_tuple),
    })
}
