use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};
use thiserror::Error;

use super::InspectionConfig;
use crate::metrics::{MetricId, MetricKind, ScoreTable, StatsRecord};
use crate::variables::{ValueTuple, VariableDecl, VariableInventory};

pub const SCHEMA_VERSION: &str = "1";
pub const PINNED_TIMESTAMP: &str = "1970-01-01T00:00:00Z";
/// Significant digits kept for every score written to a document.
pub const SCORE_DIGITS: usize = 9;

/// A document violates the interchange schema at `path`.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("schema error at {path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

/// Sizes of one run. `rows` counts data rows, `texts` non-empty text cells,
/// `units` the total N and `vocab` the distinct units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rows: u64,
    pub texts: u64,
    pub tuples: u64,
    pub units: u64,
    pub vocab: u64,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rows={} texts={} tuples={} units={} vocab={}",
            self.rows, self.texts, self.tuples, self.units, self.vocab
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: ToolInfo,
    pub created: String,
    pub config: InspectionConfig,
    /// Effective variables in tuple order, including the implicit
    /// text-source variable.
    pub variables: Vec<VariableInventory>,
    pub summary: RunSummary,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricResult {
    Association(ScoreTable),
    /// `None` where the measure is undefined.
    Diversity(BTreeMap<ValueTuple, Option<f64>>),
    Stats(BTreeMap<ValueTuple, StatsRecord>),
}

impl MetricResult {
    pub fn as_association(&self) -> Option<&ScoreTable> {
        match self {
            MetricResult::Association(t) => Some(t),
            _ => None,
        }
    }

    pub fn tuples(&self) -> Vec<&ValueTuple> {
        match self {
            MetricResult::Association(t) => t.0.keys().collect(),
            MetricResult::Diversity(m) => m.keys().collect(),
            MetricResult::Stats(m) => m.keys().collect(),
        }
    }

    fn round(&mut self) {
        match self {
            MetricResult::Association(t) => {
                for s in t.0.values_mut().flat_map(|u| u.values_mut()) {
                    *s = round_significant(*s, SCORE_DIGITS);
                }
            }
            MetricResult::Diversity(m) => {
                for s in m.values_mut().flatten() {
                    *s = round_significant(*s, SCORE_DIGITS);
                }
            }
            MetricResult::Stats(_) => {}
        }
    }

    fn to_value(&self) -> Value {
        let number = |x: f64| Number::from_f64(x).map_or(Value::Null, Value::Number);
        let map: Map<String, Value> = match self {
            MetricResult::Association(t) => t
                .0
                .iter()
                .map(|(tuple, units)| {
                    let units = units.iter().map(|(u, s)| (u.clone(), number(*s))).collect();
                    (tuple.to_key(), Value::Object(units))
                })
                .collect(),
            MetricResult::Diversity(m) => m
                .iter()
                .map(|(tuple, s)| (tuple.to_key(), s.map_or(Value::Null, number)))
                .collect(),
            MetricResult::Stats(m) => m
                .iter()
                .map(|(tuple, r)| (tuple.to_key(), serde_json::to_value(r).expect("plain record")))
                .collect(),
        };
        Value::Object(map)
    }
}

/// The interchange document: run metadata plus every requested metric.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsDocument {
    pub schema: String,
    pub metadata: Metadata,
    pub metrics: BTreeMap<MetricId, MetricResult>,
    /// Corpus-wide stats record, present when `stats` was requested.
    pub global_stats: Option<StatsRecord>,
    /// Unknown top-level fields, kept for forward compatibility.
    pub extra: BTreeMap<String, Value>,
}

impl ResultsDocument {
    /// Builds a document, rounding every score to [`SCORE_DIGITS`]
    /// significant digits.
    pub fn new(
        metadata: Metadata,
        mut metrics: BTreeMap<MetricId, MetricResult>,
        global_stats: Option<StatsRecord>,
    ) -> Self {
        for result in metrics.values_mut() {
            result.round();
        }
        ResultsDocument {
            schema: SCHEMA_VERSION.to_owned(),
            metadata,
            metrics,
            global_stats,
            extra: BTreeMap::new(),
        }
    }

    pub fn decls(&self) -> Vec<VariableDecl> {
        self.metadata.variables.iter().map(|v| v.decl.clone()).collect()
    }

    pub fn inventory(&self, name: &str) -> Option<&VariableInventory> {
        self.metadata.variables.iter().find(|v| v.decl.name == name)
    }

    pub fn to_value(&self) -> Value {
        let mut root: Map<String, Value> = self.extra.clone().into_iter().collect();
        root.insert("schema".into(), Value::String(self.schema.clone()));
        root.insert(
            "metadata".into(),
            serde_json::to_value(&self.metadata).expect("metadata serializes"),
        );
        let metrics = self
            .metrics
            .iter()
            .map(|(id, r)| (id.as_str().to_owned(), r.to_value()))
            .collect();
        root.insert("metrics".into(), Value::Object(metrics));
        if let Some(g) = &self.global_stats {
            root.insert("global_stats".into(), serde_json::to_value(g).expect("plain record"));
        }
        Value::Object(root)
    }

    pub fn from_value(value: &Value) -> Result<Self, SchemaError> {
        let root = object(value, "$")?;
        let schema = field(root, "schema", "$")?;
        if schema.as_str() != Some(SCHEMA_VERSION) {
            return Err(SchemaError::new(
                "$.schema",
                format!("unsupported schema version {schema}, expected \"{SCHEMA_VERSION}\""),
            ));
        }

        let meta_value = field(root, "metadata", "$")?;
        let meta = object(meta_value, "$.metadata")?;
        for key in ["tool", "created", "config", "variables", "summary"] {
            field(meta, key, "$.metadata")?;
        }
        // flattened declarations lose serde's path, so check them on their own first
        if let Some(vars) = meta["variables"].as_array() {
            for (i, v) in vars.iter().enumerate() {
                parse::<VariableDecl>(v, &format!("$.metadata.variables[{i}]"))?;
            }
        }
        let metadata: Metadata = parse(meta_value, "$.metadata")?;
        for (i, inv) in metadata.variables.iter().enumerate() {
            inv.decl
                .validate()
                .map_err(|e| SchemaError::new(format!("$.metadata.variables[{i}]"), e.to_string()))?;
        }
        let arity = metadata.variables.len();

        let metrics_map = object(field(root, "metrics", "$")?, "$.metrics")?;
        let mut metrics = BTreeMap::new();
        for (key, v) in metrics_map {
            let path = child("$.metrics", key);
            let id: MetricId = key
                .parse()
                .map_err(|e: crate::metrics::MetricError| SchemaError::new(&path, e.to_string()))?;
            if !metadata.config.metrics.contains(&id) {
                return Err(SchemaError::new(path, "metric is not listed in $.metadata.config.metrics"));
            }
            metrics.insert(id, parse_metric(id, v, &path, arity)?);
        }
        if let Some(missing) = metadata.config.metrics.iter().find(|m| !metrics.contains_key(*m)) {
            return Err(SchemaError::new(
                child("$.metrics", missing.as_str()),
                "missing results for a requested metric",
            ));
        }

        let global_stats = root
            .get("global_stats")
            .map(|v| parse(v, "$.global_stats"))
            .transpose()?;
        let extra = root
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "schema" | "metadata" | "metrics" | "global_stats"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();

        Ok(ResultsDocument {
            schema: SCHEMA_VERSION.to_owned(),
            metadata,
            metrics,
            global_stats,
            extra,
        })
    }
}

/// UTF-8 JSON with lexicographically sorted keys and a trailing newline.
pub fn serialize(doc: &ResultsDocument) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&doc.to_value()).expect("documents always serialize");
    out.push(b'\n');
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<ResultsDocument, SchemaError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SchemaError::new("$", format!("invalid UTF-8: {e}")))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| SchemaError::new("$", format!("invalid JSON: {e}")))?;
    ResultsDocument::from_value(&value)
}

/// Rounds to `digits` significant decimal digits; `-0.0` becomes `0.0`.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

fn parse_metric(id: MetricId, value: &Value, path: &str, arity: usize) -> Result<MetricResult, SchemaError> {
    let tuples = object(value, path)?;
    let mut entries = Vec::with_capacity(tuples.len());
    for (key, v) in tuples {
        let tpath = child(path, key);
        let tuple = ValueTuple::from_key(key, arity).map_err(|e| SchemaError::new(&tpath, e.to_string()))?;
        entries.push((tuple, v, tpath));
    }

    Ok(match id.kind() {
        MetricKind::Pmi(_) | MetricKind::Relevance(_) => {
            let mut table = ScoreTable::default();
            for (tuple, v, tpath) in entries {
                let mut units = BTreeMap::new();
                for (unit, s) in object(v, &tpath)? {
                    let score = s
                        .as_f64()
                        .ok_or_else(|| SchemaError::new(child(&tpath, unit), "expected a number"))?;
                    units.insert(unit.clone(), score);
                }
                table.0.insert(tuple, units);
            }
            MetricResult::Association(table)
        }
        MetricKind::Diversity(_) => {
            let mut out = BTreeMap::new();
            for (tuple, v, tpath) in entries {
                let score = match v {
                    Value::Null => None,
                    v => Some(v.as_f64().ok_or_else(|| SchemaError::new(tpath, "expected a number or null"))?),
                };
                out.insert(tuple, score);
            }
            MetricResult::Diversity(out)
        }
        MetricKind::Stats => {
            let mut out = BTreeMap::new();
            for (tuple, v, tpath) in entries {
                out.insert(tuple, parse(v, &tpath)?);
            }
            MetricResult::Stats(out)
        }
    })
}

fn is_identifier(key: &str) -> bool {
    let mut chars = key.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Appends an object member to a JSON path: `$.a` or `$["a b"]`.
fn child(path: &str, key: &str) -> String {
    if is_identifier(key) {
        format!("{path}.{key}")
    } else {
        format!("{path}[{}]", Value::String(key.to_owned()))
    }
}

fn object<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    value
        .as_object()
        .ok_or_else(|| SchemaError::new(path, format!("expected an object, found {}", kind_of(value))))
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, SchemaError> {
    map.get(key)
        .ok_or_else(|| SchemaError::new(child(path, key), "missing required field"))
}

fn kind_of(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Typed parse of a subtree, translating serde's error position into a
/// JSON path below `base`.
fn parse<T: DeserializeOwned>(value: &Value, base: &str) -> Result<T, SchemaError> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        let mut path = base.to_owned();
        for segment in err.path().iter() {
            match segment {
                serde_path_to_error::Segment::Seq { index } => path = format!("{path}[{index}]"),
                serde_path_to_error::Segment::Map { key } => path = child(&path, key),
                serde_path_to_error::Segment::Enum { variant } => path = child(&path, variant),
                serde_path_to_error::Segment::Unknown => {}
            }
        }
        let message = err.inner().to_string();
        if let Some(name) = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            path = child(&path, name);
        }
        SchemaError::new(path, message)
    })
}
