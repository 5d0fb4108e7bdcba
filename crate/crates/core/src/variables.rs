//! Variable declarations, equal-width binning and the mapping from logical
//! rows to joint value tuples.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnalysisTable, TEXT_SOURCE_VARIABLE};

/// Value used for empty variable cells.
pub const MISSING_VALUE: &str = "∅";

/// Separator between values in a serialized tuple key.
pub const TUPLE_SEPARATOR: &str = "::";

#[derive(Debug, Error, PartialEq)]
pub enum VariableError {
    #[error("variable `{variable}`: non-numeric value {value:?} at row {row}")]
    NonNumericValue {
        variable: String,
        row: usize,
        value: String,
    },
    #[error("variable `{variable}`: {value} at row {row} is outside the {axis} range")]
    CoordinateOutOfRange {
        variable: String,
        row: usize,
        value: f64,
        axis: Axis,
    },
    #[error("unknown variable column `{0}`")]
    UnknownVariableColumn(String),
    #[error("invalid declaration for `{name}`: {reason}")]
    InvalidDeclaration { name: String, reason: String },
    #[error("cannot parse variable declaration {0:?} (expected NAME:TYPE:SEMANTICS[:bins=K][:axis=latitude|longitude])")]
    Syntax(String),
    #[error("binning needs at least one finite value")]
    NoValues,
    #[error("malformed tuple key {key:?}: {reason}")]
    MalformedTupleKey { key: String, reason: String },
}

pub type Result<T, E = VariableError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Nominal,
    Ordinal,
    Quantitative,
    Coordinate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    Temporal,
    Spatial,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Latitude,
    Longitude,
}

impl Axis {
    pub fn limit(self) -> f64 {
        match self {
            Axis::Latitude => 90.0,
            Axis::Longitude => 180.0,
        }
    }

    /// Guesses the axis of a coordinate variable from common column names.
    pub fn infer(name: &str) -> Option<Axis> {
        match name.to_lowercase().as_str() {
            "lat" | "latitude" | "y" => Some(Axis::Latitude),
            "lon" | "lng" | "long" | "longitude" | "x" => Some(Axis::Longitude),
            _ => None,
        }
    }
}

macro_rules! lowercase_names {
    ($ty:ty { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(<$ty>::$variant => $name),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok(<$ty>::$variant),)*
                    other => Err(format!("unknown {} `{other}`", stringify!($ty))),
                }
            }
        }
    };
}

lowercase_names!(VarType {
    Nominal => "nominal",
    Ordinal => "ordinal",
    Quantitative => "quantitative",
    Coordinate => "coordinate",
});
lowercase_names!(Semantics {
    Temporal => "temporal",
    Spatial => "spatial",
    General => "general",
});
lowercase_names!(Axis {
    Latitude => "latitude",
    Longitude => "longitude",
});

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub vtype: VarType,
    pub semantics: Semantics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
}

impl VariableDecl {
    pub fn new(name: impl Into<String>, vtype: VarType, semantics: Semantics) -> Self {
        VariableDecl {
            name: name.into(),
            vtype,
            semantics,
            bins: None,
            axis: None,
        }
    }

    pub fn with_bins(mut self, k: u32) -> Self {
        self.bins = Some(k);
        self
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = Some(axis);
        self
    }

    /// The implicit nominal/general variable distinguishing two text columns.
    pub fn text_source() -> Self {
        VariableDecl::new(TEXT_SOURCE_VARIABLE, VarType::Nominal, Semantics::General)
    }

    /// Explicit axis, or one inferred from the name for coordinate variables.
    pub fn coordinate_axis(&self) -> Option<Axis> {
        if self.vtype != VarType::Coordinate {
            return None;
        }
        self.axis.or_else(|| Axis::infer(&self.name))
    }

    pub fn is_binned(&self) -> bool {
        self.bins.is_some()
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.vtype, VarType::Quantitative | VarType::Coordinate)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| {
            Err(VariableError::InvalidDeclaration {
                name: self.name.clone(),
                reason: reason.to_owned(),
            })
        };
        if self.name.is_empty() {
            return invalid("empty name");
        }
        if let Some(k) = self.bins {
            if k == 0 {
                return invalid("bins must be positive");
            }
            if !self.is_numeric() {
                return invalid("bins are only allowed for quantitative or coordinate variables");
            }
        }
        if self.vtype == VarType::Coordinate && self.semantics != Semantics::Spatial {
            return invalid("coordinate variables must have spatial semantics");
        }
        if self.axis.is_some() && self.vtype != VarType::Coordinate {
            return invalid("an axis can only be attached to a coordinate variable");
        }
        Ok(())
    }

    /// Parses `NAME:TYPE:SEMANTICS[:bins=K][:axis=latitude|longitude]`.
    /// Options are taken from the right, so the name itself may contain `:`.
    pub fn parse(spec: &str) -> Result<Self> {
        let syntax = || VariableError::Syntax(spec.to_owned());
        let mut parts: Vec<&str> = spec.split(':').collect();
        let mut bins = None;
        let mut axis = None;
        while let Some(last) = parts.last() {
            if let Some(k) = last.strip_prefix("bins=") {
                bins = Some(k.parse::<u32>().map_err(|_| syntax())?);
            } else if let Some(a) = last.strip_prefix("axis=") {
                axis = Some(a.parse::<Axis>().map_err(|_| syntax())?);
            } else {
                break;
            }
            parts.pop();
        }
        if parts.len() < 3 {
            return Err(syntax());
        }
        let semantics = parts.pop().unwrap().parse().map_err(|_| syntax())?;
        let vtype = parts.pop().unwrap().parse().map_err(|_| syntax())?;
        let decl = VariableDecl {
            name: parts.join(":"),
            vtype,
            semantics,
            bins,
            axis,
        };
        decl.validate()?;
        Ok(decl)
    }
}

/// Joint assignment of all declared variables for one logical row.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueTuple(pub Vec<String>);

impl ValueTuple {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ValueTuple(values.into_iter().map(Into::into).collect())
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[String] {
        &self.0
    }

    /// Values joined by `::`. Every `:` inside a value is written `\:` and
    /// every `\` as `\\`, so a literal `::` becomes `\:\:` and the encoding
    /// stays injective.
    pub fn to_key(&self) -> String {
        let mut out = String::new();
        for (i, value) in self.0.iter().enumerate() {
            if i > 0 {
                out.push_str(TUPLE_SEPARATOR);
            }
            for c in value.chars() {
                match c {
                    '\\' => out.push_str("\\\\"),
                    ':' => out.push_str("\\:"),
                    c => out.push(c),
                }
            }
        }
        out
    }

    pub fn from_key(key: &str, arity: usize) -> Result<Self> {
        let malformed = |reason: &str| VariableError::MalformedTupleKey {
            key: key.to_owned(),
            reason: reason.to_owned(),
        };
        if arity == 0 {
            return if key.is_empty() {
                Ok(ValueTuple::default())
            } else {
                Err(malformed("expected the empty key for zero variables"))
            };
        }
        let mut values = vec![String::new()];
        let mut chars = key.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some(e @ ('\\' | ':')) => values.last_mut().unwrap().push(e),
                    _ => return Err(malformed("dangling escape")),
                },
                ':' => {
                    if chars.next() != Some(':') {
                        return Err(malformed("unescaped `:`"));
                    }
                    values.push(String::new());
                }
                c => values.last_mut().unwrap().push(c),
            }
        }
        if values.len() != arity {
            return Err(malformed(&format!(
                "expected {arity} values, found {}",
                values.len()
            )));
        }
        Ok(ValueTuple(values))
    }
}

impl fmt::Display for ValueTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key())
    }
}

/// Equal-width bins over `[min, max]`; the last bin is right-closed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinScheme {
    pub min: f64,
    pub max: f64,
    pub k: u32,
}

impl BinScheme {
    pub fn width(&self) -> f64 {
        (self.max - self.min) / f64::from(self.k)
    }

    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    pub fn index(&self, v: f64) -> usize {
        if self.is_degenerate() {
            return 0;
        }
        // (v - min) * k / range rather than (v - min) / width: with this
        // form the index at 2k is exactly twice-or-twice-plus-one the index at k
        let t = (v - self.min) * f64::from(self.k) / (self.max - self.min);
        let last = self.k as usize - 1;
        if t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(last)
        }
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        if self.is_degenerate() {
            return (self.min, self.max);
        }
        let lo = self.min + i as f64 * self.width();
        let hi = if i + 1 == self.k as usize {
            self.max
        } else {
            self.min + (i + 1) as f64 * self.width()
        };
        (lo, hi)
    }

    pub fn label(&self, i: usize) -> String {
        let (lo, hi) = self.bounds(i);
        let close = if i + 1 >= self.k as usize || self.is_degenerate() {
            ']'
        } else {
            ')'
        };
        format!("[{lo:.6}, {hi:.6}{close}")
    }

    /// Inverse of [`BinScheme::label`] for labels this scheme produced.
    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        let (lo, hi) = parse_bin_label(label)?;
        let mid = (lo + hi) / 2.0;
        let i = self.index(mid);
        (self.label(i) == label).then_some(i)
    }
}

/// Parses `[lo, hi)` / `[lo, hi]` into its bounds.
pub fn parse_bin_label(label: &str) -> Option<(f64, f64)> {
    let inner = label
        .strip_prefix('[')?
        .strip_suffix(')')
        .or_else(|| label.strip_prefix('[')?.strip_suffix(']'))?;
    let (lo, hi) = inner.split_once(", ")?;
    Some((lo.parse().ok()?, hi.parse().ok()?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binned {
    pub scheme: BinScheme,
    pub indices: Vec<usize>,
    pub labels: Vec<String>,
    /// Set when all values are equal but more than one bin was requested.
    pub degenerate: bool,
}

pub fn bin_values(values: &[f64], k: u32) -> Result<Binned> {
    if k == 0 {
        return Err(VariableError::InvalidDeclaration {
            name: String::new(),
            reason: "bins must be positive".into(),
        });
    }
    let (min, max) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .ok_or(VariableError::NoValues)?;
    let scheme = BinScheme { min, max, k };
    let indices: Vec<usize> = values.iter().map(|&v| scheme.index(v)).collect();
    let labels = indices.iter().map(|&i| scheme.label(i)).collect();
    Ok(Binned {
        scheme,
        indices,
        labels,
        degenerate: scheme.is_degenerate() && k > 1,
    })
}

/// Numeric-aware comparison: numbers order by value and sort before
/// non-numbers, which order by code point.
pub fn numeric_aware_cmp(a: &str, b: &str) -> Ordering {
    match (parse_number(a), parse_number(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

/// Temporal ordering: ISO-8601 dates/datetimes first (chronologically),
/// then numbers, then everything else by code point.
pub fn temporal_cmp(a: &str, b: &str) -> Ordering {
    match (parse_temporal(a), parse_temporal(b)) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => numeric_aware_cmp(a, b),
    }
}

pub fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Seconds since the epoch for ISO-8601 dates, datetimes and year-months.
pub fn parse_temporal(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d"))
        .ok()?;
    Some(date.and_hms_opt(0, 0, 0)?.and_utc().timestamp())
}

/// Distinct values of one variable in display order, with its bin scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableInventory {
    #[serde(flatten)]
    pub decl: VariableDecl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<BinScheme>,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TupleAssignment {
    pub decls: Vec<VariableDecl>,
    pub tuples: Vec<ValueTuple>,
    pub inventories: Vec<VariableInventory>,
    pub warnings: Vec<String>,
}

/// Declarations effectively applied to a table: the given ones plus the
/// implicit text-source variable when the table has two text columns.
pub fn effective_decls(table: &AnalysisTable, decls: &[VariableDecl]) -> Vec<VariableDecl> {
    let mut out = decls.to_vec();
    if table.has_text_source() && !out.iter().any(|d| d.name == TEXT_SOURCE_VARIABLE) {
        out.push(VariableDecl::text_source());
    }
    out
}

pub fn assign_tuples(table: &AnalysisTable, decls: &[VariableDecl]) -> Result<TupleAssignment> {
    let decls = effective_decls(table, decls);
    let mut columns: Vec<Vec<String>> = Vec::with_capacity(decls.len());
    let mut inventories = Vec::with_capacity(decls.len());
    let mut warnings = Vec::new();

    for decl in &decls {
        decl.validate()?;
        let col = table
            .variable_columns()
            .iter()
            .position(|c| *c == decl.name)
            .ok_or_else(|| VariableError::UnknownVariableColumn(decl.name.clone()))?;
        let cells = table.rows().iter().map(|r| (r.physical, r.values[col].as_str()));
        let (values, scheme) = if decl.is_numeric() {
            numeric_column(decl, cells, &mut warnings)?
        } else {
            let values = cells
                .map(|(_, c)| if c.is_empty() { MISSING_VALUE.to_owned() } else { c.to_owned() })
                .collect();
            (values, None)
        };
        inventories.push(VariableInventory {
            decl: decl.clone(),
            values: display_order(decl, scheme.as_ref(), &values),
            scheme,
        });
        columns.push(values);
    }

    let tuples = (0..table.row_count())
        .map(|r| ValueTuple(columns.iter().map(|c| c[r].clone()).collect()))
        .collect();
    Ok(TupleAssignment {
        decls,
        tuples,
        inventories,
        warnings,
    })
}

fn numeric_column<'a>(
    decl: &VariableDecl,
    cells: impl Iterator<Item = (usize, &'a str)>,
    warnings: &mut Vec<String>,
) -> Result<(Vec<String>, Option<BinScheme>)> {
    let axis = decl.coordinate_axis();
    let mut raw = Vec::new();
    let mut parsed: Vec<Option<f64>> = Vec::new();
    for (physical, cell) in cells {
        raw.push(cell);
        if cell.is_empty() {
            parsed.push(None);
            continue;
        }
        let v = parse_number(cell).ok_or_else(|| VariableError::NonNumericValue {
            variable: decl.name.clone(),
            row: physical + 1,
            value: cell.to_owned(),
        })?;
        if let Some(axis) = axis {
            if v.abs() > axis.limit() {
                return Err(VariableError::CoordinateOutOfRange {
                    variable: decl.name.clone(),
                    row: physical + 1,
                    value: v,
                    axis,
                });
            }
        }
        parsed.push(Some(v));
    }

    let Some(k) = decl.bins else {
        let values = raw
            .iter()
            .map(|c| if c.is_empty() { MISSING_VALUE.to_owned() } else { (*c).to_owned() })
            .collect();
        return Ok((values, None));
    };
    let present: Vec<f64> = parsed.iter().flatten().copied().collect();
    if present.is_empty() {
        return Ok((vec![MISSING_VALUE.to_owned(); raw.len()], None));
    }
    let binned = bin_values(&present, k)?;
    if binned.degenerate {
        warnings.push(format!(
            "variable `{}`: all values equal {}, using a single bin (DegenerateRange)",
            decl.name, binned.scheme.min
        ));
    }
    let mut labels = binned.labels.into_iter();
    let values = parsed
        .iter()
        .map(|p| match p {
            Some(_) => labels.next().expect("one label per present value"),
            None => MISSING_VALUE.to_owned(),
        })
        .collect();
    Ok((values, Some(binned.scheme)))
}

fn display_order(decl: &VariableDecl, scheme: Option<&BinScheme>, values: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&String> = values.iter().collect();
    let mut out: Vec<String> = distinct.into_iter().cloned().collect();
    // missing values always go last
    let missing_last = |a: &String, b: &String| {
        (a == MISSING_VALUE).cmp(&(b == MISSING_VALUE))
    };
    match (scheme, decl.vtype, decl.semantics) {
        (Some(s), _, _) => out.sort_by(|a, b| {
            missing_last(a, b).then_with(|| {
                let ia = s.index_of_label(a).unwrap_or(usize::MAX);
                let ib = s.index_of_label(b).unwrap_or(usize::MAX);
                ia.cmp(&ib)
            })
        }),
        (None, VarType::Quantitative | VarType::Coordinate, _) => {
            out.sort_by(|a, b| missing_last(a, b).then_with(|| numeric_aware_cmp(a, b)))
        }
        (None, _, Semantics::Temporal) => {
            out.sort_by(|a, b| missing_last(a, b).then_with(|| temporal_cmp(a, b)))
        }
        (None, VarType::Ordinal, _) => {
            out.sort_by(|a, b| missing_last(a, b).then_with(|| numeric_aware_cmp(a, b)))
        }
        (None, VarType::Nominal, _) => out.sort_by(|a, b| missing_last(a, b).then_with(|| a.cmp(b))),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_dataset, select_columns, DatasetSource, Format};
    use proptest::prelude::*;

    fn table(csv: &str, texts: &[&str], vars: &[&str]) -> AnalysisTable {
        let raw = load_dataset(&DatasetSource::inline(csv, Format::Csv)).unwrap();
        let texts: Vec<_> = texts.iter().map(|&t| t.into()).collect();
        let vars: Vec<_> = vars.iter().map(|&v| v.into()).collect();
        select_columns(&raw, &texts, &vars).unwrap()
    }

    #[test]
    fn bin_example() {
        let values = [0.0, 2.5, 7.0, 10.0];
        let b = bin_values(&values, 5).unwrap();
        // oracle: floor((v - min) / width) with width = 2
        let width = 2.0;
        assert_eq!(((7.0f64 - 0.0) / width).floor() as usize, 3);
        assert_eq!(b.indices[2], 3);
        assert_eq!(b.labels[2], "[6.000000, 8.000000)");
        assert_eq!(b.indices[3], 4);
        assert_eq!(b.labels[3], "[8.000000, 10.000000]");
        assert!(!b.degenerate);
    }

    #[test]
    fn degenerate_range() {
        let b = bin_values(&[4.0, 4.0, 4.0], 3).unwrap();
        assert!(b.degenerate);
        assert!(b.indices.iter().all(|&i| i == 0));
        assert_eq!(b.labels[0], "[4.000000, 4.000000]");
        assert!(!bin_values(&[4.0], 1).unwrap().degenerate);
    }

    #[test]
    fn bin_errors() {
        assert_eq!(bin_values(&[], 3), Err(VariableError::NoValues));
        assert!(bin_values(&[1.0], 0).is_err());
    }

    #[test]
    fn label_round_trip() {
        let s = BinScheme { min: -3.5, max: 11.25, k: 7 };
        for i in 0..7 {
            assert_eq!(s.index_of_label(&s.label(i)), Some(i));
        }
        assert_eq!(s.index_of_label("nonsense"), None);
    }

    #[test]
    fn decl_parse() {
        let d = VariableDecl::parse("lat:coordinate:spatial:bins=30").unwrap();
        assert_eq!(d.vtype, VarType::Coordinate);
        assert_eq!(d.bins, Some(30));
        assert_eq!(d.coordinate_axis(), Some(Axis::Latitude));

        let d = VariableDecl::parse("y_pos:coordinate:spatial:axis=longitude:bins=4").unwrap();
        assert_eq!(d.axis, Some(Axis::Longitude));
        assert_eq!(d.bins, Some(4));

        let d = VariableDecl::parse("time:of:day:ordinal:temporal").unwrap();
        assert_eq!(d.name, "time:of:day");

        assert!(matches!(VariableDecl::parse("region:nominal"), Err(VariableError::Syntax(_))));
        assert!(matches!(VariableDecl::parse("r:colour:general"), Err(VariableError::Syntax(_))));
        assert!(matches!(
            VariableDecl::parse("region:nominal:spatial:bins=3"),
            Err(VariableError::InvalidDeclaration { .. })
        ));
        assert!(matches!(
            VariableDecl::parse("lat:coordinate:general"),
            Err(VariableError::InvalidDeclaration { .. })
        ));
    }

    #[test]
    fn tuple_keys() {
        let t = ValueTuple::new(["2", "black"]);
        assert_eq!(t.to_key(), "2::black");
        assert_eq!(ValueTuple::from_key("2::black", 2).unwrap(), t);

        let tricky = ValueTuple::new(["a::b", "c"]);
        assert_eq!(tricky.to_key(), "a\\:\\:b::c");
        assert_eq!(ValueTuple::from_key(&tricky.to_key(), 2).unwrap(), tricky);

        assert_eq!(ValueTuple::default().to_key(), "");
        assert_eq!(ValueTuple::from_key("", 0).unwrap(), ValueTuple::default());
        assert!(ValueTuple::from_key("a::b", 3).is_err());
        assert!(ValueTuple::from_key("a:b", 1).is_err());
        assert!(ValueTuple::from_key("a\\", 1).is_err());
    }

    #[test]
    fn nominal_tuple() {
        let t = table("text,region\nghe xe,Veneto\n", &["text"], &["region"]);
        let decls = [VariableDecl::new("region", VarType::Nominal, Semantics::Spatial)];
        let a = assign_tuples(&t, &decls).unwrap();
        assert_eq!(a.tuples, [ValueTuple::new(["Veneto"])]);
    }

    #[test]
    fn two_nominal_variables() {
        let t = table(
            "text,hatespeech,annotator_race\nsome text,2,black\nmore,2,white\n",
            &["text"],
            &["hatespeech", "annotator_race"],
        );
        let decls = [
            VariableDecl::new("hatespeech", VarType::Nominal, Semantics::General),
            VariableDecl::new("annotator_race", VarType::Nominal, Semantics::General),
        ];
        let a = assign_tuples(&t, &decls).unwrap();
        assert_eq!(a.tuples[0], ValueTuple::new(["2", "black"]));
        assert_eq!(a.tuples[0].to_key(), "2::black");
        assert_eq!(a.inventories[1].values, ["black", "white"]);
    }

    #[test]
    fn binned_coordinates() {
        let t = table(
            "text,lat,lon\na,45.0,7.0\nb,41.0,12.5\nc,38.0,15.6\n",
            &["text"],
            &["lat", "lon"],
        );
        let decls = [
            VariableDecl::parse("lat:coordinate:spatial:bins=30").unwrap(),
            VariableDecl::parse("lon:coordinate:spatial:bins=30").unwrap(),
        ];
        let a = assign_tuples(&t, &decls).unwrap();
        for tuple in &a.tuples {
            assert_eq!(tuple.arity(), 2);
            assert!(tuple.values().iter().all(|v| v.starts_with('[')));
        }
        assert_eq!(a.tuples[0].values()[0], "[44.766667, 45.000000]");
        assert_eq!(a.inventories[0].scheme.unwrap().k, 30);
        assert_eq!(a.inventories[0].values.len(), 3);
        assert_eq!(a.inventories[0].values[0], "[38.000000, 38.233333)");
    }

    #[test]
    fn numeric_errors() {
        let t = table("text,score\na,1.5\nb,high\n", &["text"], &["score"]);
        let decls = [VariableDecl::new("score", VarType::Quantitative, Semantics::General)];
        assert_eq!(
            assign_tuples(&t, &decls),
            Err(VariableError::NonNumericValue {
                variable: "score".into(),
                row: 2,
                value: "high".into()
            })
        );

        let t = table("text,lat\na,95\n", &["text"], &["lat"]);
        let decls = [VariableDecl::new("lat", VarType::Coordinate, Semantics::Spatial)];
        assert!(matches!(
            assign_tuples(&t, &decls),
            Err(VariableError::CoordinateOutOfRange { row: 1, .. })
        ));
    }

    #[test]
    fn unknown_variable_column() {
        let t = table("text,region\na,X\n", &["text"], &["region"]);
        let decls = [VariableDecl::new("province", VarType::Nominal, Semantics::Spatial)];
        assert_eq!(
            assign_tuples(&t, &decls),
            Err(VariableError::UnknownVariableColumn("province".into()))
        );
    }

    #[test]
    fn missing_cells_become_their_own_value() {
        let t = table("text,region,score\na,,\nb,X,3\n", &["text"], &["region", "score"]);
        let decls = [
            VariableDecl::new("region", VarType::Nominal, Semantics::General),
            VariableDecl::new("score", VarType::Quantitative, Semantics::General).with_bins(2),
        ];
        let a = assign_tuples(&t, &decls).unwrap();
        assert_eq!(a.tuples[0], ValueTuple::new([MISSING_VALUE, MISSING_VALUE]));
        assert_eq!(a.inventories[0].values, ["X", MISSING_VALUE]);
    }

    #[test]
    fn ordinal_and_temporal_order() {
        let t = table(
            "text,level,date\na,10,2021-03-01\nb,9,2020-12-31\nc,high,2021-01\nd,2,unknown\n",
            &["text"],
            &["level", "date"],
        );
        let decls = [
            VariableDecl::new("level", VarType::Ordinal, Semantics::General),
            VariableDecl::new("date", VarType::Nominal, Semantics::Temporal),
        ];
        let a = assign_tuples(&t, &decls).unwrap();
        assert_eq!(a.inventories[0].values, ["2", "9", "10", "high"]);
        assert_eq!(
            a.inventories[1].values,
            ["2020-12-31", "2021-01", "2021-03-01", "unknown"]
        );
    }

    #[test]
    fn implicit_text_source_decl() {
        let t = table("h,c\nx,y\n", &["h", "c"], &[]);
        let a = assign_tuples(&t, &[]).unwrap();
        assert_eq!(a.decls, [VariableDecl::text_source()]);
        assert_eq!(a.tuples, [ValueTuple::new(["h"]), ValueTuple::new(["c"])]);
        assert_eq!(a.inventories[0].values, ["c", "h"]);
    }

    #[test]
    fn deterministic_assignment() {
        let csv = "text,a,b\nx,1,p\ny,2,q\nz,1,q\n";
        let decls = [
            VariableDecl::new("a", VarType::Ordinal, Semantics::General),
            VariableDecl::new("b", VarType::Nominal, Semantics::General),
        ];
        let t = table(csv, &["text"], &["a", "b"]);
        assert_eq!(assign_tuples(&t, &decls), assign_tuples(&t, &decls));
    }

    proptest! {
        #[test]
        fn tuple_key_injective(a in prop::collection::vec("[a:\\\\b]{0,4}", 1..4),
                               b in prop::collection::vec("[a:\\\\b]{0,4}", 1..4)) {
            let ta = ValueTuple(a.clone());
            let tb = ValueTuple(b.clone());
            prop_assert_eq!(ValueTuple::from_key(&ta.to_key(), a.len()).unwrap(), ta.clone());
            if a.len() == b.len() && a != b {
                prop_assert_ne!(ta.to_key(), tb.to_key());
            }
        }

        #[test]
        fn binning_is_monotone(mut values in prop::collection::vec(-1e6f64..1e6, 1..40), k in 1u32..50) {
            values.sort_by(f64::total_cmp);
            let b = bin_values(&values, k).unwrap();
            prop_assert!(b.indices.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(b.indices.iter().all(|&i| i < k as usize));
            prop_assert_eq!(*b.indices.last().unwrap(), if b.scheme.is_degenerate() { 0 } else { k as usize - 1 });
        }

        #[test]
        fn doubling_refines(values in prop::collection::vec(-500f64..500.0, 2..40), k in 1u32..40) {
            let coarse = bin_values(&values, k).unwrap();
            let fine = bin_values(&values, 2 * k).unwrap();
            for i in 0..values.len() {
                prop_assert_eq!(fine.indices[i] / 2, coarse.indices[i]);
            }
        }

        #[test]
        fn single_bin(values in prop::collection::vec(-10f64..10.0, 1..20)) {
            let b = bin_values(&values, 1).unwrap();
            prop_assert!(b.indices.iter().all(|&i| i == 0));
        }

        #[test]
        fn numeric_aware_is_total(mut v in prop::collection::vec("[0-9a-c.]{0,4}", 0..20)) {
            v.sort_by(|a, b| numeric_aware_cmp(a, b));
            for w in v.windows(2) {
                prop_assert_ne!(numeric_aware_cmp(&w[0], &w[1]), Ordering::Greater);
            }
        }
    }
}
