//! Dataset ingestion: CSV/TSV loading, column resolution and the
//! [`AnalysisTable`] view the rest of the pipeline works on.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the implicit variable added when two text columns are analysed together.
pub const TEXT_SOURCE_VARIABLE: &str = "__text_source__";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("malformed row at line {line}: expected {expected} fields, found {found}")]
    MalformedRow {
        line: u64,
        expected: u64,
        found: u64,
    },
    #[error("invalid UTF-8 at line {line}")]
    Encoding { line: u64 },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("at least one text column is required")]
    NoTextColumns,
    #[error("at most two text columns are supported, got {0}")]
    TooManyTextColumns(usize),
    #[error("column {0} is selected more than once")]
    OverlappingSelection(String),
    #[error("dataset has no analysable rows")]
    EmptyDataset,
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Csv,
}

impl Format {
    pub fn delimiter(self) -> u8 {
        match self {
            Format::Tsv => b'\t',
            Format::Csv => b',',
        }
    }

    /// Guesses the format from a file extension; anything but `.tsv`/`.tab` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => {
                Format::Tsv
            }
            _ => Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Path(PathBuf),
    Inline(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub location: Location,
    pub format: Format,
    #[serde(default = "default_true")]
    pub has_header: bool,
}

fn default_true() -> bool {
    true
}

impl DatasetSource {
    pub fn path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        DatasetSource {
            format: Format::from_path(&path),
            location: Location::Path(path),
            has_header: true,
        }
    }

    pub fn inline(data: impl Into<String>, format: Format) -> Self {
        DatasetSource {
            location: Location::Inline(data.into()),
            format,
            has_header: true,
        }
    }

    pub fn without_header(mut self) -> Self {
        self.has_header = false;
        self
    }

    /// Opens the source as a row-at-a-time reader. The header row, when
    /// declared, is returned separately and not yielded as a record.
    pub fn open(&self) -> Result<RecordReader> {
        let input: Box<dyn Read> = match &self.location {
            Location::Path(path) => match File::open(path) {
                Ok(file) => Box::new(BufReader::new(file)),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Err(CorpusError::FileNotFound(path.clone()))
                }
                Err(e) => return Err(e.into()),
            },
            Location::Inline(data) => Box::new(io::Cursor::new(data.clone().into_bytes())),
        };
        let mut builder = csv::ReaderBuilder::new();
        builder
            .delimiter(self.format.delimiter())
            .has_headers(false)
            .flexible(false);
        if self.format == Format::Tsv {
            builder.quoting(false);
        }
        let mut reader = RecordReader {
            inner: builder.from_reader(input),
            headers: None,
        };
        if self.has_header {
            reader.headers = reader.next().transpose()?;
        }
        Ok(reader)
    }
}

/// Streaming access to the records of a [`DatasetSource`].
pub struct RecordReader {
    inner: csv::Reader<Box<dyn Read>>,
    headers: Option<Vec<String>>,
}

impl RecordReader {
    pub fn headers(&self) -> Option<&[String]> {
        self.headers.as_deref()
    }
}

impl Iterator for RecordReader {
    type Item = Result<Vec<String>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = csv::StringRecord::new();
        match self.inner.read_record(&mut record) {
            Ok(true) => Some(Ok(record.iter().map(str::to_owned).collect())),
            Ok(false) => None,
            Err(e) => Some(Err(convert_csv_error(e))),
        }
    }
}

fn convert_csv_error(err: csv::Error) -> CorpusError {
    match err.into_kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => CorpusError::MalformedRow {
            line: pos.map(|p| p.line()).unwrap_or(0),
            expected: expected_len,
            found: len,
        },
        csv::ErrorKind::Utf8 { pos, .. } => CorpusError::Encoding {
            line: pos.map(|p| p.line()).unwrap_or(0),
        },
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        other => CorpusError::Io(io::Error::other(format!("{other:?}"))),
    }
}

/// A rectangular table of string cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawTable {
    pub headers: Option<Vec<String>>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn width(&self) -> usize {
        self.headers
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }

    /// Display name of a column: its header when present, else its index.
    pub fn column_name(&self, index: usize) -> String {
        match &self.headers {
            Some(h) => h[index].clone(),
            None => index.to_string(),
        }
    }

    pub fn resolve(&self, column: &ColumnRef) -> Result<usize> {
        let width = self.width();
        match column {
            ColumnRef::Index(i) if *i < width => Ok(*i),
            ColumnRef::Name(name) => self
                .headers
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| CorpusError::UnknownColumn(column.to_string())),
            _ => Err(CorpusError::UnknownColumn(column.to_string())),
        }
    }
}

pub fn load_dataset(source: &DatasetSource) -> Result<RawTable> {
    let mut reader = source.open()?;
    let rows = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let headers = reader.headers;
    if let (Some(h), Some(first)) = (&headers, rows.first()) {
        // the csv reader only checks records against each other
        if h.len() != first.len() {
            return Err(CorpusError::MalformedRow {
                line: 2,
                expected: h.len() as u64,
                found: first.len() as u64,
            });
        }
    }
    Ok(RawTable { headers, rows })
}

/// Column reference: a header name or a zero-based index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    /// Digits-only strings become indices, anything else a name.
    pub fn parse(s: &str) -> Self {
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(i) = s.parse() {
                return ColumnRef::Index(i);
            }
        }
        ColumnRef::Name(s.to_owned())
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => write!(f, "`{n}`"),
        }
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_owned())
    }
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

/// One text instance: a non-empty text cell plus the variable cells of its row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalRow {
    /// Zero-based index of the physical data row.
    pub physical: usize,
    pub text: String,
    pub values: Vec<String>,
}

/// Validated view of a dataset: 1-2 text columns plus ordered variable columns.
///
/// With two text columns each physical row yields one logical row per
/// non-empty text cell, and the implicit [`TEXT_SOURCE_VARIABLE`] records
/// which column the text came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisTable {
    text_columns: Vec<String>,
    variable_columns: Vec<String>,
    rows: Vec<LogicalRow>,
    physical_rows: usize,
}

impl AnalysisTable {
    pub fn text_columns(&self) -> &[String] {
        &self.text_columns
    }

    /// Variable column names, including the implicit text-source variable.
    pub fn variable_columns(&self) -> &[String] {
        &self.variable_columns
    }

    pub fn rows(&self) -> &[LogicalRow] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn physical_row_count(&self) -> usize {
        self.physical_rows
    }

    pub fn has_text_source(&self) -> bool {
        self.text_columns.len() == 2
    }
}

pub fn select_columns(
    table: &RawTable,
    texts: &[ColumnRef],
    variables: &[ColumnRef],
) -> Result<AnalysisTable> {
    match texts.len() {
        0 => return Err(CorpusError::NoTextColumns),
        1 | 2 => {}
        n => return Err(CorpusError::TooManyTextColumns(n)),
    }
    let text_idx = texts
        .iter()
        .map(|c| table.resolve(c))
        .collect::<Result<Vec<_>>>()?;
    let var_idx = variables
        .iter()
        .map(|c| table.resolve(c))
        .collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::new();
    for &i in text_idx.iter().chain(&var_idx) {
        if !seen.insert(i) {
            return Err(CorpusError::OverlappingSelection(table.column_name(i)));
        }
    }

    let text_columns: Vec<String> = text_idx.iter().map(|&i| table.column_name(i)).collect();
    let mut variable_columns: Vec<String> =
        var_idx.iter().map(|&i| table.column_name(i)).collect();
    let dual = text_idx.len() == 2;
    if dual {
        variable_columns.push(TEXT_SOURCE_VARIABLE.to_owned());
    }

    let mut rows = Vec::with_capacity(table.rows.len() * text_idx.len());
    for (physical, record) in table.rows.iter().enumerate() {
        for (source, &ti) in text_idx.iter().enumerate() {
            let text = &record[ti];
            if text.is_empty() {
                continue;
            }
            let mut values: Vec<String> = var_idx.iter().map(|&vi| record[vi].clone()).collect();
            if dual {
                values.push(text_columns[source].clone());
            }
            rows.push(LogicalRow {
                physical,
                text: text.clone(),
                values,
            });
        }
    }
    if rows.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }

    Ok(AnalysisTable {
        text_columns,
        variable_columns,
        rows,
        physical_rows: table.rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv(data: &str) -> DatasetSource {
        DatasetSource::inline(data, Format::Csv)
    }

    #[test]
    fn smallest_csv_with_header() {
        let t = load_dataset(&csv("t,l\na b,A\nc,B")).unwrap();
        assert_eq!(t.headers, Some(vec!["t".into(), "l".into()]));
        assert_eq!(t.rows, vec![vec!["a b", "A"], vec!["c", "B"]]);
    }

    #[test]
    fn ragged_tsv_names_line() {
        let src = DatasetSource::inline("a\tb\nx\ty\nonly\n", Format::Tsv);
        match load_dataset(&src) {
            Err(CorpusError::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn ragged_second_line_against_header() {
        let src = DatasetSource::inline("a\tb\nx\n", Format::Tsv);
        assert!(matches!(
            load_dataset(&src),
            Err(CorpusError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn quoted_cell_keeps_delimiter_and_quotes() {
        let t = load_dataset(&csv("t\n\"a, b\"\n\"say \"\"hi\"\"\"\n")).unwrap();
        assert_eq!(t.rows[0][0], "a, b");
        assert_eq!(t.rows[1][0], "say \"hi\"");
    }

    #[test]
    fn tsv_does_not_interpret_quotes() {
        let src = DatasetSource::inline("t\tl\n\"quoted\"\tA\n", Format::Tsv);
        let t = load_dataset(&src).unwrap();
        assert_eq!(t.rows[0][0], "\"quoted\"");
    }

    #[test]
    fn whitespace_is_preserved() {
        let t = load_dataset(&csv("t\n  padded  \n")).unwrap();
        assert_eq!(t.rows[0][0], "  padded  ");
    }

    #[test]
    fn missing_file() {
        let src = DatasetSource::path("/definitely/not/here.csv");
        assert!(matches!(
            load_dataset(&src),
            Err(CorpusError::FileNotFound(_))
        ));
    }

    #[test]
    fn invalid_utf8_is_an_encoding_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, b"t\nok\n\xff\xfe\n").unwrap();
        assert!(matches!(
            load_dataset(&DatasetSource::path(&path)),
            Err(CorpusError::Encoding { line: 3 })
        ));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::from_path(Path::new("x.TSV")), Format::Tsv);
        assert_eq!(Format::from_path(Path::new("x.csv")), Format::Csv);
    }

    fn three_columns() -> RawTable {
        load_dataset(&csv("id,text,region\n1,ciao,Veneto\n2,ghe,Liguria\n3,xe,Veneto")).unwrap()
    }

    #[test]
    fn select_one_text_one_variable() {
        let t = select_columns(&three_columns(), &["text".into()], &["region".into()]).unwrap();
        assert_eq!(t.text_columns(), ["text"]);
        assert_eq!(t.variable_columns(), ["region"]);
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.rows()[1].text, "ghe");
        assert_eq!(t.rows()[1].values, ["Liguria"]);
    }

    #[test]
    fn select_by_index_without_header() {
        let raw = load_dataset(&csv("1,ciao,Veneto\n2,ghe,Liguria").without_header()).unwrap();
        let t = select_columns(&raw, &[1.into()], &[2.into()]).unwrap();
        assert_eq!(t.variable_columns(), ["2"]);
        assert!(matches!(
            select_columns(&raw, &["text".into()], &[]),
            Err(CorpusError::UnknownColumn(_))
        ));
    }

    #[test]
    fn two_text_columns_add_source_variable() {
        let raw = load_dataset(&csv(
            "q,human_answers,chatgpt_answers\nq1,h one,c one\nq2,h two,\n",
        ))
        .unwrap();
        let t = select_columns(
            &raw,
            &["human_answers".into(), "chatgpt_answers".into()],
            &[],
        )
        .unwrap();
        assert_eq!(t.variable_columns(), [TEXT_SOURCE_VARIABLE]);
        // empty second cell on row 2 is skipped
        assert_eq!(t.row_count(), 3);
        let sources: Vec<_> = t.rows().iter().map(|r| r.values[0].as_str()).collect();
        assert_eq!(sources, ["human_answers", "chatgpt_answers", "human_answers"]);
    }

    #[test]
    fn both_texts_inherit_row_variables() {
        let raw = load_dataset(&csv("a,b,src\nx,y,reddit\n")).unwrap();
        let t = select_columns(&raw, &["a".into(), "b".into()], &["src".into()]).unwrap();
        for row in t.rows() {
            assert_eq!(row.values[0], "reddit");
        }
    }

    #[test]
    fn selection_errors() {
        let raw = three_columns();
        assert!(matches!(
            select_columns(&raw, &["text".into(), "text".into()], &[]),
            Err(CorpusError::OverlappingSelection(_))
        ));
        assert!(matches!(
            select_columns(&raw, &["text".into()], &["text".into()]),
            Err(CorpusError::OverlappingSelection(_))
        ));
        assert!(matches!(
            select_columns(&raw, &["id".into(), "text".into(), "region".into()], &[]),
            Err(CorpusError::TooManyTextColumns(3))
        ));
        assert!(matches!(
            select_columns(&raw, &[], &[]),
            Err(CorpusError::NoTextColumns)
        ));
        assert!(matches!(
            select_columns(&raw, &["nope".into()], &[]),
            Err(CorpusError::UnknownColumn(_))
        ));
        assert!(matches!(
            select_columns(&raw, &[9.into()], &[]),
            Err(CorpusError::UnknownColumn(_))
        ));
    }

    #[test]
    fn column_ref_parse() {
        assert_eq!(ColumnRef::parse("3"), ColumnRef::Index(3));
        assert_eq!(ColumnRef::parse("text"), ColumnRef::Name("text".into()));
        assert_eq!(ColumnRef::parse("3a"), ColumnRef::Name("3a".into()));
    }

    fn write_table(table: &RawTable, format: Format) -> String {
        let mut w = csv::WriterBuilder::new()
            .delimiter(format.delimiter())
            .from_writer(Vec::new());
        if let Some(h) = &table.headers {
            w.write_record(h).unwrap();
        }
        for row in &table.rows {
            w.write_record(row).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            prop::collection::vec("[a-z ,\"\n\u{e9}\u{3b1}]{1,6}", 3), 1..8)) {
            let table = RawTable { headers: Some(vec!["a".into(), "b".into(), "c".into()]), rows };
            let text = write_table(&table, Format::Csv);
            let reloaded = load_dataset(&DatasetSource::inline(text, Format::Csv)).unwrap();
            prop_assert_eq!(reloaded, table);
        }

        #[test]
        fn dual_text_row_count(cells in prop::collection::vec(("[a-z]{1,3}", "[a-z]{0,3}"), 1..20)) {
            let rows: Vec<Vec<String>> = cells.iter().map(|(a, b)| vec![a.clone(), b.clone()]).collect();
            let raw = RawTable { headers: Some(vec!["a".into(), "b".into()]), rows };
            let t = select_columns(&raw, &["a".into(), "b".into()], &[]).unwrap();
            let empty = cells.iter().filter(|(_, b)| b.is_empty()).count();
            prop_assert_eq!(t.row_count(), 2 * cells.len() - empty);
            prop_assert_eq!(t.physical_row_count(), cells.len());
        }
    }
}
