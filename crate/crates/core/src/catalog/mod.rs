//! Statistical tables: identifiers, metadata, typed rows and their on-disk form.

mod odata;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use odata::{
    DirTransport, FixtureTransport, HttpResponse, ODataClient, Transport, TransportError, UreqTransport,
};
pub use store::{list_datasets, load_dataset, load_metadata, materialize, StoredDataset};

/// One table cell. `None` is a null; present values are kept as canonical strings.
pub type Cell = Option<String>;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("invalid table identifier {0:?}: must be non-empty ASCII alphanumeric")]
    InvalidRef(String),
    #[error("table {0} not found at endpoint")]
    NotFound(String),
    #[error("transport error for {url}: {message}")]
    Transport {
        url: String,
        message: String,
        retryable: bool,
    },
    #[error("malformed payload for {context}: {message} (near {fragment:?})")]
    Parse {
        context: String,
        message: String,
        fragment: String,
    },
    #[error("fetch of {table} failed after {pages_completed} complete page(s): {source}")]
    PartialFetch {
        table: String,
        pages_completed: usize,
        #[source]
        source: Box<CatalogError>,
    },
    #[error("page_size must be positive")]
    InvalidPageSize,
    #[error("table {0} has no rows")]
    EmptyTable(String),
    #[error("table {table}: row {row} has {got} values, expected {expected}")]
    Arity {
        table: String,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("data directory {0} does not exist")]
    MissingDataDir(String),
    #[error("no sample row: table {0} is empty")]
    NoSample(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl CatalogError {
    pub fn is_retryable(&self) -> bool {
        match self {
            CatalogError::Transport { retryable, .. } => *retryable,
            CatalogError::PartialFetch { source, .. } => source.is_retryable(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CatalogError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Catalog identifier such as `85332ENG`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TableRef(String);

impl TableRef {
    pub fn new(id: impl Into<String>) -> Result<Self, CatalogError> {
        let id = id.into();
        if id.is_empty() || id.len() > 64 || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(CatalogError::InvalidRef(id));
        }
        Ok(TableRef(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for TableRef {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableRef::new(s)
    }
}

impl TryFrom<String> for TableRef {
    type Error = CatalogError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        TableRef::new(value)
    }
}

impl From<TableRef> for String {
    fn from(value: TableRef) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    PeriodString,
    Key,
}

impl ColumnKind {
    pub fn describe(self) -> &'static str {
        match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
            ColumnKind::PeriodString => "period code stored as text",
            ColumnKind::Key => "row key",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMetadata {
    #[serde(rename = "id")]
    pub table: TableRef,
    pub title: String,
    pub description: String,
    pub columns: Vec<ColumnSpec>,
    pub source_url: String,
}

impl TableMetadata {
    /// Text embedded for retrieval: title and description joined by a newline.
    pub fn corpus_text(&self) -> String {
        format!("{}\n{}", self.title.trim(), self.description.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataTable {
    pub table: TableRef,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<Cell>>,
}

impl DataTable {
    pub fn validate(&self) -> Result<(), CatalogError> {
        check_unique_columns(&self.columns)?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(CatalogError::Arity {
                    table: self.table.to_string(),
                    row: i,
                    got: row.len(),
                    expected: self.columns.len(),
                });
            }
        }
        Ok(())
    }

    pub fn column_values(&self, idx: usize) -> impl Iterator<Item = Option<&str>> + '_ {
        self.rows
            .iter()
            .map(move |r| r.get(idx).and_then(|c| c.as_deref()))
    }

    pub fn null_counts(&self) -> Vec<usize> {
        (0..self.columns.len())
            .map(|i| self.column_values(i).filter(Option::is_none).count())
            .collect()
    }
}

pub(crate) fn check_unique_columns(columns: &[ColumnSpec]) -> Result<(), CatalogError> {
    let mut seen = std::collections::HashSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) {
            return Err(CatalogError::DuplicateColumn(c.name.clone()));
        }
    }
    Ok(())
}

/// Returns the first row of the table.
pub fn sample_row(table: &DataTable) -> Result<&[Cell], CatalogError> {
    table
        .rows
        .first()
        .map(Vec::as_slice)
        .ok_or_else(|| CatalogError::NoSample(table.table.to_string()))
}

/// Classifies a column from its name and values.
///
/// `ID` is the row key and `Periods` is always a period string. Otherwise a
/// column is numeric when every non-null value parses as a number, a period
/// string when every non-null value starts with four digits, and categorical
/// in all remaining cases.
pub fn infer_kind<'a>(name: &str, values: impl IntoIterator<Item = Option<&'a str>>) -> ColumnKind {
    if name == "ID" {
        return ColumnKind::Key;
    }
    if name == "Periods" {
        return ColumnKind::PeriodString;
    }
    let present: Vec<&str> = values.into_iter().flatten().collect();
    if present.is_empty() {
        return ColumnKind::Categorical;
    }
    if present.iter().all(|v| v.trim().parse::<f64>().is_ok()) {
        return ColumnKind::Numeric;
    }
    let year_prefixed = |v: &&str| {
        let b = v.as_bytes();
        b.len() >= 4 && b[..4].iter().all(u8::is_ascii_digit)
    };
    if present.iter().all(year_prefixed) {
        return ColumnKind::PeriodString;
    }
    ColumnKind::Categorical
}

/// Re-derives column kinds from the data. Units are kept, columns the metadata
/// marked as time dimensions stay periods, and all-null columns keep their kind.
pub(crate) fn refine_kinds(table: &mut DataTable) {
    for idx in 0..table.columns.len() {
        if table.column_values(idx).all(|v| v.is_none()) {
            continue;
        }
        let inferred = infer_kind(&table.columns[idx].name, table.column_values(idx));
        let col = &mut table.columns[idx];
        if col.kind != ColumnKind::PeriodString {
            col.kind = inferred;
        }
    }
}
