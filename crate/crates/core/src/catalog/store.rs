//! `data/<id>.csv` plus `data/<id>.meta.json`.
//!
//! Nulls are written as empty CSV fields. The sidecar records the title,
//! description, source URL, row count and, per column, its kind, unit and
//! null count.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CatalogError, Cell, ColumnKind, ColumnSpec, DataTable, TableMetadata, TableRef};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredDataset {
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
}

impl StoredDataset {
    pub fn paths_for(data_dir: &Path, table: &TableRef) -> Self {
        StoredDataset {
            csv_path: data_dir.join(format!("{table}.csv")),
            meta_path: data_dir.join(format!("{table}.meta.json")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    id: TableRef,
    title: String,
    description: String,
    source_url: String,
    row_count: usize,
    columns: Vec<SidecarColumn>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarColumn {
    name: String,
    kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    null_count: usize,
}

/// Writes the table and its sidecar. Both files go through temp-then-rename, so
/// a failure leaves any previous version untouched.
pub fn materialize(
    table: &DataTable,
    meta: &TableMetadata,
    data_dir: &Path,
) -> Result<StoredDataset, CatalogError> {
    if !data_dir.is_dir() {
        return Err(CatalogError::MissingDataDir(data_dir.display().to_string()));
    }
    table.validate()?;
    if table.rows.is_empty() {
        return Err(CatalogError::EmptyTable(table.table.to_string()));
    }
    let stored = StoredDataset::paths_for(data_dir, &table.table);

    let mut csv_bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_bytes);
        let csv_err = |source| CatalogError::Csv {
            path: stored.csv_path.display().to_string(),
            source,
        };
        w.write_record(table.columns.iter().map(|c| c.name.as_str()))
            .map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CatalogError::io(&stored.csv_path, e))?;
    }

    let sidecar = Sidecar {
        id: table.table.clone(),
        title: meta.title.clone(),
        description: meta.description.clone(),
        source_url: meta.source_url.clone(),
        row_count: table.rows.len(),
        columns: table
            .columns
            .iter()
            .zip(table.null_counts())
            .map(|(c, null_count)| SidecarColumn {
                name: c.name.clone(),
                kind: c.kind,
                unit: c.unit.clone().or_else(|| unit_from_meta(meta, &c.name)),
                null_count,
            })
            .collect(),
    };
    let meta_bytes = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");

    let csv_tmp = temp_with(data_dir, &csv_bytes)?;
    let meta_tmp = temp_with(data_dir, &meta_bytes)?;
    csv_tmp
        .persist(&stored.csv_path)
        .map_err(|e| CatalogError::io(&stored.csv_path, e.error))?;
    meta_tmp
        .persist(&stored.meta_path)
        .map_err(|e| CatalogError::io(&stored.meta_path, e.error))?;
    Ok(stored)
}

fn unit_from_meta(meta: &TableMetadata, name: &str) -> Option<String> {
    meta.columns
        .iter()
        .find(|c| c.name == name)
        .and_then(|c| c.unit.clone())
}

fn temp_with(dir: &Path, bytes: &[u8]) -> Result<tempfile::NamedTempFile, CatalogError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CatalogError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CatalogError::io(dir, e))?;
    Ok(tmp)
}

pub fn load_metadata(data_dir: &Path, table: &TableRef) -> Result<TableMetadata, CatalogError> {
    let path = StoredDataset::paths_for(data_dir, table).meta_path;
    read_sidecar(&path).map(|s| sidecar_to_meta(&s))
}

fn read_sidecar(path: &Path) -> Result<Sidecar, CatalogError> {
    let bytes = std::fs::read(path).map_err(|e| CatalogError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CatalogError::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
        fragment: String::from_utf8_lossy(&bytes).chars().take(160).collect(),
    })
}

fn sidecar_to_meta(s: &Sidecar) -> TableMetadata {
    TableMetadata {
        table: s.id.clone(),
        title: s.title.clone(),
        description: s.description.clone(),
        columns: s
            .columns
            .iter()
            .map(|c| ColumnSpec {
                name: c.name.clone(),
                kind: c.kind,
                unit: c.unit.clone(),
            })
            .collect(),
        source_url: s.source_url.clone(),
    }
}

/// Reloads a materialized dataset.
pub fn load_dataset(
    data_dir: &Path,
    table: &TableRef,
) -> Result<(DataTable, TableMetadata), CatalogError> {
    let meta = load_metadata(data_dir, table)?;
    let csv_path = StoredDataset::paths_for(data_dir, table).csv_path;
    let csv_err = |source| CatalogError::Csv {
        path: csv_path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(&csv_path).map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<&str> = meta.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(CatalogError::Parse {
            context: csv_path.display().to_string(),
            message: "CSV header does not match sidecar columns".into(),
            fragment: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row: Vec<Cell> = record
            .iter()
            .map(|f| (!f.is_empty()).then(|| f.to_string()))
            .collect();
        rows.push(row);
    }
    let data = DataTable {
        table: table.clone(),
        columns: meta.columns.clone(),
        rows,
    };
    data.validate()?;
    Ok((data, meta))
}

/// Metadata of every dataset materialized under `data_dir`, ordered by id.
pub fn list_datasets(data_dir: &Path) -> Result<Vec<TableMetadata>, CatalogError> {
    let entries = std::fs::read_dir(data_dir).map_err(|e| CatalogError::io(data_dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CatalogError::io(data_dir, e))?.path();
        let is_sidecar = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".meta.json"));
        if is_sidecar {
            out.push(sidecar_to_meta(&read_sidecar(&path)?));
        }
    }
    out.sort_by(|a, b| a.table.cmp(&b.table));
    Ok(out)
}
