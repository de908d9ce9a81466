//! The warehouse catalog: named base tables loaded from a CSV-backed schema
//! manifest.
//!
//! Manifest format (JSON):
//!
//! ```json
//! {"tables": [{"name": "gender_dim", "file": "gender_dim.csv",
//!              "columns": [{"name": "gender_number", "type": "int"},
//!                          {"name": "description",   "type": "text"}]}]}
//! ```
//!
//! CSV files carry a header row naming the columns in manifest order; data
//! cells parse strictly against the declared type, and the empty string reads
//! as NULL.

use crate::error::{Error, Result};
use crate::relation::{Column, Relation};
use crate::value::{ColumnType, Value};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct SchemaManifest {
    pub tables: Vec<TableSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TableSpec {
    pub name: String,
    pub file: String,
    pub columns: Vec<ColumnSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

/// All base tables of the loaded warehouse, keyed by lower-case name.
#[derive(Debug, Default, Clone)]
pub struct Catalog {
    tables: BTreeMap<String, Relation>,
}

impl Catalog {
    pub fn new() -> Catalog {
        Catalog::default()
    }

    /// Load every table listed in a schema manifest. CSV paths are resolved
    /// relative to the manifest file.
    pub fn load_manifest(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let manifest: SchemaManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut catalog = Catalog::new();
        for spec in &manifest.tables {
            let columns: Vec<Column> = spec
                .columns
                .iter()
                .map(|c| Column::new(c.name.to_lowercase(), c.ty))
                .collect();
            let rel = load_csv(&base.join(&spec.file), &spec.name, columns)?;
            catalog.insert(&spec.name.to_lowercase(), rel)?;
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, name: &str, rel: Relation) -> Result<()> {
        if self.tables.contains_key(name) {
            return Err(Error::Manifest(format!("table defined twice: {name}")));
        }
        self.tables.insert(name.to_string(), rel);
        Ok(())
    }

    /// Replace a table's rows in place (data-change entry point for tests and
    /// maintenance drills). The table must already exist.
    pub fn replace(&mut self, name: &str, rel: Relation) -> Result<()> {
        match self.tables.get_mut(name) {
            Some(slot) => {
                *slot = rel;
                Ok(())
            }
            None => Err(Error::UnknownTable(name.to_string())),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Relation> {
        self.tables.remove(name)
    }

    pub fn get(&self, name: &str) -> Result<&Relation> {
        self.tables.get(name).ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// Load one CSV file against a declared schema. The header must name exactly
/// the declared columns in order (case-insensitive); every data cell must
/// parse as the declared type. Errors name the table, 1-based data row and
/// column of the offending cell.
pub fn load_csv(path: &Path, table: &str, columns: Vec<Column>) -> Result<Relation> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })?
        .clone();
    if headers.len() != columns.len() {
        return Err(Error::Manifest(format!(
            "table {table}: header has {} columns, schema declares {}",
            headers.len(),
            columns.len()
        )));
    }
    for (h, c) in headers.iter().zip(&columns) {
        if !h.eq_ignore_ascii_case(&c.name) {
            return Err(Error::Manifest(format!(
                "table {table}: header column {h:?} does not match declared column {:?}",
                c.name
            )));
        }
    }

    let mut rel = Relation::new(columns)?;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(rel.columns().len());
        for (j, cell) in record.iter().enumerate() {
            let col = &rel.columns()[j];
            let value = Value::parse_cell(cell, col.ty).map_err(|e| Error::CellParse {
                table: table.to_string(),
                row: i + 1,
                column: col.name.clone(),
                message: e.to_string(),
            })?;
            row.push(value);
        }
        rel.push_row_unchecked(row);
    }
    Ok(rel)
}

/// Write a relation as CSV, the exact inverse of [`load_csv`].
pub fn write_csv(path: &Path, rel: &Relation) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })?;
    writer
        .write_record(rel.columns().iter().map(|c| c.name.as_str()))
        .map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })?;
    for row in rel.rows() {
        writer
            .write_record(row.iter().map(|v| v.to_cell()))
            .map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
