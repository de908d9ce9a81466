//! In-memory relations: an ordered column schema plus rows of [`Value`]s.

use crate::error::{Error, Result};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Column {
        Column { name: name.into(), ty }
    }
}

/// A materialized table of rows. Column names are unique within a relation;
/// rows always have exactly one value per column, each fitting the column type
/// (NULL fits any type).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    columns: Vec<Column>,
    rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(columns: Vec<Column>) -> Result<Relation> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|prev| prev.name == c.name) {
                return Err(Error::Manifest(format!("duplicate column name: {}", c.name)));
            }
        }
        Ok(Relation { columns, rows: Vec::new() })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn push_row(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Store(format!(
                "row arity {} does not match schema arity {}",
                row.len(),
                self.columns.len()
            )));
        }
        for (v, c) in row.iter().zip(&self.columns) {
            if !v.fits(c.ty) {
                return Err(Error::Store(format!(
                    "value of type {} does not fit column {} of type {}",
                    v.type_name(),
                    c.name,
                    c.ty
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Push without the type check; callers that just computed the row against
    /// this schema use it to skip redundant validation on hot paths.
    pub(crate) fn push_row_unchecked(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Sort rows by the full value tuple (structural order). Output relations
    /// of the evaluator are always sorted, making results deterministic.
    pub fn sort_rows(&mut self) {
        self.rows.sort();
    }

    /// Order-insensitive equality: same schema, same multiset of rows.
    /// Row-set equality is the correctness contract for query answers;
    /// ordering is a determinism convenience on top of it.
    pub fn same_rows(&self, other: &Relation) -> bool {
        if self.columns != other.columns || self.rows.len() != other.rows.len() {
            return false;
        }
        let mut a = self.rows.clone();
        let mut b = other.rows.clone();
        a.sort();
        b.sort();
        a == b
    }
}
