//! In-memory typed tables and the two database-description artifacts fed
//! to the model: a `name:type` schema listing and per-column value samples.

mod cell;
mod describe;
mod infer;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use cell::{parse_decimal, Cell, ColumnType, DateValue};
pub use describe::{describe_schema, normalize_tokens, sample_values, ColumnSample, ValueSampleSet, DEFAULT_SAMPLES_PER_COLUMN};
pub use infer::{infer_column_type, table_from_text, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
}

impl TableSchema {
    /// Case-insensitive column lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub tables: Vec<TableSchema>,
}

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }
}

/// Errors raised when assembling tables by hand.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    Arity { row: usize, found: usize, expected: usize },
    #[error("row {row}, column {column}: cell does not match column type {expected}")]
    CellType { row: usize, column: String, expected: ColumnType },
    #[error("duplicate table {0}")]
    DuplicateTable(String),
}

/// A table: schema plus rows of typed, nullable cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: TableSchema,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Builds a table, checking column-name uniqueness and cell types.
    pub fn new(schema: TableSchema, rows: Vec<Vec<Cell>>) -> Result<Self, TableError> {
        for (i, c) in schema.columns.iter().enumerate() {
            if schema.columns[..i]
                .iter()
                .any(|o| o.name.eq_ignore_ascii_case(&c.name))
            {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.columns.len() {
                return Err(TableError::Arity {
                    row: r,
                    found: row.len(),
                    expected: schema.columns.len(),
                });
            }
            for (cell, col) in row.iter().zip(&schema.columns) {
                if let Some(ty) = cell.column_type() {
                    if ty != col.ty {
                        return Err(TableError::CellType {
                            row: r,
                            column: col.name.clone(),
                            expected: col.ty,
                        });
                    }
                }
            }
        }
        Ok(Table { schema, rows })
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r[idx])
    }
}

/// A named collection of tables, kept in load order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Database {
    pub name: String,
    tables: Vec<Table>,
}

impl Database {
    pub fn new(name: impl Into<String>) -> Self {
        Database {
            name: name.into(),
            tables: Vec::new(),
        }
    }

    pub fn with_tables(name: impl Into<String>, tables: Vec<Table>) -> Result<Self, TableError> {
        let mut db = Database::new(name);
        for t in tables {
            db.add_table(t)?;
        }
        Ok(db)
    }

    pub fn add_table(&mut self, table: Table) -> Result<(), TableError> {
        if self.table(table.name()).is_some() {
            return Err(TableError::DuplicateTable(table.name().into()));
        }
        self.tables.push(table);
        Ok(())
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name().eq_ignore_ascii_case(name))
    }

    pub fn schema(&self) -> DatabaseSchema {
        DatabaseSchema {
            tables: self.tables.iter().map(|t| t.schema.clone()).collect(),
        }
    }
}

/// Looks databases up by id.
pub trait DbResolver {
    fn database(&self, db_id: &str) -> Option<&Database>;
}

impl DbResolver for [Database] {
    fn database(&self, db_id: &str) -> Option<&Database> {
        self.iter().find(|d| d.name == db_id)
    }
}

impl DbResolver for Vec<Database> {
    fn database(&self, db_id: &str) -> Option<&Database> {
        self.as_slice().database(db_id)
    }
}

impl DbResolver for BTreeMap<String, Database> {
    fn database(&self, db_id: &str) -> Option<&Database> {
        self.get(db_id)
    }
}

impl DbResolver for BTreeMap<String, alloc::sync::Arc<Database>> {
    fn database(&self, db_id: &str) -> Option<&Database> {
        self.get(db_id).map(|d| &**d)
    }
}
