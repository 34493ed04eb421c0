//! Column resolution over the FROM table and the optional JOIN table.

use alloc::string::String;
use alloc::vec::Vec;

use crate::datastore::{ColumnType, DatabaseSchema};
use crate::vql::{render_column, ColumnRef, Style, VqlQuery};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ScopeError {
    UnknownTable(String),
    UnknownColumn(String),
    Ambiguous(String),
}

#[derive(Debug, Clone)]
pub(crate) struct ScopeColumn {
    pub table: String,
    pub name: String,
    pub ty: ColumnType,
}

/// Columns visible to a query, in working-row order: FROM table columns
/// first, then JOIN table columns.
#[derive(Debug, Clone)]
pub(crate) struct Scope {
    pub columns: Vec<ScopeColumn>,
}

impl Scope {
    pub fn build(schema: &DatabaseSchema, q: &VqlQuery) -> Result<Scope, ScopeError> {
        let mut columns = Vec::new();
        let mut push = |name: &str| -> Result<(), ScopeError> {
            let t = schema
                .table(name)
                .ok_or_else(|| ScopeError::UnknownTable(name.into()))?;
            for c in &t.columns {
                columns.push(ScopeColumn {
                    table: t.name.clone(),
                    name: c.name.clone(),
                    ty: c.ty,
                });
            }
            Ok(())
        };
        push(&q.from)?;
        if let Some(j) = &q.join {
            push(&j.table)?;
        }
        Ok(Scope { columns })
    }

    pub fn resolve(&self, col: &ColumnRef) -> Result<usize, ScopeError> {
        let mut hits = self.columns.iter().enumerate().filter(|(_, c)| {
            c.name.eq_ignore_ascii_case(&col.column)
                && col
                    .table
                    .as_ref()
                    .is_none_or(|t| t.eq_ignore_ascii_case(&c.table))
        });
        let first = hits.next();
        match (first, hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (Some(_), Some(_)) => Err(ScopeError::Ambiguous(render_column(col, Style::Source))),
            (None, _) => {
                if let Some(t) = &col.table {
                    if !self.columns.iter().any(|c| c.table.eq_ignore_ascii_case(t)) {
                        return Err(ScopeError::UnknownTable(t.clone()));
                    }
                }
                Err(ScopeError::UnknownColumn(render_column(col, Style::Source)))
            }
        }
    }

    pub fn ty(&self, idx: usize) -> ColumnType {
        self.columns[idx].ty
    }
}
