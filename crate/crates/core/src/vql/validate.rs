use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::render::{render_select_item, Style};
use crate::datastore::{ColumnType, DatabaseSchema, DateValue};
use crate::scope::{Scope, ScopeError};

/// A schema or semantic problem with an otherwise well-formed query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownTable { table: String },
    UnknownColumn { column: String },
    AmbiguousColumn { column: String },
    AggregateTypeMismatch { item: String, column_type: ColumnType },
    BinOnNonDate { column: String, column_type: ColumnType },
    OrderKeyNotSelected { key: String },
    AggregateWithoutGrouping,
    LiteralTypeMismatch { column: String, column_type: ColumnType, literal: String },
    JoinKeyTypeMismatch { left: ColumnType, right: ColumnType },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownTable { table } => write!(f, "unknown table {}", table),
            Violation::UnknownColumn { column } => write!(f, "unknown column {}", column),
            Violation::AmbiguousColumn { column } => {
                write!(f, "column {} exists in both joined tables; qualify it", column)
            }
            Violation::AggregateTypeMismatch { item, column_type } => {
                write!(f, "{} is not defined for a {} column", item, column_type)
            }
            Violation::BinOnNonDate { column, column_type } => {
                write!(f, "BIN needs a date column, {} is {}", column, column_type)
            }
            Violation::OrderKeyNotSelected { key } => {
                write!(f, "ORDER BY key {} is not one of the two select items", key)
            }
            Violation::AggregateWithoutGrouping => f.write_str(
                "an aggregate is selected next to a bare column but there is no GROUP BY or BIN",
            ),
            Violation::LiteralTypeMismatch { column, column_type, literal } => {
                write!(f, "literal {} cannot be compared with {} column {}", literal, column_type, column)
            }
            Violation::JoinKeyTypeMismatch { left, right } => {
                write!(f, "JOIN compares a {} column with a {} column", left, right)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Bulleted list, one violation per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str("- ");
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

/// Checks a query against a schema. Never fails; problems are reported.
pub fn validate(q: &VqlQuery, schema: &DatabaseSchema) -> ValidationReport {
    let mut out = Vec::new();
    let scope = match Scope::build(schema, q) {
        Ok(s) => s,
        Err(ScopeError::UnknownTable(t)) => {
            out.push(Violation::UnknownTable { table: t });
            return ValidationReport { violations: out };
        }
        Err(_) => unreachable!("scope construction only fails on tables"),
    };
    let mut resolve = |col: &ColumnRef, out: &mut Vec<Violation>| -> Option<ColumnType> {
        if col.is_star() {
            return None;
        }
        match scope.resolve(col) {
            Ok(i) => Some(scope.ty(i)),
            Err(e) => {
                let v = match e {
                    ScopeError::UnknownTable(table) => Violation::UnknownTable { table },
                    ScopeError::UnknownColumn(column) => Violation::UnknownColumn { column },
                    ScopeError::Ambiguous(column) => Violation::AmbiguousColumn { column },
                };
                if !out.contains(&v) {
                    out.push(v);
                }
                None
            }
        }
    };

    if let Some(j) = &q.join {
        let l = resolve(&j.left, &mut out);
        let r = resolve(&j.right, &mut out);
        if let (Some(l), Some(r)) = (l, r) {
            if l != r {
                out.push(Violation::JoinKeyTypeMismatch { left: l, right: r });
            }
        }
    }

    for item in q.select() {
        let ty = resolve(&item.column, &mut out);
        if let (Some(agg), Some(ty)) = (item.aggregate, ty) {
            let ok = match agg {
                AggregateFn::Count => true,
                AggregateFn::Sum | AggregateFn::Avg => ty == ColumnType::Number,
                AggregateFn::Max | AggregateFn::Min => ty != ColumnType::Text,
            };
            if !ok {
                out.push(Violation::AggregateTypeMismatch {
                    item: render_select_item(item, Style::Source),
                    column_type: ty,
                });
            }
        }
    }

    if let Some(pred) = &q.filter {
        check_predicate(pred, &mut resolve, &mut out);
    }

    for g in &q.group_by {
        resolve(g, &mut out);
    }

    if let Some(bin) = &q.bin {
        if let Some(ty) = resolve(&bin.column, &mut out) {
            if ty != ColumnType::Date {
                out.push(Violation::BinOnNonDate {
                    column: bin.column.column.clone(),
                    column_type: ty,
                });
            }
        }
    }

    if let Some(order) = &q.order {
        if q.order_target().is_none() {
            out.push(Violation::OrderKeyNotSelected {
                key: render_select_item(&order.key, Style::Source),
            });
        }
    }

    if q.aggregate_without_grouping() {
        out.push(Violation::AggregateWithoutGrouping);
    }

    ValidationReport { violations: out }
}

fn literal_text(lit: &Literal) -> String {
    match lit {
        Literal::Number(v) => alloc::format!("{}", v),
        Literal::Text(s) => alloc::format!("'{}'", s),
    }
}

fn literal_fits(lit: &Literal, ty: ColumnType, like: bool) -> bool {
    match (lit, ty) {
        (Literal::Number(_), ColumnType::Number) => !like,
        (Literal::Text(_), ColumnType::Text) => true,
        (Literal::Text(s), ColumnType::Date) => !like && DateValue::parse(s).is_some(),
        _ => false,
    }
}

fn check_predicate(
    pred: &Predicate,
    resolve: &mut impl FnMut(&ColumnRef, &mut Vec<Violation>) -> Option<ColumnType>,
    out: &mut Vec<Violation>,
) {
    let mut check = |column: &ColumnRef, lit: &Literal, like: bool, out: &mut Vec<Violation>| {
        if let Some(ty) = resolve(column, out) {
            if !literal_fits(lit, ty, like) {
                out.push(Violation::LiteralTypeMismatch {
                    column: column.column.clone(),
                    column_type: ty,
                    literal: literal_text(lit),
                });
            }
        }
    };
    match pred {
        Predicate::Compare { column, op, value } => {
            check(column, value, *op == CompareOp::Like, out)
        }
        Predicate::In { column, values } => {
            for v in values {
                check(column, v, false, out);
            }
        }
        Predicate::And(ps) | Predicate::Or(ps) => {
            for p in ps {
                check_predicate(p, resolve, out);
            }
        }
    }
}
