//! Executes the relational part of a VQL statement against a [`Database`].
//!
//! Evaluation order: FROM/JOIN, WHERE, grouping (GROUP BY columns plus the
//! BIN label), aggregation, ORDER BY (stable), LIMIT. Groups appear in
//! first-occurrence order of the filtered rows.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::datastore::{Cell, ColumnType, Database, DateValue};
use crate::scope::{Scope, ScopeError};
use crate::vql::{
    render_column, render_select_item, AggregateFn, BinUnit, CompareOp, Literal, Predicate,
    SelectItem, SortDirection, Style, VqlQuery,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("aggregate selected next to a bare column without GROUP BY or BIN")]
    AggregateWithoutGrouping,
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("ambiguous column {0}")]
    AmbiguousColumn(String),
    #[error("ORDER BY key {0} is not a select item")]
    OrderKeyNotSelected(String),
    #[error("{item} cannot aggregate a {found} value")]
    InvalidAggregate { item: String, found: ColumnType },
    #[error("cannot bin {0:?}: not a date")]
    UnparseableDate(String),
}

impl From<ScopeError> for ExecError {
    fn from(e: ScopeError) -> Self {
        match e {
            ScopeError::UnknownTable(t) => ExecError::UnknownTable(t),
            ScopeError::UnknownColumn(c) => ExecError::UnknownColumn(c),
            ScopeError::Ambiguous(c) => ExecError::AmbiguousColumn(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultColumn {
    pub label: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

/// Tabular result. [`execute`] always yields two columns (x, y); step views
/// may carry more. `ordered` is true iff row order is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<ResultColumn>,
    pub rows: Vec<Vec<Cell>>,
    pub ordered: bool,
}

/// Label of a date under a bin unit: `YYYY`, `YYYY-MM`, `YYYY-MM-DD`, or
/// an English weekday name.
pub fn bin_label(cell: &Cell, unit: BinUnit) -> Result<String, ExecError> {
    let date = match cell {
        Cell::Date(d) => *d,
        Cell::Text(s) => DateValue::parse(s).ok_or_else(|| ExecError::UnparseableDate(s.clone()))?,
        other => return Err(ExecError::UnparseableDate(other.to_string())),
    };
    Ok(match unit {
        BinUnit::Year => alloc::format!("{:04}", date.year),
        BinUnit::Month => alloc::format!("{:04}-{:02}", date.year, date.month),
        BinUnit::Day => alloc::format!("{:04}-{:02}-{:02}", date.year, date.month, date.day),
        BinUnit::Weekday => date.weekday().to_string(),
    })
}

/// Runs the full query.
pub fn execute(q: &VqlQuery, db: &Database) -> Result<ResultTable, ExecError> {
    let plan = Plan::new(q, db)?;
    let rows = plan.filtered_rows(db)?;
    let mut table = plan.project(&rows)?;
    if let Some(order) = &q.order {
        let idx = q.order_target().ok_or_else(|| {
            ExecError::OrderKeyNotSelected(render_select_item(&order.key, Style::Source))
        })?;
        sort_rows(&mut table.rows, idx, order.direction);
        table.ordered = true;
    }
    if let Some(limit) = q.limit {
        table.rows.truncate(usize::try_from(limit).unwrap_or(usize::MAX));
    }
    Ok(table)
}

/// Intermediate data states exposed for inspecting each reasoning step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepView {
    /// First rows of the FROM table, all columns.
    Raw { limit: usize },
    /// Rows after JOIN and WHERE, restricted to the referenced columns.
    Filtered,
    /// Grouped and aggregated rows, before ORDER BY and LIMIT.
    Grouped,
    /// The final result.
    Final,
}

pub fn execute_step(q: &VqlQuery, db: &Database, view: StepView) -> Result<ResultTable, ExecError> {
    match view {
        StepView::Raw { limit } => {
            let t = db
                .table(&q.from)
                .ok_or_else(|| ExecError::UnknownTable(q.from.clone()))?;
            Ok(ResultTable {
                columns: t
                    .schema()
                    .columns
                    .iter()
                    .map(|c| ResultColumn {
                        label: c.name.clone(),
                        ty: c.ty,
                    })
                    .collect(),
                rows: t.rows().iter().take(limit).cloned().collect(),
                ordered: false,
            })
        }
        StepView::Filtered => {
            let plan = Plan::new(q, db)?;
            let rows = plan.filtered_rows(db)?;
            let mut refs = Vec::new();
            let mut cols: Vec<usize> = Vec::new();
            let mut push = |c: &crate::vql::ColumnRef| -> Result<(), ExecError> {
                if c.is_star() {
                    return Ok(());
                }
                let i = plan.scope.resolve(c)?;
                if !cols.contains(&i) {
                    cols.push(i);
                    refs.push(render_column(c, Style::Source));
                }
                Ok(())
            };
            push(&q.x.column)?;
            push(&q.y.column)?;
            for g in &q.group_by {
                push(g)?;
            }
            if let Some(b) = &q.bin {
                push(&b.column)?;
            }
            Ok(ResultTable {
                columns: cols
                    .iter()
                    .zip(refs)
                    .map(|(&i, label)| ResultColumn {
                        label,
                        ty: plan.scope.ty(i),
                    })
                    .collect(),
                rows: rows
                    .iter()
                    .map(|r| cols.iter().map(|&i| r[i].clone()).collect())
                    .collect(),
                ordered: false,
            })
        }
        StepView::Grouped => {
            let mut stripped = q.clone();
            stripped.order = None;
            stripped.limit = None;
            execute(&stripped, db)
        }
        StepView::Final => execute(q, db),
    }
}

struct Plan<'q> {
    q: &'q VqlQuery,
    scope: Scope,
}

type Row<'a> = Vec<&'a Cell>;

impl<'q> Plan<'q> {
    fn new(q: &'q VqlQuery, db: &Database) -> Result<Self, ExecError> {
        let scope = Scope::build(&db.schema(), q)?;
        Ok(Plan { q, scope })
    }

    fn filtered_rows<'a>(&self, db: &'a Database) -> Result<Vec<Row<'a>>, ExecError> {
        let left = db
            .table(&self.q.from)
            .ok_or_else(|| ExecError::UnknownTable(self.q.from.clone()))?;
        let mut rows: Vec<Row<'a>> = match &self.q.join {
            None => left.rows().iter().map(|r| r.iter().collect()).collect(),
            Some(j) => {
                let right = db
                    .table(&j.table)
                    .ok_or_else(|| ExecError::UnknownTable(j.table.clone()))?;
                let a = self.scope.resolve(&j.left)?;
                let b = self.scope.resolve(&j.right)?;
                let mut out = Vec::new();
                for l in left.rows() {
                    for r in right.rows() {
                        let row: Row<'a> = l.iter().chain(r.iter()).collect();
                        if !row[a].is_null() && row[a].group_eq(row[b]) {
                            out.push(row);
                        }
                    }
                }
                out
            }
        };
        if let Some(pred) = &self.q.filter {
            let compiled = self.compile(pred)?;
            rows.retain(|r| compiled.eval(r));
        }
        Ok(rows)
    }

    fn compile<'p>(&self, pred: &'p Predicate) -> Result<Compiled<'p>, ExecError> {
        Ok(match pred {
            Predicate::Compare { column, op, value } => Compiled::Compare {
                idx: self.scope.resolve(column)?,
                op: *op,
                value,
            },
            Predicate::In { column, values } => Compiled::In {
                idx: self.scope.resolve(column)?,
                values,
            },
            Predicate::And(ps) => {
                Compiled::And(ps.iter().map(|p| self.compile(p)).collect::<Result<_, _>>()?)
            }
            Predicate::Or(ps) => {
                Compiled::Or(ps.iter().map(|p| self.compile(p)).collect::<Result<_, _>>()?)
            }
        })
    }

    fn output_column(&self, item: &SelectItem) -> Result<(Option<usize>, ResultColumn), ExecError> {
        let label = render_select_item(item, Style::Source);
        let idx = if item.column.is_star() {
            None
        } else {
            Some(self.scope.resolve(&item.column)?)
        };
        let binned = self.is_binned(item);
        let ty = match (item.aggregate, idx) {
            (Some(AggregateFn::Count | AggregateFn::Sum | AggregateFn::Avg), _) => ColumnType::Number,
            (Some(_), Some(i)) => self.scope.ty(i),
            (None, _) if binned => ColumnType::Text,
            (None, Some(i)) => self.scope.ty(i),
            (_, None) => ColumnType::Number,
        };
        Ok((idx, ResultColumn { label, ty }))
    }

    fn is_binned(&self, item: &SelectItem) -> bool {
        item.aggregate.is_none()
            && self
                .q
                .bin
                .as_ref()
                .is_some_and(|b| b.column.same_as(&item.column))
    }

    fn project(&self, rows: &[Row<'_>]) -> Result<ResultTable, ExecError> {
        let q = self.q;
        let (x_idx, x_col) = self.output_column(&q.x)?;
        let (y_idx, y_col) = self.output_column(&q.y)?;
        let items = [(&q.x, x_idx), (&q.y, y_idx)];
        let mut out = ResultTable {
            columns: alloc::vec![x_col, y_col],
            rows: Vec::new(),
            ordered: false,
        };

        if !q.has_grouping() {
            if !q.has_aggregate() {
                for r in rows {
                    out.rows.push(
                        items
                            .iter()
                            .map(|(_, i)| i.map_or(Cell::Null, |i| r[i].clone()))
                            .collect(),
                    );
                }
                return Ok(out);
            }
            if q.aggregate_without_grouping() {
                return Err(ExecError::AggregateWithoutGrouping);
            }
            let all: Vec<usize> = (0..rows.len()).collect();
            out.rows.push(
                items
                    .iter()
                    .map(|(item, i)| aggregate(item, *i, rows, &all))
                    .collect::<Result<_, _>>()?,
            );
            return Ok(out);
        }

        let group_idx: Vec<usize> = q
            .group_by
            .iter()
            .map(|g| self.scope.resolve(g))
            .collect::<Result<_, _>>()?;
        let bin = match &q.bin {
            Some(b) => Some((self.scope.resolve(&b.column)?, b.unit)),
            None => None,
        };

        let mut index: BTreeMap<Vec<KeyCell>, usize> = BTreeMap::new();
        let mut groups: Vec<(Option<Cell>, Vec<usize>)> = Vec::new();
        for (ri, r) in rows.iter().enumerate() {
            let mut key: Vec<KeyCell> = group_idx.iter().map(|&i| KeyCell::of(r[i])).collect();
            let mut label = None;
            if let Some((bi, unit)) = bin {
                let cell = if r[bi].is_null() {
                    Cell::Null
                } else {
                    Cell::Text(bin_label(r[bi], unit)?)
                };
                key.push(KeyCell::of(&cell));
                label = Some(cell);
            }
            let g = *index.entry(key).or_insert_with(|| {
                groups.push((label, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(ri);
        }

        for (label, members) in &groups {
            let mut row = Vec::with_capacity(2);
            for (item, i) in items {
                let cell = if item.aggregate.is_some() {
                    aggregate(item, i, rows, members)?
                } else if self.is_binned(item) {
                    label.clone().unwrap_or(Cell::Null)
                } else {
                    i.map_or(Cell::Null, |i| rows[members[0]][i].clone())
                };
                row.push(cell);
            }
            out.rows.push(row);
        }
        Ok(out)
    }
}

fn aggregate(
    item: &SelectItem,
    idx: Option<usize>,
    rows: &[Row<'_>],
    members: &[usize],
) -> Result<Cell, ExecError> {
    let agg = item.aggregate.expect("called for aggregate items");
    let Some(idx) = idx else {
        // COUNT(*)
        return Ok(Cell::Number(members.len() as f64));
    };
    let cells = members.iter().map(|&m| rows[m][idx]).filter(|c| !c.is_null());
    let invalid = |c: &Cell| ExecError::InvalidAggregate {
        item: render_select_item(item, Style::Source),
        found: c.column_type().unwrap_or(ColumnType::Text),
    };
    match agg {
        AggregateFn::Count => Ok(Cell::Number(cells.count() as f64)),
        AggregateFn::Sum | AggregateFn::Avg => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for c in cells {
                sum += c.as_number().ok_or_else(|| invalid(c))?;
                n += 1;
            }
            Ok(match (n, agg) {
                (0, _) => Cell::Null,
                (_, AggregateFn::Sum) => Cell::Number(sum),
                _ => Cell::Number(sum / n as f64),
            })
        }
        AggregateFn::Max | AggregateFn::Min => {
            let mut best: Option<&Cell> = None;
            for c in cells {
                if matches!(c, Cell::Text(_)) {
                    return Err(invalid(c));
                }
                let better = best.is_none_or(|b| {
                    let ord = c.total_cmp(b);
                    if agg == AggregateFn::Max {
                        ord == Ordering::Greater
                    } else {
                        ord == Ordering::Less
                    }
                });
                if better {
                    best = Some(c);
                }
            }
            Ok(best.cloned().unwrap_or(Cell::Null))
        }
    }
}

fn sort_rows(rows: &mut [Vec<Cell>], idx: usize, dir: SortDirection) {
    rows.sort_by(|a, b| {
        let ord = a[idx].total_cmp(&b[idx]);
        match dir {
            SortDirection::Asc => ord,
            SortDirection::Desc => ord.reverse(),
        }
    });
}

/// Grouping key ordered by [`Cell::total_cmp`].
#[derive(Debug, Clone)]
struct KeyCell(Cell);

impl KeyCell {
    fn of(c: &Cell) -> Self {
        KeyCell(c.clone())
    }
}

impl PartialEq for KeyCell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for KeyCell {}

impl PartialOrd for KeyCell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for KeyCell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

enum Compiled<'p> {
    Compare { idx: usize, op: CompareOp, value: &'p Literal },
    In { idx: usize, values: &'p [Literal] },
    And(Vec<Compiled<'p>>),
    Or(Vec<Compiled<'p>>),
}

impl Compiled<'_> {
    fn eval(&self, row: &[&Cell]) -> bool {
        match self {
            Compiled::Compare { idx, op, value } => compare(row[*idx], *op, value),
            Compiled::In { idx, values } => values.iter().any(|v| compare(row[*idx], CompareOp::Eq, v)),
            Compiled::And(ps) => ps.iter().all(|p| p.eval(row)),
            Compiled::Or(ps) => ps.iter().any(|p| p.eval(row)),
        }
    }
}

/// Null and type-mismatched comparisons are false.
fn compare(cell: &Cell, op: CompareOp, lit: &Literal) -> bool {
    let ord = match (cell, lit) {
        (Cell::Text(s), Literal::Text(p)) if op == CompareOp::Like => return like(s, p),
        (_, _) if op == CompareOp::Like => return false,
        (Cell::Number(a), Literal::Number(b)) => a.partial_cmp(b),
        (Cell::Text(a), Literal::Text(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
        (Cell::Date(a), Literal::Text(b)) => DateValue::parse(b).map(|b| a.cmp(&b)),
        _ => None,
    };
    let Some(ord) = ord else {
        return false;
    };
    match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::NotEq => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::LtEq => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::GtEq => ord != Ordering::Less,
        CompareOp::Like => unreachable!(),
    }
}

/// SQL LIKE: `%` matches any run, `_` one character; case-sensitive.
pub fn like(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    // reachable[j]: pattern prefix p[..j] matches the text consumed so far.
    let mut reachable = alloc::vec![false; p.len() + 1];
    reachable[0] = true;
    for j in 1..=p.len() {
        reachable[j] = reachable[j - 1] && p[j - 1] == '%';
    }
    for &c in &t {
        let mut next = alloc::vec![false; p.len() + 1];
        for j in 1..=p.len() {
            next[j] = match p[j - 1] {
                '%' => next[j - 1] || reachable[j],
                '_' => reachable[j - 1],
                pc => reachable[j - 1] && pc == c,
            };
        }
        reachable = next;
    }
    reachable[p.len()]
}
