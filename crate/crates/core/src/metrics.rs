//! Chart, axis, SQL, data and overall accuracy over (prediction, gold) pairs.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use crate::datastore::DbResolver;
use crate::datastore::{Cell, Database};
use crate::executor::execute;
use crate::vql::{canonical_sql, parse_vql, render_select_item, Style, VqlQuery};

/// Relative tolerance for numeric cells in [`data_match`].
pub const NUMERIC_TOLERANCE: f64 = 1e-6;

fn both(pred: &str, gold: &str) -> Option<(VqlQuery, VqlQuery)> {
    Some((parse_vql(pred).ok()?, parse_vql(gold).ok()?))
}

pub fn chart_match(pred: &str, gold: &str) -> bool {
    both(pred, gold).is_some_and(|(p, g)| p.chart == g.chart)
}

/// Ordered (x, y) comparison of the canonical select items.
pub fn axis_match(pred: &str, gold: &str) -> bool {
    both(pred, gold).is_some_and(|(p, g)| {
        let items = |q: &VqlQuery| {
            [render_select_item(&q.x, Style::Canonical), render_select_item(&q.y, Style::Canonical)]
        };
        items(&p) == items(&g)
    })
}

pub fn sql_match(pred: &str, gold: &str) -> bool {
    both(pred, gold).is_some_and(|(p, g)| canonical_sql(&p) == canonical_sql(&g))
}

fn cell_eq(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Number(x), Cell::Number(y)) => {
            x == y || (x - y).abs() <= NUMERIC_TOLERANCE * x.abs().max(y.abs())
        }
        (Cell::Null, Cell::Null) => true,
        (Cell::Number(_), _) | (_, Cell::Number(_)) | (Cell::Null, _) | (_, Cell::Null) => false,
        _ => a.to_string() == b.to_string(),
    }
}

fn row_cmp(a: &[Cell], b: &[Cell]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Compares the executed results of two queries. Row order matters only
/// when the gold query has an ORDER BY; otherwise rows are compared as
/// multisets. Any execution error gives `false`.
pub fn data_match(pred: &str, gold: &str, db: &Database) -> bool {
    let Some((p, g)) = both(pred, gold) else { return false };
    let (Ok(pr), Ok(gr)) = (execute(&p, db), execute(&g, db)) else { return false };
    let mut a = pr.rows;
    let mut b = gr.rows;
    if a.len() != b.len() {
        return false;
    }
    if g.order.is_none() {
        a.sort_by(|x, y| row_cmp(x, y));
        b.sort_by(|x, y| row_cmp(x, y));
    }
    a.iter()
        .zip(&b)
        .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(c, d)| cell_eq(c, d)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub db_id: String,
    pub predicted: String,
    pub gold: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairScore {
    pub id: String,
    pub chart: bool,
    pub axis: bool,
    pub sql: bool,
    pub data: bool,
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "Chart Acc")]
    pub chart_acc: f64,
    #[serde(rename = "Axis Acc")]
    pub axis_acc: f64,
    #[serde(rename = "SQL Acc")]
    pub sql_acc: f64,
    #[serde(rename = "Data Acc")]
    pub data_acc: f64,
    #[serde(rename = "All Acc")]
    pub all_acc: f64,
    pub count: usize,
    pub pairs: Vec<PairScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no pairs to evaluate")]
    NoPairs,
    #[error("pair {id}: unknown database {db_id}")]
    UnknownDatabase { id: String, db_id: String },
    #[error("pair {id}: gold VQL does not parse")]
    GoldUnparseable { id: String },
}

pub fn score_pair(pair: &EvalPair, db: &Database) -> PairScore {
    let (p, g) = (pair.predicted.as_str(), pair.gold.as_str());
    let chart = chart_match(p, g);
    let axis = axis_match(p, g);
    let data = data_match(p, g, db);
    PairScore {
        id: pair.id.clone(),
        chart,
        axis,
        sql: sql_match(p, g),
        data,
        all: chart && axis && data,
    }
}

pub fn evaluate_corpus<R: DbResolver + ?Sized>(
    pairs: &[EvalPair],
    resolver: &R,
) -> Result<MetricReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let mut scores = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let db = resolver.database(&pair.db_id).ok_or_else(|| MetricsError::UnknownDatabase {
            id: pair.id.clone(),
            db_id: pair.db_id.clone(),
        })?;
        if parse_vql(&pair.gold).is_err() {
            return Err(MetricsError::GoldUnparseable { id: pair.id.clone() });
        }
        scores.push(score_pair(pair, db));
    }
    Ok(report(scores))
}

/// Averages per-pair scores; `scores` must not be empty.
pub fn report(scores: Vec<PairScore>) -> MetricReport {
    let n = scores.len() as f64;
    let rate = |f: fn(&PairScore) -> bool| scores.iter().filter(|s| f(s)).count() as f64 / n;
    MetricReport {
        chart_acc: rate(|s| s.chart),
        axis_acc: rate(|s| s.axis),
        sql_acc: rate(|s| s.sql),
        data_acc: rate(|s| s.data),
        all_acc: rate(|s| s.all),
        count: scores.len(),
        pairs: scores,
    }
}
