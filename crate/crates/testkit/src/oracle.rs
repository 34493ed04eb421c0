//! Naive reference executor. Deliberately shares nothing with the real
//! executor beyond the data types: full cross product for joins, linear
//! scans for every column lookup and group, insertion sort, and its own
//! calendar arithmetic for weekday bins.

use std::cmp::Ordering;

use cotvis_core::datastore::{Cell, Database, DateValue};
use cotvis_core::vql::{
    AggregateFn, BinUnit, ColumnRef, CompareOp, Literal, Predicate, SelectItem, SortDirection,
    VqlQuery,
};

struct Col {
    table: String,
    name: String,
}

/// Rows of the query result, or `None` when the query cannot run.
pub fn oracle_execute(q: &VqlQuery, db: &Database) -> Option<Vec<Vec<Cell>>> {
    let mut cols: Vec<Col> = Vec::new();
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let left = db
        .tables()
        .iter()
        .find(|t| t.name().to_lowercase() == q.from.to_lowercase())?;
    for c in &left.schema().columns {
        cols.push(Col { table: left.name().to_string(), name: c.name.clone() });
    }
    match &q.join {
        None => rows.extend(left.rows().iter().cloned()),
        Some(j) => {
            let right = db
                .tables()
                .iter()
                .find(|t| t.name().to_lowercase() == j.table.to_lowercase())?;
            for c in &right.schema().columns {
                cols.push(Col { table: right.name().to_string(), name: c.name.clone() });
            }
            let a = find(&cols, &j.left)?;
            let b = find(&cols, &j.right)?;
            for l in left.rows() {
                for r in right.rows() {
                    let mut row = l.clone();
                    row.extend(r.iter().cloned());
                    if !matches!(row[a], Cell::Null) && equal(&row[a], &row[b]) {
                        rows.push(row);
                    }
                }
            }
        }
    }

    if let Some(p) = &q.filter {
        let mut kept = Vec::new();
        for r in rows {
            if holds(p, &cols, &r)? {
                kept.push(r);
            }
        }
        rows = kept;
    }

    let items = [&q.x, &q.y];
    let grouped = !q.group_by.is_empty() || q.bin.is_some();
    let any_agg = items.iter().any(|i| i.aggregate.is_some());
    let mut out: Vec<Vec<Cell>> = Vec::new();

    if !grouped && !any_agg {
        for r in &rows {
            let mut o = Vec::new();
            for it in items {
                o.push(r[find(&cols, &it.column)?].clone());
            }
            out.push(o);
        }
    } else if !grouped {
        if items.iter().any(|i| i.aggregate.is_none()) {
            return None;
        }
        let all: Vec<&Vec<Cell>> = rows.iter().collect();
        let mut o = Vec::new();
        for it in items {
            o.push(agg(it, &cols, &all)?);
        }
        out.push(o);
    } else {
        // (key, member rows), in order of first appearance.
        let mut groups: Vec<(Vec<Cell>, Vec<&Vec<Cell>>)> = Vec::new();
        for r in &rows {
            let mut key = Vec::new();
            for g in &q.group_by {
                key.push(r[find(&cols, g)?].clone());
            }
            if let Some(b) = &q.bin {
                key.push(label(&r[find(&cols, &b.column)?], b.unit)?);
            }
            match groups
                .iter_mut()
                .find(|(k, _)| k.iter().zip(&key).all(|(a, b)| equal(a, b)))
            {
                Some((_, members)) => members.push(r),
                None => groups.push((key, vec![r])),
            }
        }
        for (key, members) in &groups {
            let mut o = Vec::new();
            for it in items {
                let binned = it.aggregate.is_none()
                    && q.bin.as_ref().is_some_and(|b| same_col(&b.column, &it.column));
                if it.aggregate.is_some() {
                    o.push(agg(it, &cols, members)?);
                } else if binned {
                    o.push(key.last().cloned()?);
                } else {
                    o.push(members[0][find(&cols, &it.column)?].clone());
                }
            }
            out.push(o);
        }
    }

    if let Some(ord) = &q.order {
        let k = items.iter().position(|i| same_item(i, &ord.key))?;
        // Insertion sort keeps ties in their original order.
        for i in 1..out.len() {
            let mut j = i;
            while j > 0 {
                let c = cmp(&out[j - 1][k], &out[j][k]);
                let swap = match ord.direction {
                    SortDirection::Asc => c == Ordering::Greater,
                    SortDirection::Desc => c == Ordering::Less,
                };
                if !swap {
                    break;
                }
                out.swap(j - 1, j);
                j -= 1;
            }
        }
    }
    if let Some(n) = q.limit {
        out.truncate(n as usize);
    }
    Some(out)
}

fn find(cols: &[Col], c: &ColumnRef) -> Option<usize> {
    let hits: Vec<usize> = (0..cols.len())
        .filter(|&i| {
            cols[i].name.to_lowercase() == c.column.to_lowercase()
                && c.table
                    .as_ref()
                    .is_none_or(|t| t.to_lowercase() == cols[i].table.to_lowercase())
        })
        .collect();
    if hits.len() == 1 {
        Some(hits[0])
    } else {
        None
    }
}

fn same_col(a: &ColumnRef, b: &ColumnRef) -> bool {
    a.column.to_lowercase() == b.column.to_lowercase()
        && match (&a.table, &b.table) {
            (Some(x), Some(y)) => x.to_lowercase() == y.to_lowercase(),
            _ => true,
        }
}

fn same_item(a: &SelectItem, b: &SelectItem) -> bool {
    a.aggregate == b.aggregate && same_col(&a.column, &b.column)
}

/// A bare date sorts just before the same date written with a midnight time.
fn date_key(d: &DateValue) -> (i32, u8, u8, (u8, u8, u8), bool) {
    (d.year, d.month, d.day, d.time.unwrap_or((0, 0, 0)), d.time.is_some())
}

fn rank(c: &Cell) -> u8 {
    match c {
        Cell::Null => 0,
        Cell::Number(_) => 1,
        Cell::Date(_) => 2,
        Cell::Text(_) => 3,
    }
}

fn cmp(a: &Cell, b: &Cell) -> Ordering {
    match (a, b) {
        (Cell::Number(x), Cell::Number(y)) => {
            if x < y {
                Ordering::Less
            } else if x > y {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        }
        (Cell::Date(x), Cell::Date(y)) => date_key(x).cmp(&date_key(y)),
        (Cell::Text(x), Cell::Text(y)) => x.as_bytes().cmp(y.as_bytes()),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn equal(a: &Cell, b: &Cell) -> bool {
    cmp(a, b) == Ordering::Equal
}

fn holds(p: &Predicate, cols: &[Col], r: &[Cell]) -> Option<bool> {
    Some(match p {
        Predicate::Compare { column, op, value } => test(&r[find(cols, column)?], *op, value),
        Predicate::In { column, values } => {
            let c = &r[find(cols, column)?];
            values.iter().any(|v| test(c, CompareOp::Eq, v))
        }
        Predicate::And(ps) => {
            let mut all = true;
            for p in ps {
                all &= holds(p, cols, r)?;
            }
            all
        }
        Predicate::Or(ps) => {
            let mut any = false;
            for p in ps {
                any |= holds(p, cols, r)?;
            }
            any
        }
    })
}

fn test(c: &Cell, op: CompareOp, v: &Literal) -> bool {
    if op == CompareOp::Like {
        return match (c, v) {
            (Cell::Text(s), Literal::Text(p)) => like(s.as_bytes(), p.as_bytes()),
            _ => false,
        };
    }
    let lit = match (c, v) {
        (Cell::Number(_), Literal::Number(n)) => Cell::Number(*n),
        (Cell::Text(_), Literal::Text(s)) => Cell::Text(s.clone()),
        (Cell::Date(_), Literal::Text(s)) => match DateValue::parse(s) {
            Some(d) => Cell::Date(d),
            None => return false,
        },
        _ => return false,
    };
    let o = cmp(c, &lit);
    match op {
        CompareOp::Eq => o == Ordering::Equal,
        CompareOp::NotEq => o != Ordering::Equal,
        CompareOp::Lt => o == Ordering::Less,
        CompareOp::LtEq => o != Ordering::Greater,
        CompareOp::Gt => o == Ordering::Greater,
        CompareOp::GtEq => o != Ordering::Less,
        CompareOp::Like => unreachable!(),
    }
}

/// Backtracking matcher; fine for the short ASCII strings the generators emit.
fn like(s: &[u8], p: &[u8]) -> bool {
    match p.first() {
        None => s.is_empty(),
        Some(b'%') => (0..=s.len()).any(|i| like(&s[i..], &p[1..])),
        Some(b'_') => !s.is_empty() && like(&s[1..], &p[1..]),
        Some(ch) => s.first() == Some(ch) && like(&s[1..], &p[1..]),
    }
}

fn label(c: &Cell, unit: BinUnit) -> Option<Cell> {
    let d = match c {
        Cell::Null => return Some(Cell::Null),
        Cell::Date(d) => *d,
        _ => return None,
    };
    Some(Cell::Text(match unit {
        BinUnit::Year => format!("{:04}", d.year),
        BinUnit::Month => format!("{:04}-{:02}", d.year, d.month),
        BinUnit::Day => format!("{:04}-{:02}-{:02}", d.year, d.month, d.day),
        BinUnit::Weekday => zeller(d.year, d.month as i32, d.day as i32).to_string(),
    }))
}

/// Zeller's congruence for the Gregorian calendar.
fn zeller(year: i32, month: i32, day: i32) -> &'static str {
    let (m, y) = if month < 3 { (month + 12, year - 1) } else { (month, year) };
    let k = y.rem_euclid(100);
    let j = y.div_euclid(100);
    let h = (day + (13 * (m + 1)) / 5 + k + k / 4 + j.div_euclid(4) + 5 * j).rem_euclid(7);
    ["Saturday", "Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday"][h as usize]
}

fn agg(it: &SelectItem, cols: &[Col], members: &[&Vec<Cell>]) -> Option<Cell> {
    let f = it.aggregate?;
    if it.column.column == "*" {
        return (f == AggregateFn::Count).then(|| Cell::Number(members.len() as f64));
    }
    let i = find(cols, &it.column)?;
    let vals: Vec<&Cell> = members
        .iter()
        .map(|r| &r[i])
        .filter(|c| !matches!(c, Cell::Null))
        .collect();
    match f {
        AggregateFn::Count => Some(Cell::Number(vals.len() as f64)),
        AggregateFn::Sum | AggregateFn::Avg => {
            if vals.is_empty() {
                return Some(Cell::Null);
            }
            let mut s = 0.0;
            for v in &vals {
                match v {
                    Cell::Number(n) => s += n,
                    _ => return None,
                }
            }
            Some(Cell::Number(if f == AggregateFn::Sum { s } else { s / vals.len() as f64 }))
        }
        AggregateFn::Max | AggregateFn::Min => {
            if vals.iter().any(|v| matches!(v, Cell::Text(_))) {
                return None;
            }
            let mut best: Option<&Cell> = None;
            for v in vals {
                best = match best {
                    None => Some(v),
                    Some(b) => {
                        let o = cmp(v, b);
                        let take = if f == AggregateFn::Max {
                            o == Ordering::Greater
                        } else {
                            o == Ordering::Less
                        };
                        Some(if take { v } else { b })
                    }
                };
            }
            Some(best.cloned().unwrap_or(Cell::Null))
        }
    }
}
