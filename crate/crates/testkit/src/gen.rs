//! Seeded random tables and valid queries for differential testing.
//!
//! Value pools are tiny on purpose so that groups, ties, join matches and
//! nulls show up often in tables of at most eight rows.

use cotvis_core::datastore::{Cell, ColumnSchema, ColumnType, Database, DateValue, Table, TableSchema};
use cotvis_core::vql::{
    validate, AggregateFn, BinClause, BinUnit, ChartType, ColumnRef, CompareOp, JoinClause,
    Literal, OrderClause, Predicate, SelectItem, SortDirection, VqlQuery,
};
use rand::seq::SliceRandom;
use rand::Rng;

const NUMBERS: &[f64] = &[-2.0, -1.0, 0.0, 1.0, 1.5, 2.0, 3.0, 10.0];
const TEXTS: &[&str] = &["a", "b", "ab", "ba", "abc", "B", "c_d"];
const DATES: &[(i32, u8, u8)] = &[
    (1999, 12, 31),
    (2000, 1, 1),
    (2000, 1, 3),
    (2000, 2, 29),
    (2001, 1, 1),
    (2001, 7, 4),
    (2024, 12, 25),
];
const TYPES: [ColumnType; 3] = [ColumnType::Number, ColumnType::Text, ColumnType::Date];

fn random_cell<R: Rng>(rng: &mut R, ty: ColumnType) -> Cell {
    if rng.gen_bool(0.1) {
        return Cell::Null;
    }
    match ty {
        ColumnType::Number => Cell::Number(*NUMBERS.choose(rng).unwrap()),
        ColumnType::Text => Cell::Text(TEXTS.choose(rng).unwrap().to_string()),
        ColumnType::Date => {
            let (year, month, day) = *DATES.choose(rng).unwrap();
            let time = rng.gen_bool(0.2).then(|| (rng.gen_range(0..24), 0, 0));
            Cell::Date(DateValue { year, month, day, time })
        }
    }
}

fn random_table<R: Rng>(rng: &mut R, name: &str, prefix: &str) -> Table {
    let width = rng.gen_range(1..=3);
    let mut columns = vec![ColumnSchema { name: "k".into(), ty: ColumnType::Number }];
    for i in 0..width {
        columns.push(ColumnSchema {
            name: format!("{prefix}{i}"),
            ty: *TYPES.choose(rng).unwrap(),
        });
    }
    let rows = (0..rng.gen_range(0..=8))
        .map(|_| {
            columns
                .iter()
                .map(|c| {
                    if c.name == "k" {
                        Cell::Number(rng.gen_range(0..4) as f64)
                    } else {
                        random_cell(rng, c.ty)
                    }
                })
                .collect()
        })
        .collect();
    Table::new(TableSchema { name: name.into(), columns }, rows).expect("generated table is well formed")
}

/// Two tables, `t0(k, c0..)` and `t1(k, d0..)`, each with at most four
/// columns and eight rows.
pub fn random_database<R: Rng>(rng: &mut R) -> Database {
    Database::with_tables("gen", vec![random_table(rng, "t0", "c"), random_table(rng, "t1", "d")])
        .expect("distinct names")
}

struct Pool {
    cols: Vec<(ColumnRef, ColumnType)>,
}

impl Pool {
    fn any<R: Rng>(&self, rng: &mut R) -> (ColumnRef, ColumnType) {
        self.cols.choose(rng).unwrap().clone()
    }

    fn of<R: Rng>(&self, rng: &mut R, ty: ColumnType) -> Option<ColumnRef> {
        let hits: Vec<_> = self.cols.iter().filter(|(_, t)| *t == ty).collect();
        hits.choose(rng).map(|(c, _)| c.clone())
    }
}

fn literal_for<R: Rng>(rng: &mut R, ty: ColumnType) -> Literal {
    match ty {
        ColumnType::Number => Literal::Number(*NUMBERS.choose(rng).unwrap()),
        ColumnType::Text => Literal::Text(TEXTS.choose(rng).unwrap().to_string()),
        ColumnType::Date => {
            let (y, m, d) = *DATES.choose(rng).unwrap();
            Literal::Text(format!("{y:04}-{m:02}-{d:02}"))
        }
    }
}

fn random_predicate<R: Rng>(rng: &mut R, pool: &Pool, depth: u32) -> Predicate {
    let roll = rng.gen_range(0..10);
    if depth < 2 && roll >= 8 {
        let parts = (0..rng.gen_range(2..=3))
            .map(|_| random_predicate(rng, pool, depth + 1))
            .collect();
        return if roll == 8 { Predicate::and(parts) } else { Predicate::or(parts) };
    }
    let (column, ty) = pool.any(rng);
    if roll == 7 {
        let values = (0..rng.gen_range(1..=3)).map(|_| literal_for(rng, ty)).collect();
        return Predicate::In { column, values };
    }
    if ty == ColumnType::Text && roll == 6 {
        let pats = ["a%", "%b", "_", "%a%", "c\\_d", "__"];
        return Predicate::Compare {
            column,
            op: CompareOp::Like,
            value: Literal::Text(pats.choose(rng).unwrap().to_string()),
        };
    }
    let ops = [
        CompareOp::Eq,
        CompareOp::NotEq,
        CompareOp::Lt,
        CompareOp::LtEq,
        CompareOp::Gt,
        CompareOp::GtEq,
    ];
    Predicate::Compare { column, op: *ops.choose(rng).unwrap(), value: literal_for(rng, ty) }
}

fn aggregate_item<R: Rng>(rng: &mut R, pool: &Pool) -> SelectItem {
    loop {
        let f = *AggregateFn::ALL.choose(rng).unwrap();
        let col = match f {
            AggregateFn::Count if rng.gen_bool(0.2) => Some(ColumnRef::new("*")),
            AggregateFn::Count => Some(pool.any(rng).0),
            AggregateFn::Sum | AggregateFn::Avg => pool.of(rng, ColumnType::Number),
            AggregateFn::Max | AggregateFn::Min => {
                let t = if rng.gen_bool(0.7) { ColumnType::Number } else { ColumnType::Date };
                pool.of(rng, t)
            }
        };
        if let Some(c) = col {
            return SelectItem::aggregated(f, c);
        }
    }
}

/// A query over `db` that passes validation.
pub fn random_query<R: Rng>(rng: &mut R, db: &Database) -> VqlQuery {
    let schema = db.schema();
    loop {
        let join = rng.gen_bool(0.3);
        let mut pool = Pool { cols: Vec::new() };
        for t in if join { &schema.tables[..2] } else { &schema.tables[..1] } {
            for c in &t.columns {
                let col = if join && c.name == "k" {
                    ColumnRef::qualified(t.name.clone(), c.name.clone())
                } else {
                    ColumnRef::new(c.name.clone())
                };
                pool.cols.push((col, c.ty));
            }
        }

        let chart = *ChartType::ALL.choose(rng).unwrap();
        let mut group_by = Vec::new();
        let mut bin = None;
        let (x, y) = match rng.gen_range(0..4) {
            0 => (SelectItem::plain(pool.any(rng).0), SelectItem::plain(pool.any(rng).0)),
            1 => {
                let g = pool.any(rng).0;
                group_by.push(g.clone());
                if rng.gen_bool(0.2) {
                    group_by.push(pool.any(rng).0);
                }
                let y = if rng.gen_bool(0.85) {
                    aggregate_item(rng, &pool)
                } else {
                    SelectItem::plain(pool.any(rng).0)
                };
                (SelectItem::plain(g), y)
            }
            2 => {
                let Some(d) = pool.of(rng, ColumnType::Date) else { continue };
                bin = Some(BinClause { column: d.clone(), unit: *BinUnit::ALL.choose(rng).unwrap() });
                if rng.gen_bool(0.2) {
                    group_by.push(pool.any(rng).0);
                }
                (SelectItem::plain(d), aggregate_item(rng, &pool))
            }
            _ => (aggregate_item(rng, &pool), aggregate_item(rng, &pool)),
        };
        let mut q = VqlQuery::new(chart, x, y, "t0");
        if join {
            q.join = Some(JoinClause {
                table: "t1".into(),
                left: ColumnRef::qualified("t0", "k"),
                right: ColumnRef::qualified("t1", "k"),
            });
        }
        q.group_by = group_by;
        q.bin = bin;
        if rng.gen_bool(0.5) {
            q.filter = Some(random_predicate(rng, &pool, 0));
        }
        if rng.gen_bool(0.5) {
            let key = if rng.gen_bool(0.5) { q.x.clone() } else { q.y.clone() };
            let direction = if rng.gen_bool(0.5) { SortDirection::Asc } else { SortDirection::Desc };
            q.order = Some(OrderClause { key, direction });
        }
        if rng.gen_bool(0.3) {
            q.limit = Some(rng.gen_range(1..=5));
        }
        if validate(&q, &schema).is_valid() {
            return q;
        }
    }
}

/// Flips letter case and swaps whitespace runs outside quoted spans.
pub fn perturb<R: Rng>(text: &str, rng: &mut R) -> String {
    let mut out = String::new();
    let mut quote: Option<char> = None;
    for ch in text.chars() {
        match quote {
            Some(q) => {
                out.push(ch);
                if ch == q {
                    quote = None;
                }
            }
            None if ch == '\'' || ch == '"' || ch == '`' => {
                quote = Some(ch);
                out.push(ch);
            }
            None if ch == ' ' => {
                let ws = ["  ", "\t", "\n ", " "];
                out.push_str(ws[rng.gen_range(0..ws.len())]);
            }
            None if ch.is_ascii_alphabetic() && rng.gen_bool(0.5) => {
                if ch.is_ascii_lowercase() {
                    out.push(ch.to_ascii_uppercase());
                } else {
                    out.push(ch.to_ascii_lowercase());
                }
            }
            None => out.push(ch),
        }
    }
    out
}
