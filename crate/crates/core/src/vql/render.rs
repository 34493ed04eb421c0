use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use super::ast::*;
use super::parser::is_reserved;

/// Output style for printing VQL.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Identifiers keep their case; IN lists keep their order.
    Source,
    /// Identifiers lower-cased; IN lists sorted ascending.
    Canonical,
}

/// Prints a query so that `parse_vql(render_vql(q)) == q`.
pub fn render_vql(q: &VqlQuery) -> String {
    Printer::new(Style::Source).query(q)
}

/// Deterministic comparison key: uppercase keywords, single spaces,
/// lower-cased identifiers, sorted IN lists, fixed clause order.
pub fn canonicalize(q: &VqlQuery) -> String {
    Printer::new(Style::Canonical).query(q)
}

/// Canonical text of everything after the VISUALIZE clause.
pub fn canonical_sql(q: &VqlQuery) -> String {
    let mut p = Printer::new(Style::Canonical);
    p.body(q);
    p.out
}

pub fn render_select_item(item: &SelectItem, style: Style) -> String {
    let mut p = Printer::new(style);
    p.select_item(item);
    p.out
}

pub fn render_column(col: &ColumnRef, style: Style) -> String {
    let mut p = Printer::new(style);
    p.column(col);
    p.out
}

pub fn render_column_list(cols: &[ColumnRef], style: Style) -> String {
    let mut p = Printer::new(style);
    p.column_list(cols);
    p.out
}

pub fn render_predicate(pred: &Predicate, style: Style) -> String {
    let mut p = Printer::new(style);
    p.predicate(pred, false);
    p.out
}

pub fn render_join(join: &JoinClause, style: Style) -> String {
    let mut p = Printer::new(style);
    p.join_body(join);
    p.out
}

pub fn render_bin(bin: &BinClause, style: Style) -> String {
    let mut p = Printer::new(style);
    p.column(&bin.column);
    p.out.push_str(" BY ");
    p.out.push_str(bin.unit.keyword());
    p.out
}

pub fn render_ident(name: &str, style: Style) -> String {
    let mut p = Printer::new(style);
    p.ident(name);
    p.out
}

fn literal_cmp(a: &Literal, b: &Literal) -> Ordering {
    match (a, b) {
        (Literal::Number(x), Literal::Number(y)) => x.total_cmp(y),
        (Literal::Text(x), Literal::Text(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Literal::Number(_), Literal::Text(_)) => Ordering::Less,
        (Literal::Text(_), Literal::Number(_)) => Ordering::Greater,
    }
}

struct Printer {
    style: Style,
    out: String,
}

impl Printer {
    fn new(style: Style) -> Self {
        Printer {
            style,
            out: String::new(),
        }
    }

    fn query(mut self, q: &VqlQuery) -> String {
        self.out.push_str("VISUALIZE ");
        self.out.push_str(q.chart.keyword());
        self.out.push(' ');
        self.body(q);
        self.out
    }

    fn body(&mut self, q: &VqlQuery) {
        self.out.push_str("SELECT ");
        self.select_item(&q.x);
        self.out.push_str(", ");
        self.select_item(&q.y);
        self.out.push_str(" FROM ");
        self.ident(&q.from);
        if let Some(join) = &q.join {
            self.out.push_str(" JOIN ");
            self.join_body(join);
        }
        if let Some(pred) = &q.filter {
            self.out.push_str(" WHERE ");
            self.predicate(pred, false);
        }
        if !q.group_by.is_empty() {
            self.out.push_str(" GROUP BY ");
            self.column_list(&q.group_by);
        }
        if let Some(bin) = &q.bin {
            self.out.push_str(" BIN ");
            self.column(&bin.column);
            self.out.push_str(" BY ");
            self.out.push_str(bin.unit.keyword());
        }
        if let Some(order) = &q.order {
            self.out.push_str(" ORDER BY ");
            self.select_item(&order.key);
            self.out.push(' ');
            self.out.push_str(order.direction.keyword());
        }
        if let Some(limit) = q.limit {
            let _ = write!(self.out, " LIMIT {}", limit);
        }
    }

    fn join_body(&mut self, join: &JoinClause) {
        self.ident(&join.table);
        self.out.push_str(" ON ");
        self.column(&join.left);
        self.out.push_str(" = ");
        self.column(&join.right);
    }

    fn ident(&mut self, name: &str) {
        let name: String = match self.style {
            Style::Source => name.into(),
            Style::Canonical => name.to_lowercase(),
        };
        let bare = name
            .bytes()
            .next()
            .is_some_and(|b| b.is_ascii_alphabetic() || b == b'_')
            && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
            && !is_reserved(&name);
        if bare {
            self.out.push_str(&name);
        } else {
            self.out.push('`');
            self.out.push_str(&name.replace('`', "``"));
            self.out.push('`');
        }
    }

    fn column(&mut self, col: &ColumnRef) {
        if col.is_star() {
            self.out.push('*');
            return;
        }
        if let Some(t) = &col.table {
            self.ident(t);
            self.out.push('.');
        }
        self.ident(&col.column);
    }

    fn column_list(&mut self, cols: &[ColumnRef]) {
        for (i, c) in cols.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.column(c);
        }
    }

    fn select_item(&mut self, item: &SelectItem) {
        match item.aggregate {
            Some(agg) => {
                self.out.push_str(agg.keyword());
                self.out.push('(');
                self.column(&item.column);
                self.out.push(')');
            }
            None => self.column(&item.column),
        }
    }

    fn literal(&mut self, lit: &Literal) {
        match lit {
            Literal::Number(v) => {
                let _ = write!(self.out, "{}", v);
            }
            Literal::Text(s) => {
                self.out.push('\'');
                self.out.push_str(&s.replace('\'', "''"));
                self.out.push('\'');
            }
        }
    }

    fn predicate(&mut self, pred: &Predicate, inside_and: bool) {
        match pred {
            Predicate::Compare { column, op, value } => {
                self.column(column);
                self.out.push(' ');
                self.out.push_str(op.symbol());
                self.out.push(' ');
                self.literal(value);
            }
            Predicate::In { column, values } => {
                self.column(column);
                self.out.push_str(" IN (");
                let mut vals: Vec<&Literal> = values.iter().collect();
                if self.style == Style::Canonical {
                    vals.sort_by(|a, b| literal_cmp(a, b));
                }
                for (i, v) in vals.into_iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.literal(v);
                }
                self.out.push(')');
            }
            Predicate::And(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" AND ");
                    }
                    self.predicate(p, true);
                }
            }
            Predicate::Or(parts) => {
                if inside_and {
                    self.out.push('(');
                }
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" OR ");
                    }
                    // Nested conjunctions bind tighter than OR.
                    self.predicate(p, false);
                }
                if inside_and {
                    self.out.push(')');
                }
            }
        }
    }
}
