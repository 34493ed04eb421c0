use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::error::{ParseError, ParseErrorKind};
use super::lexer::{tokenize, Tok, Token};
use crate::datastore::parse_decimal;

/// Words that cannot be used as bare identifiers. Bin units, aggregate
/// names and chart types are contextual and stay usable as column names.
pub const RESERVED: &[&str] = &[
    "VISUALIZE", "SELECT", "FROM", "JOIN", "ON", "WHERE", "GROUP", "BY", "BIN", "ORDER", "LIMIT",
    "AND", "OR", "IN", "LIKE", "ASC", "DESC",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses a complete VQL statement.
pub fn parse_vql(text: &str) -> Result<VqlQuery, ParseError> {
    let mut p = Parser::new(text)?;
    let q = p.query()?;
    p.finish()?;
    Ok(q)
}

/// Parses `x, y` (exactly two select items).
pub fn parse_select_pair(text: &str) -> Result<(SelectItem, SelectItem), ParseError> {
    Parser::fragment(text, |p| p.select_pair())
}

pub fn parse_select_item(text: &str) -> Result<SelectItem, ParseError> {
    Parser::fragment(text, |p| p.select_item())
}

pub fn parse_predicate(text: &str) -> Result<Predicate, ParseError> {
    Parser::fragment(text, |p| p.or_expr())
}

pub fn parse_column_list(text: &str) -> Result<Vec<ColumnRef>, ParseError> {
    Parser::fragment(text, |p| p.column_list())
}

/// Parses `col BY unit`.
pub fn parse_bin(text: &str) -> Result<BinClause, ParseError> {
    Parser::fragment(text, |p| p.bin_body())
}

/// Parses `table ON a = b`.
pub fn parse_join(text: &str) -> Result<JoinClause, ParseError> {
    Parser::fragment(text, |p| p.join_body())
}

pub fn parse_table_name(text: &str) -> Result<String, ParseError> {
    Parser::fragment(text, |p| p.ident())
}

pub fn parse_chart_type(text: &str) -> Result<ChartType, ParseError> {
    Parser::fragment(text, |p| p.chart_type())
}

pub fn parse_direction(text: &str) -> Result<SortDirection, ParseError> {
    Parser::fragment(text, |p| {
        if p.eat_kw("ASC") {
            Ok(SortDirection::Asc)
        } else if p.eat_kw("DESC") {
            Ok(SortDirection::Desc)
        } else {
            Err(p.unexpected(&["ASC", "DESC"]))
        }
    })
}

pub fn parse_limit(text: &str) -> Result<u64, ParseError> {
    Parser::fragment(text, |p| p.limit_value())
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        if text.trim().is_empty() {
            return Err(ParseError::new(0, ParseErrorKind::EmptyInput));
        }
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    fn fragment<T>(
        text: &str,
        f: impl FnOnce(&mut Parser) -> Result<T, ParseError>,
    ) -> Result<T, ParseError> {
        let mut p = Parser::new(text)?;
        let v = f(&mut p)?;
        p.finish()?;
        Ok(v)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::new(
            self.offset(),
            ParseErrorKind::UnexpectedToken {
                found: self.peek().describe(),
            },
        )
        .expecting(expected)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &'static str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&[kw]))
        }
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if !is_reserved(&w) => {
                self.bump();
                Ok(w)
            }
            Tok::QuotedIdent(w) if !w.is_empty() => {
                self.bump();
                Ok(w)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn query(&mut self) -> Result<VqlQuery, ParseError> {
        self.expect_kw("VISUALIZE")?;
        let chart = self.chart_type()?;
        self.expect_kw("SELECT")?;
        let (x, y) = self.select_pair()?;
        self.expect_kw("FROM")?;
        let from = self.ident()?;
        let mut q = VqlQuery::new(chart, x, y, from);
        if self.eat_kw("JOIN") {
            q.join = Some(self.join_body()?);
        }
        // Trailing clauses may come in any order, each at most once.
        loop {
            let at = self.offset();
            let dup = |name: &'static str| ParseError::new(at, ParseErrorKind::DuplicateClause(name));
            if self.eat_kw("WHERE") {
                if q.filter.is_some() {
                    return Err(dup("WHERE"));
                }
                q.filter = Some(self.or_expr()?);
            } else if self.eat_kw("GROUP") {
                self.expect_kw("BY")?;
                if !q.group_by.is_empty() {
                    return Err(dup("GROUP BY"));
                }
                q.group_by = self.column_list()?;
            } else if self.eat_kw("BIN") {
                if q.bin.is_some() {
                    return Err(dup("BIN"));
                }
                q.bin = Some(self.bin_body()?);
            } else if self.eat_kw("ORDER") {
                self.expect_kw("BY")?;
                if q.order.is_some() {
                    return Err(dup("ORDER BY"));
                }
                let key = self.select_item()?;
                let direction = if self.eat_kw("DESC") {
                    SortDirection::Desc
                } else {
                    self.eat_kw("ASC");
                    SortDirection::Asc
                };
                q.order = Some(OrderClause { key, direction });
            } else if self.eat_kw("LIMIT") {
                if q.limit.is_some() {
                    return Err(dup("LIMIT"));
                }
                q.limit = Some(self.limit_value()?);
            } else {
                break;
            }
        }
        if *self.peek() != Tok::Eof {
            let mut expected = Vec::new();
            if q.join.is_none() && q.filter.is_none() && q.group_by.is_empty() {
                expected.push("JOIN");
            }
            for (name, present) in [
                ("WHERE", q.filter.is_some()),
                ("GROUP BY", !q.group_by.is_empty()),
                ("BIN", q.bin.is_some()),
                ("ORDER BY", q.order.is_some()),
                ("LIMIT", q.limit.is_some()),
            ] {
                if !present {
                    expected.push(name);
                }
            }
            expected.push("end of input");
            return Err(self.unexpected(&expected));
        }
        Ok(q)
    }

    fn chart_type(&mut self) -> Result<ChartType, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Word(w) => {
                self.bump();
                ChartType::from_keyword(&w).ok_or_else(|| {
                    ParseError::new(at, ParseErrorKind::UnknownChartType(w))
                        .expecting(&["BAR", "PIE", "LINE", "SCATTER"])
                })
            }
            _ => Err(self.unexpected(&["BAR", "PIE", "LINE", "SCATTER"])),
        }
    }

    fn select_pair(&mut self) -> Result<(SelectItem, SelectItem), ParseError> {
        let start = self.offset();
        let mut items = Vec::new();
        items.push(self.select_item()?);
        while *self.peek() == Tok::Comma {
            self.bump();
            items.push(self.select_item()?);
        }
        if items.len() != 2 {
            return Err(ParseError::new(start, ParseErrorKind::SelectArity(items.len())));
        }
        let y = items.pop().unwrap();
        let x = items.pop().unwrap();
        Ok((x, y))
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        let at = self.offset();
        if let (Tok::Word(w), Tok::LParen) = (self.peek().clone(), self.peek_at(1).clone()) {
            let Some(agg) = AggregateFn::from_keyword(&w) else {
                return Err(ParseError::new(at, ParseErrorKind::UnknownFunction(w))
                    .expecting(&["COUNT", "SUM", "AVG", "MAX", "MIN"]));
            };
            self.bump();
            self.bump();
            let column = if *self.peek() == Tok::Star {
                if agg != AggregateFn::Count {
                    return Err(self.unexpected(&["identifier"]));
                }
                self.bump();
                ColumnRef::new("*")
            } else {
                self.column_ref()?
            };
            self.expect(Tok::RParen, ")")?;
            return Ok(SelectItem::aggregated(agg, column));
        }
        Ok(SelectItem::plain(self.column_ref()?))
    }

    fn column_ref(&mut self) -> Result<ColumnRef, ParseError> {
        self.reject_call()?;
        let first = self.ident()?;
        if *self.peek() == Tok::Dot {
            self.bump();
            let col = self.ident()?;
            return Ok(ColumnRef::qualified(first, col));
        }
        Ok(ColumnRef::new(first))
    }

    /// A function call where only a column or keyword may stand.
    fn reject_call(&self) -> Result<(), ParseError> {
        match (self.peek(), self.peek_at(1)) {
            (Tok::Word(w), Tok::LParen) => {
                Err(ParseError::new(self.offset(), ParseErrorKind::UnknownFunction(w.clone())))
            }
            _ => Ok(()),
        }
    }

    fn column_list(&mut self) -> Result<Vec<ColumnRef>, ParseError> {
        let mut cols = Vec::new();
        cols.push(self.column_ref()?);
        while *self.peek() == Tok::Comma {
            self.bump();
            cols.push(self.column_ref()?);
        }
        Ok(cols)
    }

    fn join_body(&mut self) -> Result<JoinClause, ParseError> {
        let table = self.ident()?;
        self.expect_kw("ON")?;
        let left = self.column_ref()?;
        self.expect(Tok::Op("="), "=")?;
        let right = self.column_ref()?;
        Ok(JoinClause { table, left, right })
    }

    fn bin_body(&mut self) -> Result<BinClause, ParseError> {
        let column = self.column_ref()?;
        self.expect_kw("BY")?;
        self.reject_call()?;
        let at = self.offset();
        let unit = match self.peek().clone() {
            Tok::Word(w) => {
                self.bump();
                BinUnit::from_keyword(&w).ok_or_else(|| {
                    ParseError::new(at, ParseErrorKind::UnknownBinUnit(w))
                        .expecting(&["YEAR", "MONTH", "DAY", "WEEKDAY"])
                })?
            }
            _ => return Err(self.unexpected(&["YEAR", "MONTH", "DAY", "WEEKDAY"])),
        };
        Ok(BinClause { column, unit })
    }

    fn limit_value(&mut self) -> Result<u64, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                match n.parse::<u64>() {
                    Ok(v) if v >= 1 => Ok(v),
                    _ => Err(ParseError::new(at, ParseErrorKind::InvalidLimit(n))),
                }
            }
            Tok::Minus => Err(ParseError::new(at, ParseErrorKind::InvalidLimit("-".to_string()))),
            _ => Err(self.unexpected(&["positive integer"])),
        }
    }

    fn or_expr(&mut self) -> Result<Predicate, ParseError> {
        let mut parts = Vec::new();
        parts.push(self.and_expr()?);
        while self.eat_kw("OR") {
            parts.push(self.and_expr()?);
        }
        Ok(Predicate::or(parts))
    }

    fn and_expr(&mut self) -> Result<Predicate, ParseError> {
        let mut parts = Vec::new();
        parts.push(self.atom()?);
        while self.eat_kw("AND") {
            parts.push(self.atom()?);
        }
        Ok(Predicate::and(parts))
    }

    fn atom(&mut self) -> Result<Predicate, ParseError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.or_expr()?;
            self.expect(Tok::RParen, ")")?;
            return Ok(inner);
        }
        let column = self.column_ref()?;
        if self.eat_kw("IN") {
            self.expect(Tok::LParen, "(")?;
            let mut values = Vec::new();
            values.push(self.literal()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                values.push(self.literal()?);
            }
            self.expect(Tok::RParen, ")")?;
            return Ok(Predicate::In { column, values });
        }
        if self.eat_kw("LIKE") {
            let value = match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    Literal::Text(s)
                }
                _ => return Err(self.unexpected(&["quoted text"])),
            };
            return Ok(Predicate::Compare {
                column,
                op: CompareOp::Like,
                value,
            });
        }
        let op = match self.peek() {
            Tok::Op(o) => {
                let op = CompareOp::ALL
                    .into_iter()
                    .find(|c| c.symbol() == *o)
                    .expect("lexer only emits known operators");
                self.bump();
                op
            }
            _ => return Err(self.unexpected(&["=", "!=", "<", "<=", ">", ">=", "LIKE", "IN"])),
        };
        let value = self.literal()?;
        Ok(Predicate::Compare { column, op, value })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let at = self.offset();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                let v = parse_decimal(&n)
                    .ok_or_else(|| ParseError::new(at, ParseErrorKind::InvalidNumber(n.clone())))?;
                Ok(Literal::Number(if negative { -v } else { v }))
            }
            Tok::Str(s) if !negative => {
                self.bump();
                Ok(Literal::Text(s))
            }
            _ => Err(self.unexpected(&["number", "quoted text"])),
        }
    }
}
