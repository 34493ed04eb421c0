//! The visualization query language: AST, parser, validator, printers.
//!
//! Grammar (keywords case-insensitive, trailing clauses in any order):
//!
//! ```text
//! VISUALIZE <BAR|PIE|LINE|SCATTER> SELECT <item>, <item> FROM <table>
//!   [JOIN <table> ON <col> = <col>]
//!   [WHERE <predicate>] [GROUP BY <col>, ...] [BIN <col> BY <YEAR|MONTH|DAY|WEEKDAY>]
//!   [ORDER BY <item> [ASC|DESC]] [LIMIT <n>]
//! item      := <col> | <COUNT|SUM|AVG|MAX|MIN>(<col>) | COUNT(*)
//! col       := <ident> | <ident>.<ident>
//! predicate := comparisons (= != <> < <= > >= LIKE), <col> IN (...), AND, OR, parentheses
//! ```

mod ast;
mod error;
mod lexer;
mod parser;
mod render;
mod validate;

pub use ast::*;
pub use error::{ParseError, ParseErrorKind};
pub use parser::{
    is_reserved, parse_bin, parse_chart_type, parse_column_list, parse_direction, parse_join,
    parse_limit, parse_predicate, parse_select_item, parse_select_pair, parse_table_name,
    parse_vql, RESERVED,
};
pub use render::{
    canonical_sql, canonicalize, render_bin, render_column, render_column_list, render_ident,
    render_join, render_predicate, render_select_item, render_vql, Style,
};
pub use validate::{validate, ValidationReport, Violation};
