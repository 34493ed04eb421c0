use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Chart types a VQL statement may request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChartType {
    Bar,
    Pie,
    Line,
    Scatter,
}

impl ChartType {
    pub const ALL: [ChartType; 4] = [
        ChartType::Bar,
        ChartType::Pie,
        ChartType::Line,
        ChartType::Scatter,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ChartType::Bar => "BAR",
            ChartType::Pie => "PIE",
            ChartType::Line => "LINE",
            ChartType::Scatter => "SCATTER",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.keyword().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggregateFn {
    Count,
    Sum,
    Avg,
    Max,
    Min,
}

impl AggregateFn {
    pub const ALL: [AggregateFn; 5] = [
        AggregateFn::Count,
        AggregateFn::Sum,
        AggregateFn::Avg,
        AggregateFn::Max,
        AggregateFn::Min,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            AggregateFn::Count => "COUNT",
            AggregateFn::Sum => "SUM",
            AggregateFn::Avg => "AVG",
            AggregateFn::Max => "MAX",
            AggregateFn::Min => "MIN",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.keyword().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for AggregateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Calendar unit for `BIN col BY unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BinUnit {
    Year,
    Month,
    Day,
    Weekday,
}

impl BinUnit {
    pub const ALL: [BinUnit; 4] = [BinUnit::Year, BinUnit::Month, BinUnit::Day, BinUnit::Weekday];

    pub fn keyword(self) -> &'static str {
        match self {
            BinUnit::Year => "YEAR",
            BinUnit::Month => "MONTH",
            BinUnit::Day => "DAY",
            BinUnit::Weekday => "WEEKDAY",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|u| u.keyword().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for BinUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A possibly table-qualified column name. `*` is only legal inside `COUNT(*)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn new(column: impl Into<String>) -> Self {
        ColumnRef {
            table: None,
            column: column.into(),
        }
    }

    pub fn qualified(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: Some(table.into()),
            column: column.into(),
        }
    }

    pub fn is_star(&self) -> bool {
        self.column == "*"
    }

    /// Case-insensitive reference equality.
    pub fn same_as(&self, other: &ColumnRef) -> bool {
        let tables = match (&self.table, &other.table) {
            (Some(a), Some(b)) => a.eq_ignore_ascii_case(b),
            _ => true,
        };
        tables && self.column.eq_ignore_ascii_case(&other.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectItem {
    pub column: ColumnRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateFn>,
}

impl SelectItem {
    pub fn plain(column: ColumnRef) -> Self {
        SelectItem {
            column,
            aggregate: None,
        }
    }

    pub fn aggregated(aggregate: AggregateFn, column: ColumnRef) -> Self {
        SelectItem {
            column,
            aggregate: Some(aggregate),
        }
    }

    pub fn same_as(&self, other: &SelectItem) -> bool {
        self.aggregate == other.aggregate && self.column.same_as(&other.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    NotEq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    LtEq,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    GtEq,
    #[serde(rename = "LIKE")]
    Like,
}

impl CompareOp {
    pub const ALL: [CompareOp; 7] = [
        CompareOp::Eq,
        CompareOp::NotEq,
        CompareOp::Lt,
        CompareOp::LtEq,
        CompareOp::Gt,
        CompareOp::GtEq,
        CompareOp::Like,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::NotEq => "!=",
            CompareOp::Lt => "<",
            CompareOp::LtEq => "<=",
            CompareOp::Gt => ">",
            CompareOp::GtEq => ">=",
            CompareOp::Like => "LIKE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

/// WHERE condition tree. `And`/`Or` are n-ary and never directly nest the
/// same connective (the parser flattens `a AND (b AND c)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Compare {
        column: ColumnRef,
        op: CompareOp,
        value: Literal,
    },
    In {
        column: ColumnRef,
        values: Vec<Literal>,
    },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Predicate {
    /// Builds a conjunction, flattening nested conjunctions.
    pub fn and(parts: Vec<Predicate>) -> Predicate {
        Self::connective(parts, true)
    }

    /// Builds a disjunction, flattening nested disjunctions.
    pub fn or(parts: Vec<Predicate>) -> Predicate {
        Self::connective(parts, false)
    }

    fn connective(parts: Vec<Predicate>, is_and: bool) -> Predicate {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match (p, is_and) {
                (Predicate::And(inner), true) | (Predicate::Or(inner), false) => flat.extend(inner),
                (other, _) => flat.push(other),
            }
        }
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        if is_and {
            Predicate::And(flat)
        } else {
            Predicate::Or(flat)
        }
    }

    /// Visits every column referenced by the predicate.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        match self {
            Predicate::Compare { column, .. } | Predicate::In { column, .. } => out.push(column),
            Predicate::And(ps) | Predicate::Or(ps) => {
                for p in ps {
                    p.collect_columns(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinClause {
    pub table: String,
    pub left: ColumnRef,
    pub right: ColumnRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinClause {
    pub column: ColumnRef,
    pub unit: BinUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SortDirection {
    Asc,
    Desc,
}

impl SortDirection {
    pub fn keyword(self) -> &'static str {
        match self {
            SortDirection::Asc => "ASC",
            SortDirection::Desc => "DESC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderClause {
    pub key: SelectItem,
    pub direction: SortDirection,
}

/// A parsed VQL statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqlQuery {
    pub chart: ChartType,
    pub x: SelectItem,
    pub y: SelectItem,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join: Option<JoinClause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<Predicate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_by: Vec<ColumnRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<BinClause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderClause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<u64>,
}

impl VqlQuery {
    /// A minimal query: chart, two select items, one table.
    pub fn new(chart: ChartType, x: SelectItem, y: SelectItem, from: impl Into<String>) -> Self {
        VqlQuery {
            chart,
            x,
            y,
            from: from.into(),
            join: None,
            filter: None,
            group_by: Vec::new(),
            bin: None,
            order: None,
            limit: None,
        }
    }

    pub fn select(&self) -> [&SelectItem; 2] {
        [&self.x, &self.y]
    }

    pub fn has_aggregate(&self) -> bool {
        self.x.aggregate.is_some() || self.y.aggregate.is_some()
    }

    pub fn has_grouping(&self) -> bool {
        !self.group_by.is_empty() || self.bin.is_some()
    }

    /// True when one select item is aggregated, the other is a bare column
    /// and nothing groups the rows.
    pub fn aggregate_without_grouping(&self) -> bool {
        !self.has_grouping() && (self.x.aggregate.is_some() != self.y.aggregate.is_some())
    }

    /// Index (0 = x, 1 = y) of the select item the ORDER BY key refers to.
    pub fn order_target(&self) -> Option<usize> {
        let order = self.order.as_ref()?;
        self.select().iter().position(|s| s.same_as(&order.key))
    }
}

