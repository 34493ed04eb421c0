use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::vql::{
    canonicalize, parse_bin, parse_chart_type, parse_column_list, parse_direction, parse_join,
    parse_limit, parse_predicate, parse_select_item, parse_select_pair, parse_table_name,
    parse_vql, render_bin, render_column_list, render_ident, render_join, render_predicate,
    render_select_item, render_vql, OrderClause, ParseError, SortDirection, Style, VqlQuery,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageId {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl StageId {
    pub const ALL: [StageId; 5] = [StageId::S1, StageId::S2, StageId::S3, StageId::S4, StageId::S5];

    pub fn as_str(self) -> &'static str {
        match self {
            StageId::S1 => "S1",
            StageId::S2 => "S2",
            StageId::S3 => "S3",
            StageId::S4 => "S4",
            StageId::S5 => "S5",
        }
    }

    pub fn from_name(s: &str) -> Option<StageId> {
        StageId::ALL.into_iter().find(|st| st.as_str().eq_ignore_ascii_case(s))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn title(self) -> &'static str {
        match self {
            StageId::S1 => "Determine chart type",
            StageId::S2 => "Retrieve relevant data",
            StageId::S3 => "Define data granularity",
            StageId::S4 => "Refine data",
            StageId::S5 => "Generate visualization",
        }
    }

    pub fn next(self) -> Option<StageId> {
        StageId::ALL.get(self.index() + 1).copied()
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Slot name to slot text. Every slot of a stage is present; an empty
/// string means the clause is absent.
pub type SlotMap = BTreeMap<String, String>;

pub fn slot_names(stage: StageId) -> &'static [&'static str] {
    match stage {
        StageId::S1 => &["chart_type"],
        StageId::S2 => &["from_table", "join", "select_items", "where"],
        StageId::S3 => &["group_by", "bin"],
        StageId::S4 => &["order_by", "sort_direction", "limit"],
        StageId::S5 => &["vql"],
    }
}

pub(crate) fn is_required(slot: &str) -> bool {
    matches!(slot, "chart_type" | "from_table" | "select_items" | "vql")
}

/// A slot leaf of the trace tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Leaf {
    pub stage: StageId,
    /// Id suffix, e.g. `SORT_DIRECTION`.
    pub key: &'static str,
    pub label: &'static str,
    pub slots: &'static [&'static str],
}

impl Leaf {
    pub fn id(&self) -> String {
        alloc::format!("{}/{}", self.stage, self.key)
    }
}

const LEAVES: &[Leaf] = &[
    Leaf { stage: StageId::S1, key: "CHART_TYPE", label: "CHART TYPE", slots: &["chart_type"] },
    Leaf { stage: StageId::S2, key: "TABLES", label: "TABLES", slots: &["from_table", "join"] },
    Leaf { stage: StageId::S2, key: "SELECT", label: "SELECT", slots: &["select_items"] },
    Leaf { stage: StageId::S2, key: "WHERE", label: "WHERE", slots: &["where"] },
    Leaf { stage: StageId::S3, key: "GROUP_BY", label: "GROUP BY", slots: &["group_by"] },
    Leaf { stage: StageId::S3, key: "BIN_BY", label: "BIN BY", slots: &["bin"] },
    Leaf {
        stage: StageId::S4,
        key: "SORT_DIRECTION",
        label: "SORT DIRECTION",
        slots: &["order_by", "sort_direction"],
    },
    Leaf { stage: StageId::S4, key: "LIMIT", label: "LIMIT", slots: &["limit"] },
];

/// Slot leaves under a stage node; S5 has none (its slot sits on the root).
pub fn leaves(stage: StageId) -> impl Iterator<Item = &'static Leaf> {
    LEAVES.iter().filter(move |l| l.stage == stage)
}

pub fn leaf_for_slot(slot: &str) -> Option<&'static Leaf> {
    LEAVES.iter().find(|l| l.slots.contains(&slot))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlotError {
    UnknownSlot(String),
    Missing(String),
    Parse { slot: String, error: ParseError },
}

impl fmt::Display for SlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotError::UnknownSlot(s) => write!(f, "unknown slot {s}"),
            SlotError::Missing(s) => write!(f, "missing slot {s}"),
            SlotError::Parse { slot, error } => write!(f, "slot {slot}: {error}"),
        }
    }
}

impl core::error::Error for SlotError {}

fn is_empty_value(v: &str) -> bool {
    let t = v.trim();
    t.is_empty() || t.eq_ignore_ascii_case("none")
}

/// Parses one slot value with the grammar fragment for that slot and
/// prints it back in `style`. Empty values (and `none`) print as "".
pub fn parse_slot(slot: &str, value: &str, style: Style) -> Result<String, SlotError> {
    if is_empty_value(value) {
        return Ok(String::new());
    }
    let v = value.trim();
    let err = |error| SlotError::Parse { slot: slot.to_string(), error };
    Ok(match slot {
        "chart_type" => parse_chart_type(v).map_err(err)?.keyword().to_string(),
        "from_table" => render_ident(&parse_table_name(v).map_err(err)?, style),
        "join" => render_join(&parse_join(v).map_err(err)?, style),
        "select_items" => {
            let (x, y) = parse_select_pair(v).map_err(err)?;
            alloc::format!("{}, {}", render_select_item(&x, style), render_select_item(&y, style))
        }
        "where" => render_predicate(&parse_predicate(v).map_err(err)?, style),
        "group_by" => render_column_list(&parse_column_list(v).map_err(err)?, style),
        "bin" => render_bin(&parse_bin(v).map_err(err)?, style),
        "order_by" => render_select_item(&parse_select_item(v).map_err(err)?, style),
        "sort_direction" => parse_direction(v).map_err(err)?.keyword().to_string(),
        "limit" => parse_limit(v).map_err(err)?.to_string(),
        "vql" => {
            let q = parse_vql(v).map_err(err)?;
            match style {
                Style::Source => render_vql(&q),
                Style::Canonical => canonicalize(&q),
            }
        }
        other => return Err(SlotError::UnknownSlot(other.to_string())),
    })
}

/// Comparison form of a slot value. Unparseable text compares as itself.
pub fn canonical_slot(slot: &str, value: &str) -> String {
    parse_slot(slot, value, Style::Canonical).unwrap_or_else(|_| value.trim().to_string())
}

fn map(pairs: &[(&str, String)]) -> SlotMap {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Splits a query into per-stage slots (source style). S5 carries the
/// canonical text of the whole query.
pub fn decompose(q: &VqlQuery) -> [SlotMap; 5] {
    let s = Style::Source;
    let opt = |v: Option<String>| v.unwrap_or_default();
    [
        map(&[("chart_type", q.chart.keyword().to_string())]),
        map(&[
            ("from_table", render_ident(&q.from, s)),
            ("join", opt(q.join.as_ref().map(|j| render_join(j, s)))),
            (
                "select_items",
                alloc::format!("{}, {}", render_select_item(&q.x, s), render_select_item(&q.y, s)),
            ),
            ("where", opt(q.filter.as_ref().map(|p| render_predicate(p, s)))),
        ]),
        map(&[
            (
                "group_by",
                if q.group_by.is_empty() { String::new() } else { render_column_list(&q.group_by, s) },
            ),
            ("bin", opt(q.bin.as_ref().map(|b| render_bin(b, s)))),
        ]),
        map(&[
            ("order_by", opt(q.order.as_ref().map(|o| render_select_item(&o.key, s)))),
            ("sort_direction", opt(q.order.as_ref().map(|o| o.direction.keyword().to_string()))),
            ("limit", opt(q.limit.map(|l| l.to_string()))),
        ]),
        map(&[("vql", canonicalize(q))]),
    ]
}

/// Builds a query from S1–S4 slots. A missing sort direction defaults to
/// ascending; a direction without an ORDER BY key is ignored.
pub fn reassemble(stages: &[&SlotMap; 4]) -> Result<VqlQuery, SlotError> {
    let get = |i: usize, slot: &str| -> &str { stages[i].get(slot).map(String::as_str).unwrap_or("") };
    let need = |i: usize, slot: &str| -> Result<&str, SlotError> {
        let v = get(i, slot);
        if is_empty_value(v) {
            Err(SlotError::Missing(slot.to_string()))
        } else {
            Ok(v.trim())
        }
    };
    let err = |slot: &str| {
        let slot = slot.to_string();
        move |error| SlotError::Parse { slot, error }
    };
    let present = |i: usize, slot: &str| -> Option<&str> {
        let v = get(i, slot);
        (!is_empty_value(v)).then(|| v.trim())
    };

    let chart = parse_chart_type(need(0, "chart_type")?).map_err(err("chart_type"))?;
    let from = parse_table_name(need(1, "from_table")?).map_err(err("from_table"))?;
    let (x, y) = parse_select_pair(need(1, "select_items")?).map_err(err("select_items"))?;
    let mut q = VqlQuery::new(chart, x, y, from);
    if let Some(v) = present(1, "join") {
        q.join = Some(parse_join(v).map_err(err("join"))?);
    }
    if let Some(v) = present(1, "where") {
        q.filter = Some(parse_predicate(v).map_err(err("where"))?);
    }
    if let Some(v) = present(2, "group_by") {
        q.group_by = parse_column_list(v).map_err(err("group_by"))?;
    }
    if let Some(v) = present(2, "bin") {
        q.bin = Some(parse_bin(v).map_err(err("bin"))?);
    }
    if let Some(v) = present(3, "order_by") {
        let key = parse_select_item(v).map_err(err("order_by"))?;
        let direction = match present(3, "sort_direction") {
            Some(d) => parse_direction(d).map_err(err("sort_direction"))?,
            None => SortDirection::Asc,
        };
        q.order = Some(OrderClause { key, direction });
    }
    if let Some(v) = present(3, "limit") {
        q.limit = Some(parse_limit(v).map_err(err("limit"))?);
    }
    Ok(q)
}
