//! Vega-Lite v5 documents from a query and its executed result.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::datastore::{Cell, ColumnType};
use crate::executor::ResultTable;
use crate::vql::{render_select_item, BinUnit, ChartType, SelectItem, SortDirection, Style, VqlQuery};

pub const VEGA_LITE_SCHEMA: &str = "https://vega.github.io/schema/vega-lite/v5.json";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("result has {0} columns, expected 2")]
    Arity(usize),
    #[error("result column {index} is {found:?}, expected {expected:?}")]
    LabelMismatch {
        index: usize,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Quantitative,
    Nominal,
    Temporal,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub field: String,
    pub measure: Measure,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortHint {
    pub field: String,
    pub direction: SortDirection,
}

/// Renderer-neutral description of a chart; [`ChartSpecDocument::to_vega_lite`]
/// produces the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpecDocument {
    pub mark: String,
    pub x: Encoding,
    pub y: Encoding,
    pub rows: Vec<[Cell; 2]>,
    pub sort: Option<SortHint>,
}

pub fn mark_for(chart: ChartType) -> &'static str {
    match chart {
        ChartType::Bar => "bar",
        ChartType::Line => "line",
        ChartType::Scatter => "point",
        ChartType::Pie => "arc",
    }
}

fn base_field(item: &SelectItem) -> String {
    match item.aggregate {
        Some(f) => f.keyword().to_ascii_lowercase(),
        None => item.column.column.clone(),
    }
}

pub fn emit_chart(q: &VqlQuery, result: &ResultTable) -> Result<ChartSpecDocument, SpecError> {
    if result.columns.len() != 2 {
        return Err(SpecError::Arity(result.columns.len()));
    }
    for (index, item) in q.select().iter().enumerate() {
        let expected = render_select_item(item, Style::Source);
        let found = &result.columns[index].label;
        if *found != expected {
            return Err(SpecError::LabelMismatch {
                index,
                expected,
                found: found.clone(),
            });
        }
    }

    let x_field = base_field(&q.x);
    let mut y_field = base_field(&q.y);
    if y_field == x_field {
        y_field = format!("{y_field}_2");
    }

    let binned = q.bin.as_ref().filter(|b| b.column.same_as(&q.x.column));
    let x_measure = match (binned, q.x.aggregate, result.columns[0].ty) {
        (Some(b), None, _) if b.unit == BinUnit::Weekday => Measure::Ordinal,
        (Some(_), None, _) => Measure::Temporal,
        (_, _, ColumnType::Date) => Measure::Temporal,
        (_, _, ColumnType::Number) => Measure::Quantitative,
        (_, _, ColumnType::Text) => Measure::Nominal,
    };
    let y_measure = match result.columns[1].ty {
        ColumnType::Number => Measure::Quantitative,
        ColumnType::Date => Measure::Temporal,
        ColumnType::Text => Measure::Nominal,
    };

    let sort = q.order.as_ref().and_then(|o| {
        let field = match q.order_target()? {
            0 => x_field.clone(),
            _ => y_field.clone(),
        };
        Some(SortHint {
            field,
            direction: o.direction,
        })
    });

    Ok(ChartSpecDocument {
        mark: mark_for(q.chart).into(),
        x: Encoding {
            field: x_field,
            measure: x_measure,
            title: result.columns[0].label.clone(),
        },
        y: Encoding {
            field: y_field,
            measure: y_measure,
            title: result.columns[1].label.clone(),
        },
        rows: result
            .rows
            .iter()
            .map(|r| [r[0].clone(), r[1].clone()])
            .collect(),
        sort,
    })
}

/// Field names are interpreted by Vega-Lite as paths; dots and brackets
/// must be escaped.
fn field_ref(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if matches!(ch, '.' | '[' | ']' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn channel(e: &Encoding) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("field".into(), Value::String(field_ref(&e.field)));
    m.insert("type".into(), json!(e.measure));
    m.insert("title".into(), Value::String(e.title.clone()));
    m
}

fn direction_word(d: SortDirection) -> &'static str {
    match d {
        SortDirection::Asc => "ascending",
        SortDirection::Desc => "descending",
    }
}

impl ChartSpecDocument {
    pub fn to_vega_lite(&self) -> Value {
        let values: Vec<Value> = self
            .rows
            .iter()
            .map(|[a, b]| {
                let mut m = Map::new();
                m.insert(self.x.field.clone(), json!(a));
                m.insert(self.y.field.clone(), json!(b));
                Value::Object(m)
            })
            .collect();

        let mut encoding = Map::new();
        if self.mark == "arc" {
            encoding.insert("theta".into(), Value::Object(channel(&self.y)));
            encoding.insert("color".into(), Value::Object(channel(&self.x)));
            if let Some(s) = &self.sort {
                let mut order = Map::new();
                order.insert("field".into(), Value::String(field_ref(&s.field)));
                order.insert("sort".into(), json!(direction_word(s.direction)));
                encoding.insert("order".into(), Value::Object(order));
            }
        } else {
            let mut x = channel(&self.x);
            if let Some(s) = &self.sort {
                let hint = if s.field == self.x.field {
                    json!(direction_word(s.direction))
                } else {
                    match s.direction {
                        SortDirection::Asc => json!("y"),
                        SortDirection::Desc => json!("-y"),
                    }
                };
                x.insert("sort".into(), hint);
            }
            encoding.insert("x".into(), Value::Object(x));
            encoding.insert("y".into(), Value::Object(channel(&self.y)));
        }

        json!({
            "$schema": VEGA_LITE_SCHEMA,
            "data": { "values": values },
            "mark": self.mark,
            "encoding": encoding,
        })
    }

    /// Compact JSON; key order is stable, so equal documents give equal bytes.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_vega_lite()).expect("JSON values always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{table_from_text, Database};
    use crate::executor::execute;
    use crate::vql::parse_vql;
    use alloc::string::ToString;
    use alloc::vec;

    fn db() -> Database {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let t = table_from_text(
            "Faculty",
            &s(&["rank", "hired", "salary"]),
            &[
                s(&["Professor", "1990-05-01", "10"]),
                s(&["AsstProf", "1999-01-03", "7"]),
                s(&["Professor", "1990-07-01", "12"]),
            ],
        )
        .unwrap();
        Database::with_tables("u", vec![t]).unwrap()
    }

    fn doc(vql: &str) -> ChartSpecDocument {
        let q = parse_vql(vql).unwrap();
        let r = execute(&q, &db()).unwrap();
        emit_chart(&q, &r).unwrap()
    }

    #[test]
    fn pie_maps_category_to_color_and_value_to_angle() {
        let d = doc("VISUALIZE PIE SELECT rank, COUNT(rank) FROM Faculty GROUP BY rank");
        assert_eq!(d.mark, "arc");
        let v = d.to_vega_lite();
        assert_eq!(v["encoding"]["color"]["field"], "rank");
        assert_eq!(v["encoding"]["color"]["type"], "nominal");
        assert_eq!(v["encoding"]["theta"]["field"], "count");
        assert_eq!(v["encoding"]["theta"]["type"], "quantitative");
        assert_eq!(v["encoding"]["theta"]["title"], "COUNT(rank)");
        assert_eq!(v["data"]["values"][0], json!({"rank": "Professor", "count": 2.0}));
        assert_eq!(v["$schema"], VEGA_LITE_SCHEMA);
    }

    #[test]
    fn sort_hint_follows_order_by() {
        let d = doc("VISUALIZE BAR SELECT rank, COUNT(rank) FROM Faculty GROUP BY rank ORDER BY COUNT(rank) DESC");
        assert_eq!(
            d.sort,
            Some(SortHint { field: "count".into(), direction: SortDirection::Desc })
        );
        assert_eq!(d.to_vega_lite()["encoding"]["x"]["sort"], "-y");
        let d = doc("VISUALIZE BAR SELECT rank, SUM(salary) FROM Faculty GROUP BY rank ORDER BY rank ASC");
        assert_eq!(d.to_vega_lite()["encoding"]["x"]["sort"], "ascending");
        let d = doc("VISUALIZE PIE SELECT rank, SUM(salary) FROM Faculty GROUP BY rank ORDER BY SUM(salary) DESC");
        assert_eq!(d.to_vega_lite()["encoding"]["order"], json!({"field": "sum", "sort": "descending"}));
    }

    #[test]
    fn measures() {
        let d = doc("VISUALIZE LINE SELECT hired, COUNT(hired) FROM Faculty BIN hired BY YEAR");
        assert_eq!(d.x.measure, Measure::Temporal);
        let d = doc("VISUALIZE BAR SELECT hired, COUNT(hired) FROM Faculty BIN hired BY WEEKDAY");
        assert_eq!(d.x.measure, Measure::Ordinal);
        let d = doc("VISUALIZE SCATTER SELECT salary, hired FROM Faculty");
        assert_eq!((d.x.measure, d.y.measure), (Measure::Quantitative, Measure::Temporal));
        let d = doc("VISUALIZE BAR SELECT rank, MAX(hired) FROM Faculty GROUP BY rank");
        assert_eq!(d.y.measure, Measure::Temporal);
        let d = doc("VISUALIZE BAR SELECT salary, rank FROM Faculty");
        assert_eq!(d.y.measure, Measure::Nominal);
    }

    #[test]
    fn colliding_fields_are_disambiguated() {
        let d = doc("VISUALIZE BAR SELECT COUNT(*), COUNT(rank) FROM Faculty");
        assert_eq!((d.x.field.as_str(), d.y.field.as_str()), ("count", "count_2"));
        assert_eq!(d.rows.len(), 1);
    }

    #[test]
    fn dotted_field_names_are_escaped() {
        assert_eq!(field_ref("a.b[0]"), "a\\.b\\[0\\]");
    }

    #[test]
    fn mismatched_result_is_rejected() {
        let q = parse_vql("VISUALIZE BAR SELECT rank, COUNT(rank) FROM Faculty GROUP BY rank").unwrap();
        let other = parse_vql("VISUALIZE BAR SELECT rank, SUM(salary) FROM Faculty GROUP BY rank").unwrap();
        let r = execute(&other, &db()).unwrap();
        assert!(matches!(emit_chart(&q, &r), Err(SpecError::LabelMismatch { index: 1, .. })));
    }

    #[test]
    fn output_is_deterministic() {
        let a = doc("VISUALIZE BAR SELECT rank, COUNT(rank) FROM Faculty GROUP BY rank").to_json_string();
        let b = doc("VISUALIZE BAR SELECT rank, COUNT(rank) FROM Faculty GROUP BY rank").to_json_string();
        assert_eq!(a, b);
        assert!(a.starts_with("{\"$schema\""));
    }
}
