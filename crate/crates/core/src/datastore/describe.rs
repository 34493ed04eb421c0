use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Cell, Database};
use crate::model::{BackendError, ChatMessage, ChatRequest, ModelClient};
use crate::text::find_fenced;

pub const DEFAULT_SAMPLES_PER_COLUMN: usize = 5;

/// One line per table: `Table <name>(<col>:<type>, ...)`, in load order.
pub fn describe_schema(db: &Database) -> String {
    let mut out = String::new();
    for (i, t) in db.tables().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "Table {}(", t.name());
        for (j, c) in t.schema().columns.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}:{}", c.name, c.ty);
        }
        out.push(')');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSample {
    pub table: String,
    pub column: String,
    pub values: Vec<Cell>,
}

/// Example values for the columns judged relevant to a question.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueSampleSet {
    pub columns: Vec<ColumnSample>,
}

impl ValueSampleSet {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Prompt text: one `table.column: v1, v2` line per column, text values
    /// double-quoted.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.columns.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = write!(out, "{}.{}: ", c.table, c.column);
            for (j, v) in c.values.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                match v {
                    Cell::Text(s) => {
                        let _ = write!(out, "{:?}", s);
                    }
                    other => {
                        let _ = write!(out, "{}", other);
                    }
                }
            }
        }
        out
    }
}

/// Lower-cased alphanumeric runs of at least three characters.
pub fn normalize_tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 3)
        .map(|t| t.to_lowercase())
        .collect()
}

/// Picks relevant columns and samples up to `k` distinct non-null values
/// from each, in first-occurrence order.
///
/// With a client, the model chooses the columns. Without one, a column is
/// chosen when its name or any of its values shares a normalized token
/// with the question.
pub fn sample_values(
    db: &Database,
    nl_query: &str,
    client: Option<&dyn ModelClient>,
    k: usize,
) -> Result<ValueSampleSet, BackendError> {
    let chosen: Vec<(usize, usize)> = match client {
        Some(c) => model_columns(db, nl_query, c)?,
        None => token_columns(db, nl_query),
    };
    let mut out = ValueSampleSet::default();
    for (ti, ci) in chosen {
        let table = &db.tables()[ti];
        let mut values: Vec<Cell> = Vec::new();
        for cell in table.column(ci) {
            if values.len() >= k {
                break;
            }
            if !cell.is_null() && !values.iter().any(|v| v == cell) {
                values.push(cell.clone());
            }
        }
        out.columns.push(ColumnSample {
            table: table.name().to_string(),
            column: table.schema().columns[ci].name.clone(),
            values,
        });
    }
    Ok(out)
}

fn token_columns(db: &Database, nl_query: &str) -> Vec<(usize, usize)> {
    let query_tokens = normalize_tokens(nl_query);
    let mut chosen = Vec::new();
    if query_tokens.is_empty() {
        return chosen;
    }
    let hit = |s: &str| normalize_tokens(s).iter().any(|t| query_tokens.contains(t));
    for (ti, t) in db.tables().iter().enumerate() {
        for (ci, c) in t.schema().columns.iter().enumerate() {
            let relevant = hit(&c.name)
                || t.column(ci).any(|cell| !cell.is_null() && hit(&cell.to_string()));
            if relevant {
                chosen.push((ti, ci));
            }
        }
    }
    chosen
}

fn model_columns(
    db: &Database,
    nl_query: &str,
    client: &dyn ModelClient,
) -> Result<Vec<(usize, usize)>, BackendError> {
    let request = ChatRequest::new(
        "sample-columns",
        vec![
            ChatMessage::system(
                "You pick the database columns needed to answer an analysis question.",
            ),
            ChatMessage::user(alloc::format!(
                "## Database schema\n{}\n\n## Question\n{}\n\n## Task\nList the relevant columns \
                 inside a ```columns fenced block, one `table.column` per line.",
                describe_schema(db),
                nl_query
            )),
        ],
    );
    let reply = client.complete(&request)?;
    let body = find_fenced(&reply, None).map_or(reply.as_str(), |f| f.body);
    let mut chosen = Vec::new();
    for line in body.lines() {
        let item = line.trim().trim_start_matches(['-', '*']).trim().trim_matches('`');
        let Some((tname, cname)) = item.split_once('.') else {
            continue;
        };
        let found = db.tables().iter().enumerate().find_map(|(ti, t)| {
            if !t.name().eq_ignore_ascii_case(tname.trim()) {
                return None;
            }
            t.schema().column_index(cname.trim()).map(|ci| (ti, ci))
        });
        if let Some(pos) = found {
            if !chosen.contains(&pos) {
                chosen.push(pos);
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{table_from_text, Table};
    use crate::model::{ScriptRule, ScriptedClient};

    fn table(name: &str, header: &[&str], rows: &[&[&str]]) -> Table {
        let h: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        let r: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        table_from_text(name, &h, &r).unwrap()
    }

    fn faculty() -> Database {
        Database::with_tables(
            "uni",
            vec![table(
                "Faculty",
                &["facid", "fname", "rank"],
                &[
                    &["1", "Ann", "AsstProf"],
                    &["2", "Bob", "AsstProf"],
                    &["3", "Cid", "Prof"],
                    &["4", "Dee", "AssocProf"],
                ],
            )],
        )
        .unwrap()
    }

    #[test]
    fn schema_lines() {
        assert_eq!(
            describe_schema(&faculty()),
            "Table Faculty(facid:number, fname:text, rank:text)"
        );
        let db = Database::with_tables(
            "two",
            vec![table("t", &["a"], &[&["1"]]), table("u", &["b"], &[&["x"]])],
        )
        .unwrap();
        assert_eq!(describe_schema(&db), "Table t(a:number)\nTable u(b:text)");
    }

    #[test]
    fn fallback_samples_rank() {
        let s = sample_values(&faculty(), "How many faculty of each rank?", None, 5).unwrap();
        let rank = s.columns.iter().find(|c| c.column == "rank").unwrap();
        assert_eq!(
            rank.values,
            vec![
                Cell::Text("AsstProf".into()),
                Cell::Text("Prof".into()),
                Cell::Text("AssocProf".into())
            ]
        );
        assert_eq!(s.render().lines().last().unwrap(), "Faculty.rank: \"AsstProf\", \"Prof\", \"AssocProf\"");
    }

    #[test]
    fn no_shared_token_no_samples() {
        let s = sample_values(&faculty(), "zz qq", None, 5).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn k_caps_samples() {
        let s = sample_values(&faculty(), "rank", None, 2).unwrap();
        assert_eq!(s.columns[0].values.len(), 2);
    }

    #[test]
    fn cell_values_select_columns() {
        let s = sample_values(&faculty(), "show professors named Ann", None, 5).unwrap();
        let names: Vec<_> = s.columns.iter().map(|c| c.column.as_str()).collect();
        assert_eq!(names, ["fname"]);
    }

    #[test]
    fn model_selected_columns() {
        let mut c = ScriptedClient::default();
        c.push_rule(
            ScriptRule {
                purpose: Some("sample-columns".into()),
                ..Default::default()
            },
            "```columns\nFaculty.rank\n- faculty.FNAME\nnope.x\n```",
        );
        let s = sample_values(&faculty(), "anything", Some(&c), 5).unwrap();
        let names: Vec<_> = s.columns.iter().map(|c| c.column.as_str()).collect();
        assert_eq!(names, ["rank", "fname"]);
        let failing = ScriptedClient::default();
        assert!(sample_values(&faculty(), "anything", Some(&failing), 5).is_err());
    }
}
