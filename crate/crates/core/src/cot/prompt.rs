use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::slots::{is_required, parse_slot, slot_names, SlotError, SlotMap, StageId};
use super::trace::StageDecision;
use crate::model::ChatMessage;
use crate::text::{find_fenced, first_sentence};
use crate::vql::{AggregateFn, BinUnit, ChartType, Style};

/// Info string of the fenced block every stage answer must contain.
pub const SLOTS_FENCE: &str = "slots";
pub const SUMMARY_MAX_CHARS: usize = 140;

fn keywords<T: Copy>(all: &[T], kw: impl Fn(T) -> &'static str) -> String {
    all.iter().map(|v| kw(*v)).collect::<Vec<_>>().join(", ")
}

/// Rules handed to the model with every stage prompt. The closed sets are
/// read from the grammar so the two cannot drift apart.
pub fn constraint_block() -> String {
    format!(
        "Constraints for every answer:\n\
         - Chart types: {}.\n\
         - Aggregate functions: {}.\n\
         - Bin units: {}, written as BIN <column> BY <unit>.\n\
         - Columns: use only columns listed in the schema, and only columns of the FROM table or the JOIN table.\n\
         - No other function calls: write BIN date BY WEEKDAY, never WEEKDAY(date).\n\
         - Exactly two select items: the x axis first, then the y axis.",
        keywords(&ChartType::ALL, ChartType::keyword),
        keywords(&AggregateFn::ALL, AggregateFn::keyword),
        keywords(&BinUnit::ALL, BinUnit::keyword),
    )
}

fn instruction(stage: StageId) -> &'static str {
    match stage {
        StageId::S1 => "Step S1: choose the chart type that best answers the question.",
        StageId::S2 => {
            "Step S2: choose the FROM table, an optional JOIN (`table ON a = b`), the two select \
             items (x then y; aggregates allowed) and an optional WHERE condition."
        }
        StageId::S3 => {
            "Step S3: decide the data granularity: GROUP BY columns and/or a BIN clause \
             (`column BY unit`) for a date column. Leave both empty to plot rows individually."
        }
        StageId::S4 => {
            "Step S4: decide ORDER BY (one of the select items), the sort direction (ASC or DESC) \
             and LIMIT. Leave them empty when the chart does not need them."
        }
        StageId::S5 => "Step S5: combine the decisions above into one complete VQL statement.",
    }
}

/// Optional sections used by retries and corrections.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptExtras<'a> {
    /// The full trace being corrected.
    pub previous: Option<&'a [StageDecision]>,
    /// Node flagged by the user, with the hint text to show.
    pub flagged: Option<(&'a str, &'a str)>,
    pub preference: Option<&'a str>,
    /// Why the previous answer for this stage was rejected.
    pub feedback: Option<&'a str>,
}

/// Prior decision as it appears in later prompts.
pub fn render_decision(d: &StageDecision) -> String {
    let mut s = format!("[{}] {}\n", d.stage, d.stage.title());
    for name in slot_names(d.stage) {
        let v = d.slots.get(*name).map(String::as_str).unwrap_or("");
        s.push_str(&format!("{name}: {v}\n"));
    }
    if !d.reasoning.is_empty() {
        s.push_str("Reasoning: ");
        s.push_str(&d.reasoning);
        s.push('\n');
    }
    s
}

/// System message: constraints. User message: schema, samples, question,
/// prior decisions, optional correction context, then the stage task.
pub fn build_prompt(
    stage: StageId,
    nl_query: &str,
    schema_desc: &str,
    samples: &str,
    prior: &[StageDecision],
    extras: &PromptExtras<'_>,
) -> Vec<ChatMessage> {
    debug_assert!(prior.iter().map(|d| d.stage).eq(StageId::ALL[..stage.index()].iter().copied()));
    let mut u = String::new();
    u.push_str("## Database schema\n");
    u.push_str(schema_desc.trim_end());
    u.push_str("\n\n## Sample values\n");
    u.push_str(if samples.trim().is_empty() { "(none)" } else { samples.trim_end() });
    u.push_str("\n\n## Question\n");
    u.push_str(nl_query.trim());
    u.push_str("\n\n## Decisions so far\n");
    if prior.is_empty() {
        u.push_str("(none)\n");
    }
    for d in prior {
        u.push_str(&render_decision(d));
    }
    if let Some(prev) = extras.previous {
        u.push_str("\n## Previous reasoning\n");
        for d in prev {
            u.push_str(&render_decision(d));
        }
    }
    if let Some((node, hint)) = extras.flagged {
        u.push_str(&format!("\n## Flagged step\n{node}: {hint}\n"));
    }
    if let Some(p) = extras.preference {
        u.push_str("\n## User preference\n");
        u.push_str(p.trim());
        u.push('\n');
    }
    if let Some(f) = extras.feedback {
        u.push_str("\n## Rejected answer\n");
        u.push_str(f.trim_end());
        u.push('\n');
    }
    u.push_str("\n## Task\n");
    u.push_str(instruction(stage));
    u.push_str(&format!(
        "\nReply with a fenced block tagged `{SLOTS_FENCE}` holding one `name: value` line per slot \
         (leave the value empty when the clause is not used), then explain your reasoning.\n```{SLOTS_FENCE}\n"
    ));
    for name in slot_names(stage) {
        u.push_str(name);
        u.push_str(":\n");
    }
    u.push_str("```\n");
    alloc::vec![ChatMessage::system(constraint_block()), ChatMessage::user(u)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionFailure {
    MissingBlock,
    MissingSlot { slot: String },
    BadSlot { slot: String, message: String },
}

/// A stage answer that could not be turned into a decision. `raw` keeps
/// the model text so it can be fed back on retry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionError {
    pub stage: StageId,
    pub failure: ExtractionFailure,
    pub raw: String,
}

impl fmt::Display for ExtractionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            ExtractionFailure::MissingBlock => {
                write!(f, "{}: no ```{} block in the answer", self.stage, SLOTS_FENCE)
            }
            ExtractionFailure::MissingSlot { slot } => write!(f, "{}: slot {slot} is empty", self.stage),
            ExtractionFailure::BadSlot { slot, message } => {
                write!(f, "{}: slot {slot}: {message}", self.stage)
            }
        }
    }
}

impl core::error::Error for ExtractionError {}

pub fn parse_stage_output(stage: StageId, text: &str) -> Result<StageDecision, ExtractionError> {
    let fail = |failure| ExtractionError { stage, failure, raw: text.to_string() };
    let block = find_fenced(text, Some(SLOTS_FENCE)).ok_or_else(|| fail(ExtractionFailure::MissingBlock))?;

    let mut raw_slots = SlotMap::new();
    for line in block.body.lines() {
        if let Some((k, v)) = line.split_once(':') {
            raw_slots.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let mut slots = SlotMap::new();
    for name in slot_names(stage) {
        let raw = raw_slots.get(*name).map(String::as_str).unwrap_or("");
        let value = parse_slot(name, raw, Style::Source).map_err(|e| {
            fail(match e {
                SlotError::Parse { error, .. } => ExtractionFailure::BadSlot {
                    slot: name.to_string(),
                    message: error.to_string(),
                },
                other => ExtractionFailure::BadSlot { slot: name.to_string(), message: other.to_string() },
            })
        })?;
        if value.is_empty() && is_required(name) {
            return Err(fail(ExtractionFailure::MissingSlot { slot: name.to_string() }));
        }
        slots.insert(name.to_string(), value);
    }

    let reasoning = [block.before.trim(), block.after.trim()]
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join("\n\n");
    let summary = first_sentence(&reasoning, SUMMARY_MAX_CHARS);
    Ok(StageDecision { stage, slots, reasoning, summary })
}
