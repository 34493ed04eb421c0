//! Training-corpus construction: rule-based filtering, consistency
//! screening, slot decomposition of gold VQL, reasoning synthesis and
//! JSONL output.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cot::{constraint_block, decompose, reassemble, slot_names, SlotMap, StageId};
use crate::datastore::{describe_schema, sample_values, Database, DbResolver, DEFAULT_SAMPLES_PER_COLUMN};
use crate::model::{BackendError, ChatMessage, ChatRequest, ModelClient};
use crate::text::find_fenced;
use crate::vql::{canonicalize, parse_vql, validate, VqlQuery};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSample {
    pub id: String,
    pub db_id: String,
    pub nl_query: String,
    pub gold_vql: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCategory {
    pub count: usize,
    pub ids: Vec<String>,
}

impl FilterCategory {
    fn push(&mut self, id: &str) {
        self.count += 1;
        self.ids.push(id.to_string());
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub duplicates: FilterCategory,
    pub illegal: FilterCategory,
    pub empty: FilterCategory,
    pub inconsistent: FilterCategory,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.duplicates.count + self.illegal.count + self.empty.count + self.inconsistent.count
    }

    /// Moves a kept sample into the inconsistent category.
    pub fn mark_inconsistent(&mut self, id: &str) {
        self.kept -= 1;
        self.inconsistent.push(id);
    }
}

/// Lowercase with whitespace runs collapsed.
pub fn normalize_query(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Parses and validates a gold statement against its database.
pub fn legal_gold<R: DbResolver + ?Sized>(sample: &RawSample, dbs: &R) -> Option<VqlQuery> {
    let db = dbs.database(&sample.db_id)?;
    let q = parse_vql(&sample.gold_vql).ok()?;
    validate(&q, &db.schema()).is_valid().then_some(q)
}

/// Drops empty golds, then golds that fail to parse or validate (or name
/// an unknown database), then repeats of an earlier (query, VQL) pair.
/// Survivors keep their input order.
pub fn filter_corpus<R: DbResolver + ?Sized>(
    samples: &[RawSample],
    dbs: &R,
) -> (Vec<RawSample>, FilterReport) {
    let mut report = FilterReport { input: samples.len(), ..FilterReport::default() };
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    for s in samples {
        if s.gold_vql.trim().is_empty() {
            report.empty.push(&s.id);
            continue;
        }
        let Some(q) = legal_gold(s, dbs) else {
            report.illegal.push(&s.id);
            continue;
        };
        if !seen.insert((normalize_query(&s.nl_query), canonicalize(&q))) {
            report.duplicates.push(&s.id);
            continue;
        }
        kept.push(s.clone());
    }
    report.kept = kept.len();
    (kept, report)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("sample {id}: {message}")]
    Extraction { id: String, message: String, raw: String },
    #[error("sample {id}: unknown database {db_id}")]
    UnknownDatabase { id: String, db_id: String },
    #[error("sample {id}: gold VQL is not legal")]
    IllegalGold { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screening {
    pub verdict: Verdict,
    pub rationale: String,
}

const SCREEN_SYSTEM: &str = "You check text-to-visualization training data. \
Decide whether the VQL statement, given as parsed clauses, does what the question asks \
on the described database. Explain briefly, then finish with exactly one line \
`verdict: consistent` or `verdict: inconsistent`.";

fn render_slots(stages: &[SlotMap; 5], upto: usize) -> String {
    let mut s = String::new();
    for (stage, slots) in StageId::ALL.iter().zip(stages).take(upto) {
        for name in slot_names(*stage) {
            let v = slots.get(*name).map(String::as_str).unwrap_or("");
            s.push_str(&format!("[{stage}] {name}: {}\n", if v.is_empty() { "(none)" } else { v }));
        }
    }
    s
}

fn gold_for(sample: &RawSample, db: &Database) -> Result<VqlQuery, CorpusError> {
    let q = parse_vql(&sample.gold_vql).map_err(|_| CorpusError::IllegalGold { id: sample.id.clone() })?;
    if !validate(&q, &db.schema()).is_valid() {
        return Err(CorpusError::IllegalGold { id: sample.id.clone() });
    }
    Ok(q)
}

/// Reads the last `verdict:` line; everything else is the rationale.
pub fn parse_verdict(text: &str) -> Option<Screening> {
    let lines: Vec<&str> = text.lines().collect();
    let (at, verdict) = lines.iter().enumerate().rev().find_map(|(i, l)| {
        let l = l.trim().trim_matches(|c| c == '*' || c == '`').trim();
        let rest = l.get(..8).filter(|p| p.eq_ignore_ascii_case("verdict:")).map(|_| l[8..].trim())?;
        let rest = rest.trim_matches(|c: char| c == '*' || c == '`' || c == '.').to_ascii_lowercase();
        match rest.as_str() {
            "consistent" => Some((i, Verdict::Consistent)),
            "inconsistent" => Some((i, Verdict::Inconsistent)),
            _ => None,
        }
    })?;
    let rationale = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != at)
        .map(|(_, l)| *l)
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string();
    Some(Screening { verdict, rationale })
}

/// Asks the model whether the gold VQL answers the question.
pub fn screen_consistency(
    sample: &RawSample,
    db: &Database,
    client: &dyn ModelClient,
) -> Result<Screening, CorpusError> {
    let q = gold_for(sample, db)?;
    let stages = decompose(&q);
    let user = format!(
        "## Database schema\n{}\n\n## Question\n{}\n\n## VQL clauses\n{}",
        describe_schema(db).trim_end(),
        sample.nl_query.trim(),
        render_slots(&stages, 4),
    );
    let req = ChatRequest::new("screen", alloc::vec![ChatMessage::system(SCREEN_SYSTEM), ChatMessage::user(user)]);
    let raw = client.complete(&req)?;
    parse_verdict(&raw).ok_or_else(|| CorpusError::Extraction {
        id: sample.id.clone(),
        message: "no `verdict:` line in the screening answer".to_string(),
        raw,
    })
}

/// Gold slot sets per stage; S5 holds the canonical statement.
pub fn decompose_vql(gold: &VqlQuery) -> [SlotMap; 5] {
    decompose(gold)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordStage {
    pub stage: StageId,
    pub slots: SlotMap,
    pub reasoning: String,
}

/// One JSONL line of the training corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    pub db_id: String,
    pub nl_query: String,
    pub gold_vql: String,
    pub schema_description: String,
    pub value_samples: String,
    pub constraints: String,
    pub stages: Vec<RecordStage>,
    pub canonical_vql: String,
}

impl TrainingRecord {
    /// Statement rebuilt from the S1 to S4 slots.
    pub fn reassembled(&self) -> Option<VqlQuery> {
        if self.stages.len() != 5 {
            return None;
        }
        let s = &self.stages;
        reassemble(&[&s[0].slots, &s[1].slots, &s[2].slots, &s[3].slots]).ok()
    }

    /// Reassembled slots match the stored canonical gold.
    pub fn is_lossless(&self) -> bool {
        self.reassembled().is_some_and(|q| canonicalize(&q) == self.canonical_vql)
            && self.stages[4].slots.get("vql").map(String::as_str) == Some(self.canonical_vql.as_str())
    }
}

const REASON_SYSTEM: &str = "You write the reasoning for one step of a worked \
text-to-visualization solution. The answer for the step is fixed and given to you. \
Explain in plain prose why the question and the database lead to that answer. \
Do not change the answer and do not repeat the slot block.";

fn reasoning_prompt(
    stage: StageId,
    sample: &RawSample,
    schema: &str,
    samples: &str,
    gold: &[SlotMap; 5],
    prior: &[RecordStage],
) -> Vec<ChatMessage> {
    let mut u = format!(
        "## Database schema\n{}\n\n## Sample values\n{}\n\n## Question\n{}\n\n## Steps so far\n",
        schema.trim_end(),
        if samples.trim().is_empty() { "(none)" } else { samples.trim_end() },
        sample.nl_query.trim(),
    );
    if prior.is_empty() {
        u.push_str("(none)\n");
    }
    for p in prior {
        u.push_str(&format!("[{}] {}\nReasoning: {}\n", p.stage, p.stage.title(), p.reasoning));
    }
    u.push_str(&format!("\n## Step\n[{stage}] {}\n", stage.title()));
    for name in slot_names(stage) {
        let v = gold[stage.index()].get(*name).map(String::as_str).unwrap_or("");
        u.push_str(&format!("{name}: {}\n", if v.is_empty() { "(none)" } else { v }));
    }
    u.push_str("\n## Task\nWrite the reasoning for this step.");
    alloc::vec![
        ChatMessage::system(format!("{REASON_SYSTEM}\n\n{}", constraint_block())),
        ChatMessage::user(u),
    ]
}

/// Strips a surrounding code fence, if the whole answer is fenced.
fn clean_reasoning(text: &str) -> String {
    let t = text.trim();
    match find_fenced(t, None) {
        Some(f) if f.before.trim().is_empty() && f.after.trim().is_empty() => f.body.trim().to_string(),
        _ => t.to_string(),
    }
}

/// Writes reasoning for each stage with the gold slots fixed. Requests
/// use the purpose `reason:Sk`.
pub fn synthesize_reasoning(
    sample: &RawSample,
    db: &Database,
    client: &dyn ModelClient,
) -> Result<TrainingRecord, CorpusError> {
    let q = gold_for(sample, db)?;
    let gold = decompose_vql(&q);
    let schema = describe_schema(db);
    let samples = sample_values(db, &sample.nl_query, None, DEFAULT_SAMPLES_PER_COLUMN)?.render();
    let mut stages: Vec<RecordStage> = Vec::with_capacity(5);
    for stage in StageId::ALL {
        let messages = reasoning_prompt(stage, sample, &schema, &samples, &gold, &stages);
        let raw = client.complete(&ChatRequest::new(format!("reason:{stage}"), messages))?;
        let reasoning = clean_reasoning(&raw);
        if reasoning.is_empty() {
            return Err(CorpusError::Extraction {
                id: sample.id.clone(),
                message: format!("empty reasoning for {stage}"),
                raw,
            });
        }
        stages.push(RecordStage { stage, slots: gold[stage.index()].clone(), reasoning });
    }
    Ok(TrainingRecord {
        id: sample.id.clone(),
        db_id: sample.db_id.clone(),
        nl_query: sample.nl_query.clone(),
        gold_vql: sample.gold_vql.clone(),
        schema_description: schema,
        value_samples: samples,
        constraints: constraint_block(),
        stages,
        canonical_vql: canonicalize(&q),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleOutcome {
    Record(TrainingRecord),
    Inconsistent(Screening),
}

/// Screening (when enabled) followed by synthesis for one filtered sample.
pub fn process_sample(
    sample: &RawSample,
    db: &Database,
    client: &dyn ModelClient,
    screen: bool,
) -> Result<SampleOutcome, CorpusError> {
    if screen {
        let s = screen_consistency(sample, db, client)?;
        if s.verdict == Verdict::Inconsistent {
            return Ok(SampleOutcome::Inconsistent(s));
        }
    }
    synthesize_reasoning(sample, db, client).map(SampleOutcome::Record)
}

/// One JSON object per line, in the given order.
pub fn emit_dataset(records: &[TrainingRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// `round(rate * n)`, with `rate` clamped to `[0, 1]`.
pub fn audit_size(n: usize, rate: f64) -> usize {
    let r = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
    ((n as f64) * r + 0.5) as usize
}

/// Seeded random subset of `round(rate * N)` items, in input order.
pub fn quality_sample<T>(items: &[T], rate: f64, seed: u64) -> Vec<&T> {
    let k = audit_size(items.len(), rate).min(items.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, items.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| &items[i]).collect()
}

#[cfg(test)]
mod tests;
