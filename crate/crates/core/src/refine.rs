//! Corrections on a finished trace: re-prompt one flagged stage, regenerate
//! every later stage, and report what changed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cot::{
    canonical_slot, node_stage, Alternative, NodeStatus, PipelineError, PromptExtras,
    ReasoningTrace, StageContext, StageId, TraceNode,
};
use crate::datastore::Database;
use crate::model::ModelClient;

/// Hint shown with a self-correction request.
pub const SELF_CORRECTION_HINT: &str = "this step may contain an error. Check the decision against \
the question, the schema and the sample values, and revise it if it does not serve the question.";

/// Hint shown with a manual correction; the preference follows in its own section.
pub const MANUAL_CORRECTION_HINT: &str =
    "the user asked to revise this step. Follow the user preference below.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionMode {
    #[serde(rename = "self")]
    SelfCorrect,
    #[serde(rename = "manual")]
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub node: String,
    pub mode: CorrectionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown alternative {0}")]
    UnknownAlternative(String),
    #[error("a manual correction needs a non-empty preference")]
    EmptyPreference,
    #[error("a self correction takes no preference")]
    UnexpectedPreference,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Node-level comparison of two traces of the same query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDiff {
    pub unchanged: Vec<String>,
    pub modified: Vec<String>,
    /// Per modified node, the slots whose values differ.
    pub changed_slots: BTreeMap<String, Vec<String>>,
    /// Nodes whose reasoning text differs, whether or not a slot changed.
    pub reasoning_changed: Vec<String>,
    /// Alternatives present in the new trace only.
    pub alternatives: Vec<String>,
}

/// Nodes are matched by id. A node is modified iff one of its slots has a
/// different canonical value; stage nodes carry no slots and so are never
/// modified.
pub fn diff_traces(old: &ReasoningTrace, new: &ReasoningTrace) -> TraceDiff {
    let old_tree = old.tree();
    let new_tree = new.tree();
    let mut diff = TraceDiff::default();
    for a in old_tree.walk() {
        let Some(b) = new_tree.find(&a.id) else { continue };
        let changed = changed_slots(a, b);
        if changed.is_empty() {
            diff.unchanged.push(a.id.clone());
        } else {
            diff.modified.push(a.id.clone());
            diff.changed_slots.insert(a.id.clone(), changed);
        }
        if a.reasoning != b.reasoning {
            diff.reasoning_changed.push(a.id.clone());
        }
    }
    diff.alternatives = new
        .alternatives
        .iter()
        .filter(|alt| old.alternative(&alt.id).is_none())
        .map(|alt| alt.id.clone())
        .collect();
    diff
}

fn changed_slots(a: &TraceNode, b: &TraceNode) -> Vec<String> {
    let mut names: Vec<&String> = a.slots.keys().chain(b.slots.keys()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .filter(|n| {
            let va = a.slots.get(*n).map_or("", String::as_str);
            let vb = b.slots.get(*n).map_or("", String::as_str);
            canonical_slot(n, va) != canonical_slot(n, vb)
        })
        .cloned()
        .collect()
}

pub fn correct(
    trace: &ReasoningTrace,
    req: &CorrectionRequest,
    db: &Database,
    client: &dyn ModelClient,
) -> Result<(ReasoningTrace, TraceDiff), RefineError> {
    let pref = req.preference.as_deref().map(str::trim).filter(|p| !p.is_empty());
    match req.mode {
        CorrectionMode::SelfCorrect if pref.is_some() => Err(RefineError::UnexpectedPreference),
        CorrectionMode::SelfCorrect => self_correct(trace, &req.node, db, client),
        CorrectionMode::Manual => {
            manual_correct(trace, &req.node, pref.ok_or(RefineError::EmptyPreference)?, db, client)
        }
    }
}

pub fn self_correct(
    trace: &ReasoningTrace,
    node: &str,
    db: &Database,
    client: &dyn ModelClient,
) -> Result<(ReasoningTrace, TraceDiff), RefineError> {
    rerun(trace, node, None, db, client)
}

pub fn manual_correct(
    trace: &ReasoningTrace,
    node: &str,
    preference: &str,
    db: &Database,
    client: &dyn ModelClient,
) -> Result<(ReasoningTrace, TraceDiff), RefineError> {
    let preference = preference.trim();
    if preference.is_empty() {
        return Err(RefineError::EmptyPreference);
    }
    rerun(trace, node, Some(preference), db, client)
}

fn resolve(trace: &ReasoningTrace, node: &str) -> Result<StageId, RefineError> {
    node_stage(node)
        .filter(|_| trace.tree().find(node).is_some())
        .ok_or_else(|| RefineError::UnknownNode(node.to_string()))
}

fn rerun(
    trace: &ReasoningTrace,
    node: &str,
    preference: Option<&str>,
    db: &Database,
    client: &dyn ModelClient,
) -> Result<(ReasoningTrace, TraceDiff), RefineError> {
    let k = resolve(trace, node)?;
    let previous = trace.decisions();
    let hint = if preference.is_some() { MANUAL_CORRECTION_HINT } else { SELF_CORRECTION_HINT };
    let ctx = StageContext {
        nl_query: &trace.nl_query,
        db,
        schema_desc: &trace.schema_description,
        samples: &trace.value_samples,
        client,
    };
    let extras_for = |stage: StageId| {
        if stage == k {
            (
                format!("correct:{stage}"),
                PromptExtras {
                    previous: Some(&previous),
                    flagged: Some((node, hint)),
                    preference,
                    feedback: None,
                },
            )
        } else {
            (format!("stage:{stage}"), PromptExtras { preference, ..PromptExtras::default() })
        }
    };
    let decisions = crate::cot::run_from(&ctx, previous[..k.index()].to_vec(), &extras_for, &trace.database)?;

    let mut next = ReasoningTrace::new(
        trace.nl_query.clone(),
        trace.database.clone(),
        trace.schema_description.clone(),
        trace.value_samples.clone(),
        decisions,
    );
    for rec in &mut next.stages[k.index()..] {
        rec.status = if rec.decision.stage == k { NodeStatus::Modified } else { NodeStatus::Regenerated };
    }
    next.alternatives = alloc::vec![Alternative {
        id: format!("alt:{node}"),
        anchor: node.to_string(),
        from_stage: k,
        stages: trace.stages[k.index()..].to_vec(),
    }];
    let diff = diff_traces(trace, &next);
    Ok((next, diff))
}

/// Makes an alternative branch current again and drops the other branch.
pub fn promote_alternative(
    trace: &ReasoningTrace,
    alt_id: &str,
) -> Result<(ReasoningTrace, TraceDiff), RefineError> {
    let alt = trace
        .alternative(alt_id)
        .ok_or_else(|| RefineError::UnknownAlternative(alt_id.to_string()))?;
    let k = alt.from_stage.index();
    let mut next = trace.clone();
    next.stages.truncate(k);
    for rec in &mut next.stages {
        rec.status = NodeStatus::Original;
    }
    for rec in &alt.stages {
        let mut rec = rec.clone();
        rec.status = if rec.decision.stage == alt.from_stage {
            NodeStatus::Modified
        } else {
            NodeStatus::Regenerated
        };
        next.stages.push(rec);
    }
    next.alternatives.clear();
    next.refresh_divergences();
    let diff = diff_traces(trace, &next);
    Ok((next, diff))
}
