use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::slots::{canonical_slot, decompose, leaves, slot_names, SlotMap, StageId};
use crate::vql::{parse_vql, ParseError, VqlQuery};

/// One stage's extracted answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDecision {
    pub stage: StageId,
    pub slots: SlotMap,
    pub reasoning: String,
    pub summary: String,
}

impl StageDecision {
    pub fn slot(&self, name: &str) -> &str {
        self.slots.get(name).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Original,
    Modified,
    Regenerated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    #[serde(flatten)]
    pub decision: StageDecision,
    pub status: NodeStatus,
}

/// An S1–S4 slot whose value disagrees with the final VQL. The VQL is what
/// gets executed; the mismatch is kept for inspection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub stage: StageId,
    pub slot: String,
    pub stage_value: String,
    pub vql_value: String,
}

/// The branch replaced by a correction: stages `from_stage..=S5` as they
/// were before, kept under the flagged node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    pub id: String,
    pub anchor: String,
    pub from_stage: StageId,
    pub stages: Vec<StageRecord>,
}

impl Alternative {
    pub fn vql(&self) -> &str {
        self.stages.last().map_or("", |s| s.decision.slot("vql"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub nl_query: String,
    pub database: String,
    pub schema_description: String,
    pub value_samples: String,
    /// S1..S5, always five entries.
    pub stages: Vec<StageRecord>,
    #[serde(default)]
    pub divergences: Vec<Divergence>,
    #[serde(default)]
    pub alternatives: Vec<Alternative>,
}

/// Stage a node id belongs to: `S3`, `S3/GROUP_BY`, ...
pub fn node_stage(id: &str) -> Option<StageId> {
    let (stage, leaf) = match id.split_once('/') {
        Some((s, l)) => (s, Some(l)),
        None => (id, None),
    };
    let stage = StageId::from_name(stage)?;
    match leaf {
        None => Some(stage),
        Some(l) => leaves(stage).any(|x| x.key == l).then_some(stage),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativeView {
    pub id: String,
    pub summary: String,
    pub slots: SlotMap,
    pub vql: String,
}

/// Tree form served to clients: root S5, stage children, slot leaves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceNode {
    pub id: String,
    pub label: String,
    pub summary: String,
    pub reasoning: String,
    pub slots: SlotMap,
    pub status: NodeStatus,
    pub children: Vec<TraceNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<AlternativeView>,
}

impl TraceNode {
    pub fn find(&self, id: &str) -> Option<&TraceNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    /// Pre-order walk.
    pub fn walk(&self) -> Vec<&TraceNode> {
        let mut out = alloc::vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(TraceNode::depth).max().unwrap_or(0)
    }
}

fn subset(slots: &SlotMap, names: &[&str]) -> SlotMap {
    names
        .iter()
        .map(|n| (n.to_string(), slots.get(*n).cloned().unwrap_or_default()))
        .collect()
}

fn leaf_summary(slots: &SlotMap) -> String {
    let parts: Vec<&str> = slots.values().map(String::as_str).filter(|v| !v.is_empty()).collect();
    if parts.is_empty() {
        "(none)".into()
    } else {
        parts.join(" ")
    }
}

impl ReasoningTrace {
    /// A fresh trace, every stage `original`.
    pub fn new(
        nl_query: impl Into<String>,
        database: impl Into<String>,
        schema_description: impl Into<String>,
        value_samples: impl Into<String>,
        decisions: Vec<StageDecision>,
    ) -> Self {
        assert_eq!(decisions.len(), 5, "a trace holds exactly five stages");
        let mut t = ReasoningTrace {
            nl_query: nl_query.into(),
            database: database.into(),
            schema_description: schema_description.into(),
            value_samples: value_samples.into(),
            stages: decisions
                .into_iter()
                .map(|decision| StageRecord { decision, status: NodeStatus::Original })
                .collect(),
            divergences: Vec::new(),
            alternatives: Vec::new(),
        };
        t.refresh_divergences();
        t
    }

    pub fn stage(&self, id: StageId) -> &StageRecord {
        &self.stages[id.index()]
    }

    pub fn decisions(&self) -> Vec<StageDecision> {
        self.stages.iter().map(|s| s.decision.clone()).collect()
    }

    pub fn vql(&self) -> &str {
        self.stage(StageId::S5).decision.slot("vql")
    }

    pub fn query(&self) -> Result<VqlQuery, ParseError> {
        parse_vql(self.vql())
    }

    pub fn refresh_divergences(&mut self) {
        self.divergences.clear();
        let Ok(q) = self.query() else { return };
        let from_vql = decompose(&q);
        let mut found = Vec::new();
        for stage in &StageId::ALL[..4] {
            let d = &self.stage(*stage).decision;
            for name in slot_names(*stage) {
                let mine = canonical_slot(name, d.slot(name));
                let theirs = canonical_slot(name, from_vql[stage.index()].get(*name).map_or("", |s| s.as_str()));
                if mine != theirs {
                    found.push(Divergence {
                        stage: *stage,
                        slot: name.to_string(),
                        stage_value: d.slot(name).to_string(),
                        vql_value: from_vql[stage.index()][*name].clone(),
                    });
                }
            }
        }
        self.divergences = found;
    }

    pub fn alternative(&self, id: &str) -> Option<&Alternative> {
        self.alternatives.iter().find(|a| a.id == id)
    }

    pub fn tree(&self) -> TraceNode {
        let s5 = self.stage(StageId::S5);
        let mut root = TraceNode {
            id: "S5".into(),
            label: format!("S5 {}", StageId::S5.title()),
            summary: s5.decision.summary.clone(),
            reasoning: s5.decision.reasoning.clone(),
            slots: s5.decision.slots.clone(),
            status: s5.status,
            children: Vec::new(),
            alternatives: Vec::new(),
        };
        for stage in &StageId::ALL[..4] {
            let rec = self.stage(*stage);
            let mut node = TraceNode {
                id: stage.as_str().into(),
                label: format!("{} {}", stage, stage.title()),
                summary: rec.decision.summary.clone(),
                reasoning: rec.decision.reasoning.clone(),
                slots: SlotMap::new(),
                status: rec.status,
                children: Vec::new(),
                alternatives: Vec::new(),
            };
            for leaf in leaves(*stage) {
                let slots = subset(&rec.decision.slots, leaf.slots);
                node.children.push(TraceNode {
                    id: leaf.id(),
                    label: leaf.label.into(),
                    summary: leaf_summary(&slots),
                    reasoning: rec.decision.reasoning.clone(),
                    slots,
                    status: rec.status,
                    children: Vec::new(),
                    alternatives: Vec::new(),
                });
            }
            root.children.push(node);
        }
        for alt in &self.alternatives {
            let Some(stage) = node_stage(&alt.anchor) else { continue };
            let Some(rec) = alt.stages.iter().find(|s| s.decision.stage == stage) else { continue };
            let slots = match leaves(stage).find(|l| l.id() == alt.anchor) {
                Some(leaf) => subset(&rec.decision.slots, leaf.slots),
                None => rec.decision.slots.clone(),
            };
            let view = AlternativeView {
                id: alt.id.clone(),
                summary: rec.decision.summary.clone(),
                slots,
                vql: alt.vql().to_string(),
            };
            if alt.anchor == root.id {
                root.alternatives.push(view);
            } else if let Some(n) = find_mut(&mut root, &alt.anchor) {
                n.alternatives.push(view);
            }
        }
        root
    }

    /// Every node id of the tree, pre-order.
    pub fn node_ids(&self) -> Vec<String> {
        self.tree().walk().iter().map(|n| n.id.clone()).collect()
    }
}

fn find_mut<'a>(node: &'a mut TraceNode, id: &str) -> Option<&'a mut TraceNode> {
    if node.id == id {
        return Some(node);
    }
    node.children.iter_mut().find_map(|c| find_mut(c, id))
}
