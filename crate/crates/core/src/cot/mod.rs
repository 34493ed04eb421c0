//! The five-stage reasoning pipeline: stage prompts, slot extraction,
//! trace assembly, and the sequential runner.
//!
//! Stages: S1 chart type, S2 data retrieval, S3 granularity (grouping and
//! binning), S4 refinement (ordering and limit), S5 the final VQL.

mod pipeline;
mod prompt;
mod slots;
mod trace;

pub use pipeline::{
    run_from, run_pipeline, run_stage, PipelineCause, PipelineError, PipelineOptions, PipelineOutcome,
    StageContext,
};
pub use prompt::{
    build_prompt, constraint_block, parse_stage_output, render_decision, ExtractionError,
    ExtractionFailure, PromptExtras, SLOTS_FENCE, SUMMARY_MAX_CHARS,
};
pub use slots::{
    canonical_slot, decompose, leaf_for_slot, leaves, parse_slot, reassemble, slot_names,
    Leaf, SlotError, SlotMap, StageId,
};
pub use trace::{
    node_stage, Alternative, AlternativeView, Divergence, NodeStatus, ReasoningTrace, StageDecision,
    StageRecord, TraceNode,
};
