use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::prompt::{build_prompt, parse_stage_output, ExtractionError, PromptExtras};
use super::slots::StageId;
use super::trace::{ReasoningTrace, StageDecision};
use crate::datastore::{describe_schema, sample_values, Database, DEFAULT_SAMPLES_PER_COLUMN};
use crate::model::{BackendError, ChatRequest, ModelClient};
use crate::vql::{parse_vql, validate, ValidationReport, VqlQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Ask the model which columns to sample instead of matching tokens.
    pub model_sampling: bool,
    pub samples_per_column: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { model_sampling: false, samples_per_column: DEFAULT_SAMPLES_PER_COLUMN }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineCause {
    Backend(BackendError),
    Extraction(ExtractionError),
    Invalid(ValidationReport),
}

impl fmt::Display for PipelineCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineCause::Backend(e) => write!(f, "backend: {e}"),
            PipelineCause::Extraction(e) => write!(f, "{e}"),
            PipelineCause::Invalid(r) => write!(f, "invalid VQL:\n{}", r.render()),
        }
    }
}

/// Failure of a stage after its retry. When every stage produced a
/// decision (the final VQL was merely invalid) the trace is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    /// `None` when value sampling failed before any stage ran.
    pub stage: Option<StageId>,
    pub cause: PipelineCause,
    pub trace: Option<Box<ReasoningTrace>>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(s) => write!(f, "stage {s} failed: {}", self.cause),
            None => write!(f, "pipeline failed: {}", self.cause),
        }
    }
}

impl core::error::Error for PipelineError {}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub trace: ReasoningTrace,
    pub query: VqlQuery,
}

/// Inputs shared by every stage prompt of one run.
pub struct StageContext<'a> {
    pub nl_query: &'a str,
    pub db: &'a Database,
    pub schema_desc: &'a str,
    pub samples: &'a str,
    pub client: &'a dyn ModelClient,
}

impl StageContext<'_> {
    fn request(
        &self,
        stage: StageId,
        purpose: &str,
        prior: &[StageDecision],
        extras: &PromptExtras<'_>,
    ) -> Result<String, PipelineError> {
        let messages = build_prompt(stage, self.nl_query, self.schema_desc, self.samples, prior, extras);
        self.client
            .complete(&ChatRequest::new(purpose, messages))
            .map_err(|e| PipelineError { stage: Some(stage), cause: PipelineCause::Backend(e), trace: None })
    }
}

/// What went wrong with one attempt, and the text to feed back.
enum Rejection {
    Extraction(ExtractionError),
    Invalid(StageDecision, ValidationReport),
}

fn check(ctx: &StageContext<'_>, stage: StageId, text: &str) -> Result<StageDecision, Rejection> {
    let d = parse_stage_output(stage, text).map_err(Rejection::Extraction)?;
    if stage == StageId::S5 {
        // The slot already parsed; only schema validation can fail here.
        let q = parse_vql(d.slot("vql")).expect("vql slot was parsed during extraction");
        let report = validate(&q, &ctx.db.schema());
        if !report.is_valid() {
            return Err(Rejection::Invalid(d, report));
        }
    }
    Ok(d)
}

/// Runs one stage with a single retry. A retry happens when the answer
/// cannot be extracted or, for S5, when the VQL fails validation; the
/// problem is appended to the retry prompt.
///
/// On a second S5 validation failure the rejected decision is returned
/// next to the error so the caller can still assemble a trace.
pub fn run_stage(
    ctx: &StageContext<'_>,
    stage: StageId,
    purpose: &str,
    prior: &[StageDecision],
    extras: &PromptExtras<'_>,
) -> Result<StageDecision, (PipelineError, Option<StageDecision>)> {
    let first = ctx.request(stage, purpose, prior, extras).map_err(|e| (e, None))?;
    let feedback = match check(ctx, stage, &first) {
        Ok(d) => return Ok(d),
        Err(Rejection::Extraction(e)) => format!("{e}\nYour answer was:\n{}", e.raw),
        Err(Rejection::Invalid(d, report)) => format!(
            "The VQL `{}` violates the schema:\n{}",
            d.slot("vql"),
            report.render()
        ),
    };
    let retry_extras = PromptExtras { feedback: Some(&feedback), ..*extras };
    let second = ctx.request(stage, purpose, prior, &retry_extras).map_err(|e| (e, None))?;
    match check(ctx, stage, &second) {
        Ok(d) => Ok(d),
        Err(Rejection::Extraction(e)) => Err((
            PipelineError { stage: Some(stage), cause: PipelineCause::Extraction(e), trace: None },
            None,
        )),
        Err(Rejection::Invalid(d, report)) => Err((
            PipelineError { stage: Some(stage), cause: PipelineCause::Invalid(report), trace: None },
            Some(d),
        )),
    }
}

/// Runs the stages after those already in `decisions`, through S5.
/// `extras_for` gives the request purpose and extra prompt sections per
/// stage. An S5 validation failure carries the assembled trace.
pub fn run_from<'e>(
    ctx: &StageContext<'_>,
    mut decisions: Vec<StageDecision>,
    extras_for: &dyn Fn(StageId) -> (String, PromptExtras<'e>),
    db_name: &str,
) -> Result<Vec<StageDecision>, PipelineError> {
    let from = decisions.len();
    for stage in &StageId::ALL[from..] {
        let (purpose, extras) = extras_for(*stage);
        match run_stage(ctx, *stage, &purpose, &decisions, &extras) {
            Ok(d) => decisions.push(d),
            Err((mut err, rejected)) => {
                if let Some(d) = rejected {
                    decisions.push(d);
                    err.trace = Some(Box::new(ReasoningTrace::new(
                        ctx.nl_query,
                        db_name,
                        ctx.schema_desc,
                        ctx.samples,
                        decisions,
                    )));
                }
                return Err(err);
            }
        }
    }
    Ok(decisions)
}

/// Runs S1 to S5 in order. Each stage prompt carries only the decisions
/// of earlier stages.
pub fn run_pipeline(
    nl_query: &str,
    db: &Database,
    client: &dyn ModelClient,
    opts: &PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let schema_desc = describe_schema(db);
    let sampler = opts.model_sampling.then_some(client);
    let samples = sample_values(db, nl_query, sampler, opts.samples_per_column)
        .map_err(|e| PipelineError { stage: None, cause: PipelineCause::Backend(e), trace: None })?
        .render();
    let ctx = StageContext { nl_query, db, schema_desc: &schema_desc, samples: &samples, client };
    let decisions = run_from(
        &ctx,
        Vec::new(),
        &|stage| (format!("stage:{stage}"), PromptExtras::default()),
        db_name(db),
    )?;
    let trace = ReasoningTrace::new(nl_query, db_name(db), schema_desc.clone(), samples.clone(), decisions);
    let query = trace.query().expect("S5 vql was validated");
    Ok(PipelineOutcome { trace, query })
}

fn db_name(db: &Database) -> &str {
    &db.name
}

