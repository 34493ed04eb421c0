use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cotvis::backend::{open_backend, BackendSpec, Bounded, HttpSettings};
use cotvis::build::{build_corpus, BuildOptions};
use cotvis::dataset::{eval_pairs, nvbench_db_root, read_samples};
use cotvis::load::{load_database, DbRoot};
use cotvis::server::{materialize, router, AppState, SessionStore};
use cotvis_core::corpus::{emit_dataset, filter_corpus};
use cotvis_core::cot::{run_pipeline, PipelineOptions};
use cotvis_core::datastore::{describe_schema, sample_values, Database, DEFAULT_SAMPLES_PER_COLUMN};
use cotvis_core::metrics::evaluate_corpus;

#[derive(Parser)]
#[command(name = "nlvis", version, about = "Natural-language to visualization with staged reasoning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a database's schema description and, for a question, its value samples.
    Describe(DescribeArgs),
    /// Answer one question and print the VQL, trace or chart spec.
    Run(RunArgs),
    /// Build or filter a training corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Score predictions against gold VQL.
    Eval(EvalArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct DbArgs {
    /// Database path (CSV directory or SQLite file) or an id under --db-root.
    #[arg(long)]
    db: String,
    #[arg(long, env = "NLVIS_DATA_ROOT")]
    db_root: Option<PathBuf>,
}

impl DbArgs {
    fn open(&self) -> anyhow::Result<Database> {
        let p = Path::new(&self.db);
        if p.exists() {
            return Ok(load_database(p)?);
        }
        let Some(root) = &self.db_root else {
            bail!("{} does not exist and no --db-root was given", self.db);
        };
        Ok((*DbRoot::new(root).load(&self.db)?).clone())
    }
}

#[derive(Args)]
struct DescribeArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long)]
    query: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_COLUMN)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Vql,
    Trace,
    ChartSpec,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long)]
    query: String,
    /// scripted:<fixture> or http:<url>
    #[arg(long, env = "NLVIS_BACKEND")]
    backend: BackendSpec,
    #[arg(long, value_enum, default_value = "vql")]
    emit: Emit,
    /// Let the model pick the sampled columns.
    #[arg(long)]
    model_sampling: bool,
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_COLUMN)]
    samples: usize,
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Filter, screen, decompose and annotate samples; write JSONL records.
    Build(BuildArgs),
    /// Apply the rule-based filter only.
    Filter(FilterArgs),
}

#[derive(Args)]
struct InputArgs {
    /// nvBench directory, nvBench JSON file, or JSONL of samples.
    #[arg(long)]
    input: PathBuf,
    /// Database directory; defaults to <input>/database for an nvBench checkout.
    #[arg(long)]
    db_root: Option<PathBuf>,
}

impl InputArgs {
    fn db_root(&self) -> anyhow::Result<DbRoot> {
        let root = self
            .db_root
            .clone()
            .or_else(|| nvbench_db_root(&self.input))
            .context("--db-root is required")?;
        Ok(DbRoot::new(root))
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "NLVIS_BACKEND")]
    backend: BackendSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.15)]
    sample_rate: f64,
    /// Where to write the audit subset; defaults to <out>.audit.jsonl.
    #[arg(long)]
    audit_out: Option<PathBuf>,
    /// Build report; defaults to <out>.report.json.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    jobs: usize,
    /// Skip the model consistency screen.
    #[arg(long)]
    no_screen: bool,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    report: PathBuf,
    /// Write the kept samples as JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    db_root: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "NLVIS_DATA_ROOT")]
    data_root: PathBuf,
    #[arg(long, env = "NLVIS_BACKEND")]
    backend: BackendSpec,
    #[arg(long, env = "NLVIS_BIND", default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, env = "NLVIS_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "NLVIS_MAX_IN_FLIGHT", default_value_t = 4)]
    max_in_flight: usize,
    /// Append-only session log; sessions are restored from it on start.
    #[arg(long, env = "NLVIS_PERSIST")]
    persist: Option<PathBuf>,
    #[arg(long, env = "NLVIS_SAMPLES_PER_COLUMN", default_value_t = DEFAULT_SAMPLES_PER_COLUMN)]
    samples: usize,
    #[arg(long, env = "NLVIS_MODEL_SAMPLING")]
    model_sampling: bool,
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn describe(a: DescribeArgs) -> anyhow::Result<()> {
    let db = a.db.open()?;
    println!("{}", describe_schema(&db).trim_end());
    if let Some(q) = &a.query {
        let s = sample_values(&db, q, None, a.samples)?;
        println!("\n{}", s.render().trim_end());
    }
    Ok(())
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let db = a.db.open()?;
    let client = open_backend(&a.backend, &HttpSettings::from_env())?;
    let opts = PipelineOptions { model_sampling: a.model_sampling, samples_per_column: a.samples };
    let out = run_pipeline(&a.query, &db, client.as_ref(), &opts).map_err(|e| {
        if let Some(t) = &e.trace {
            eprintln!("{}", serde_json::to_string_pretty(t).unwrap_or_default());
        }
        anyhow::anyhow!("{e}")
    })?;
    match a.emit {
        Emit::Vql => println!("{}", cotvis_core::vql::canonicalize(&out.query)),
        Emit::Trace => println!("{}", serde_json::to_string_pretty(&out.trace)?),
        Emit::ChartSpec => {
            let m = materialize(&out.trace, &db).map_err(anyhow::Error::msg)?;
            println!("{}", serde_json::to_string_pretty(&m.chart)?);
        }
    }
    Ok(())
}

fn corpus_filter(a: FilterArgs) -> anyhow::Result<()> {
    let samples = read_samples(&a.input.input)?;
    let root = a.input.db_root()?;
    let dbs = root.preload(samples.iter().map(|s| s.db_id.as_str()));
    let (kept, report) = filter_corpus(&samples, &dbs);
    write(&a.report, &serde_json::to_string_pretty(&report)?)?;
    if let Some(out) = &a.out {
        let mut text = String::new();
        for s in &kept {
            text.push_str(&serde_json::to_string(s)?);
            text.push('\n');
        }
        write(out, &text)?;
    }
    println!(
        "input={} kept={} duplicates={} illegal={} empty={}",
        report.input, report.kept, report.duplicates.count, report.illegal.count, report.empty.count
    );
    Ok(())
}

fn corpus_build(a: BuildArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&a.sample_rate) {
        bail!("--sample-rate must be within [0, 1]");
    }
    let samples = read_samples(&a.input.input)?;
    let root = a.input.db_root()?;
    let dbs = root.preload(samples.iter().map(|s| s.db_id.as_str()));
    let client = open_backend(&a.backend, &HttpSettings::from_env())?;
    let opts = BuildOptions { screen: !a.no_screen, jobs: a.jobs, sample_rate: a.sample_rate, seed: a.seed };
    let out = build_corpus(&samples, &dbs, client.as_ref(), &opts);
    write(&a.out, &emit_dataset(&out.records))?;
    let audit: Vec<_> = out.records.iter().filter(|r| out.report.audit.contains(&r.id)).cloned().collect();
    write(&a.audit_out.unwrap_or_else(|| sibling(&a.out, ".audit.jsonl")), &emit_dataset(&audit))?;
    write(&a.report.unwrap_or_else(|| sibling(&a.out, ".report.json")), &serde_json::to_string_pretty(&out.report)?)?;
    let f = &out.report.filter;
    println!(
        "input={} records={} duplicates={} illegal={} empty={} inconsistent={} failed={} audit={}",
        f.input,
        out.report.records,
        f.duplicates.count,
        f.illegal.count,
        f.empty.count,
        f.inconsistent.count,
        out.report.failures.len(),
        out.report.audit.len()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let pred = fs::read_to_string(&a.pred).with_context(|| a.pred.display().to_string())?;
    let gold = fs::read_to_string(&a.gold).with_context(|| a.gold.display().to_string())?;
    let pairs = eval_pairs(&pred, &gold)?;
    let root = DbRoot::new(&a.db_root);
    let dbs = root.preload(pairs.iter().map(|p| p.db_id.as_str()));
    let report = evaluate_corpus(&pairs, &dbs)?;
    write(&a.report, &serde_json::to_string_pretty(&report)?)?;
    println!(
        "count={} chart={:.4} axis={:.4} sql={:.4} data={:.4} all={:.4}",
        report.count, report.chart_acc, report.axis_acc, report.sql_acc, report.data_acc, report.all_acc
    );
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let inner = open_backend(&a.backend, &HttpSettings::from_env())?;
    let store = match &a.persist {
        Some(p) => SessionStore::persistent(p)?,
        None => SessionStore::in_memory(),
    };
    let state = Arc::new(AppState {
        dbs: DbRoot::new(&a.data_root),
        client: Arc::new(Bounded::new(inner, a.max_in_flight)),
        store,
        pipeline: PipelineOptions { model_sampling: a.model_sampling, samples_per_column: a.samples },
    });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.bind.as_str(), a.port)).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("NLVIS_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Describe(a) => describe(a),
        Cmd::Run(a) => run(a),
        Cmd::Corpus(CorpusCmd::Build(a)) => corpus_build(a),
        Cmd::Corpus(CorpusCmd::Filter(a)) => corpus_filter(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Serve(a) => serve(a),
    };
    if let Err(e) = r {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
