//! Reading nvBench-style sample files and evaluation inputs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cotvis_core::corpus::RawSample;
use cotvis_core::metrics::EvalPair;
use indexmap::IndexMap;
use serde::Deserialize;

#[derive(Deserialize)]
struct NvEntry {
    db_id: String,
    vis_query: NvVis,
    #[serde(default)]
    nl_queries: Vec<String>,
}

#[derive(Deserialize)]
struct NvVis {
    #[serde(rename = "VQL")]
    vql: String,
}

/// Parses the nvBench JSON object. Each (entry, question) pair becomes one
/// sample with id `<key>#<n>`; entries keep file order.
pub fn parse_nvbench(text: &str) -> anyhow::Result<Vec<RawSample>> {
    let entries: IndexMap<String, NvEntry> = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for (key, e) in entries {
        for (i, q) in e.nl_queries.into_iter().enumerate() {
            out.push(RawSample {
                id: format!("{key}#{i}"),
                db_id: e.db_id.clone(),
                nl_query: q,
                gold_vql: e.vis_query.vql.clone(),
            });
        }
    }
    Ok(out)
}

pub fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> anyhow::Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}", i + 1)))
        .collect()
}

fn nvbench_file(dir: &Path) -> Option<PathBuf> {
    ["NVBench.json", "nvBench.json", "nvbench.json"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Samples from an nvBench directory, an nvBench JSON file, or a JSONL
/// file of `{id, db_id, nl_query, gold_vql}` objects.
pub fn read_samples(path: &Path) -> anyhow::Result<Vec<RawSample>> {
    let file = if path.is_dir() {
        nvbench_file(path).with_context(|| format!("{}: no NVBench.json inside", path.display()))?
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).with_context(|| file.display().to_string())?;
    let samples = if file.extension().is_some_and(|e| e == "jsonl") {
        parse_jsonl(&text)
    } else {
        parse_nvbench(&text)
    }
    .with_context(|| file.display().to_string())?;
    Ok(samples)
}

/// The directory holding nvBench's per-database folders, if `input` is an
/// nvBench checkout.
pub fn nvbench_db_root(input: &Path) -> Option<PathBuf> {
    let d = input.join("database");
    d.is_dir().then_some(d)
}

#[derive(Deserialize)]
struct GoldLine {
    id: String,
    db_id: String,
    #[serde(alias = "gold_vql")]
    vql: String,
}

#[derive(Deserialize)]
struct PredLine {
    id: String,
    #[serde(alias = "predicted", alias = "pred_vql")]
    vql: String,
}

/// Joins predictions to golds by id, in gold order. A gold without a
/// prediction is scored against an empty prediction.
pub fn eval_pairs(pred_text: &str, gold_text: &str) -> anyhow::Result<Vec<EvalPair>> {
    let golds: Vec<GoldLine> = parse_jsonl(gold_text).context("gold file")?;
    let preds: Vec<PredLine> = parse_jsonl(pred_text).context("prediction file")?;
    let mut by_id: HashMap<String, String> = HashMap::new();
    for p in preds {
        if by_id.insert(p.id.clone(), p.vql).is_some() {
            bail!("duplicate prediction id {}", p.id);
        }
    }
    let mut missing = 0usize;
    let pairs: Vec<EvalPair> = golds
        .into_iter()
        .map(|g| {
            let predicted = by_id.remove(&g.id).unwrap_or_else(|| {
                missing += 1;
                String::new()
            });
            EvalPair { id: g.id, db_id: g.db_id, predicted, gold: g.vql }
        })
        .collect();
    if missing > 0 {
        tracing::warn!(missing, "gold items without a prediction");
    }
    if !by_id.is_empty() {
        tracing::warn!(extra = by_id.len(), "predictions without a gold item were ignored");
    }
    Ok(pairs)
}
