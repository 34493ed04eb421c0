//! Corpus construction over many samples with a bounded worker pool.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use cotvis_core::corpus::{filter_corpus, process_sample, quality_sample, FilterReport, RawSample, SampleOutcome, TrainingRecord};
use cotvis_core::datastore::Database;
use cotvis_core::model::ModelClient;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub screen: bool,
    pub jobs: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { screen: true, jobs: 4, sample_rate: 0.15, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub filter: FilterReport,
    pub records: usize,
    pub failures: Vec<Failure>,
    /// Ids of the audit subset, drawn from the final records.
    pub audit: Vec<String>,
}

pub struct BuildOutput {
    pub records: Vec<TrainingRecord>,
    pub report: BuildReport,
}

/// Filter, then screen and synthesize each kept sample. Up to `jobs`
/// samples are processed at once; records keep input order.
pub fn build_corpus(
    samples: &[RawSample],
    dbs: &BTreeMap<String, Arc<Database>>,
    client: &dyn ModelClient,
    opts: &BuildOptions,
) -> BuildOutput {
    let (kept, mut filter) = filter_corpus(samples, dbs);
    let slots: Vec<Mutex<Option<Result<SampleOutcome, String>>>> = kept.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..opts.jobs.max(1).min(kept.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(sample) = kept.get(i) else { break };
                let db = &dbs[&sample.db_id];
                let out = process_sample(sample, db, client, opts.screen).map_err(|e| e.to_string());
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (sample, slot) in kept.iter().zip(slots) {
        match slot.into_inner().expect("slot lock").expect("every sample processed") {
            Ok(SampleOutcome::Record(r)) => records.push(r),
            Ok(SampleOutcome::Inconsistent(_)) => filter.mark_inconsistent(&sample.id),
            Err(error) => {
                tracing::warn!(id = %sample.id, %error, "sample skipped");
                failures.push(Failure { id: sample.id.clone(), error });
            }
        }
    }
    let audit = quality_sample(&records, opts.sample_rate, opts.seed).into_iter().map(|r| r.id.clone()).collect();
    BuildOutput {
        report: BuildReport { filter, records: records.len(), failures, audit },
        records,
    }
}
