//! Record-parallel diagnosis runs and the routing-policy bench.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Instant;

use adaptrag_core::{diagnose, DiagnosisOutcome, Engine, OutcomeStatus, PipelineError, Policy, RoutingDecision};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::formats::EmrRecord;

/// Applies `f` to every item on up to `workers` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut indexed: Vec<(usize, R)> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        local.push((i, f(item)));
                    }
                    local
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("batch worker panicked")).collect()
    });
    indexed.sort_unstable_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub policy: Policy,
    pub records: usize,
    pub completed: usize,
    /// Records that errored before routing plus those whose final call failed.
    pub failed: usize,
    pub direct: usize,
    pub retrieve: usize,
    pub retrieve_with_warning: usize,
    /// Share of routed records that went to retrieval.
    pub retrieval_rate: f64,
    pub mean_i_norm: f64,
    pub llm_calls: usize,
    pub retriever_queries: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    /// One per routed record, in input order.
    pub outcomes: Vec<DiagnosisOutcome>,
    /// Records that failed before an outcome existed.
    pub errors: Vec<PipelineError>,
    pub summary: BatchSummary,
}

pub fn summarize(policy: Policy, outcomes: &[DiagnosisOutcome], errors: usize, wall_ms: u64) -> BatchSummary {
    let count = |d: RoutingDecision| outcomes.iter().filter(|o| o.route == d).count();
    let (direct, retrieve, warned) = (count(RoutingDecision::Direct), count(RoutingDecision::Retrieve), count(RoutingDecision::RetrieveWithWarning));
    let routed = outcomes.len();
    let rate = |n: usize| if routed == 0 { 0.0 } else { n as f64 / routed as f64 };
    let completed = outcomes.iter().filter(|o| o.status == OutcomeStatus::Completed).count();
    BatchSummary {
        policy,
        records: routed + errors,
        completed,
        failed: errors + routed - completed,
        direct,
        retrieve,
        retrieve_with_warning: warned,
        retrieval_rate: rate(retrieve + warned),
        mean_i_norm: if routed == 0 { 0.0 } else { outcomes.iter().map(|o| o.i_norm).sum::<f64>() / routed as f64 },
        llm_calls: outcomes.iter().map(|o| o.call_counts.llm_calls).sum(),
        retriever_queries: outcomes.iter().map(|o| o.call_counts.retriever_queries).sum(),
        wall_ms,
    }
}

/// Diagnoses every record; per-record failures are isolated and counted.
pub fn run_batch(engine: &Engine<'_>, records: &[EmrRecord], policy: Policy, workers: usize) -> BatchReport {
    let start = Instant::now();
    let results = par_map(records, workers, |r| diagnose(engine, &r.id, &r.text, policy));
    let mut outcomes = Vec::with_capacity(records.len());
    let mut errors = Vec::new();
    for result in results {
        match result {
            Ok(outcome) => {
                if let OutcomeStatus::Failed { error, .. } = &outcome.status {
                    warn!(record = %outcome.record_id, %error, "final diagnosis call failed");
                }
                outcomes.push(outcome);
            }
            Err(e) => {
                warn!(record = %e.record_id, stage = ?e.stage, error = %e.message, "record failed");
                errors.push(e);
            }
        }
    }
    let summary = summarize(policy, &outcomes, errors.len(), start.elapsed().as_millis() as u64);
    info!(
        policy = policy.as_str(),
        records = summary.records,
        failed = summary.failed,
        retrieval_rate = summary.retrieval_rate,
        llm_calls = summary.llm_calls,
        "batch finished"
    );
    BatchReport { outcomes, errors, summary }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub policy: Policy,
    pub records: usize,
    pub retrieval_rate: f64,
    pub direct: usize,
    pub retrieved: usize,
    pub failed: usize,
    pub llm_calls: usize,
    pub retriever_queries: usize,
    pub wall_ms: u64,
}

impl From<&BatchSummary> for BenchRow {
    fn from(s: &BatchSummary) -> Self {
        Self {
            policy: s.policy,
            records: s.records,
            retrieval_rate: s.retrieval_rate,
            direct: s.direct,
            retrieved: s.retrieve + s.retrieve_with_warning,
            failed: s.failed,
            llm_calls: s.llm_calls,
            retriever_queries: s.retriever_queries,
            wall_ms: s.wall_ms,
        }
    }
}

/// Runs the same records under each policy.
pub fn bench(engine: &Engine<'_>, records: &[EmrRecord], policies: &[Policy], workers: usize) -> Vec<BenchRow> {
    policies.iter().map(|&p| BenchRow::from(&run_batch(engine, records, p, workers).summary)).collect()
}

pub fn write_bench_csv(writer: impl Write, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
