//! Abstract → findings → filtered answers → questions.

use std::cmp::Ordering as CmpOrdering;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::{ClientError, CompletionClient};
use super::cost::StageUsage;
use super::filter::KeywordFilter;
use super::parse::{parse_findings, parse_question, QuestionOutcome, QuestionReject};
use super::prompts::{render_finding_prompt, render_question_prompt};
use crate::corpus::{PaperRecord, QaPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Filter,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TraceOutcome {
    Findings { count: usize },
    NoFindings { attempt: u32 },
    Kept,
    Filtered { keyword: String },
    Accepted,
    NotBiomedical,
    Rejected { reason: QuestionReject },
    ClientError { message: String },
}

/// One line of the trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub pmid: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub finding_index: Option<usize>,
    pub stage: Stage,
    #[serde(flatten)]
    pub outcome: TraceOutcome,
}

#[derive(Debug, Clone)]
pub struct DistillConfig {
    pub filter: KeywordFilter,
    /// Extraction attempts when a completion has no numbered findings.
    pub finding_attempts: u32,
    pub workers: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            filter: KeywordFilter::default(),
            finding_attempts: 1,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Distilled {
    pub pairs: Vec<QaPair>,
    pub trace: Vec<TraceEvent>,
    pub usage: StageUsage,
}

impl Distilled {
    fn absorb(&mut self, other: Distilled) {
        self.pairs.extend(other.pairs);
        self.trace.extend(other.trace);
        self.usage += other.usage;
    }

    pub fn dropped_at(&self, stage: Stage) -> usize {
        self.trace
            .iter()
            .filter(|e| {
                e.stage == stage
                    && !matches!(
                        e.outcome,
                        TraceOutcome::Kept | TraceOutcome::Accepted | TraceOutcome::Findings { .. }
                    )
            })
            .count()
    }
}

#[derive(Debug, Error)]
pub enum DistillErrorKind {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("abstract is empty")]
    EmptyAbstract,
    #[error("record has no sub-specialty; partition the corpus first")]
    Unrouted,
}

/// A failed abstract; `partial` keeps everything done before the failure.
#[derive(Debug, Error)]
#[error("distilling pmid {pmid}: {source}")]
pub struct DistillError {
    pub pmid: String,
    #[source]
    pub source: DistillErrorKind,
    pub partial: Box<Distilled>,
}

pub fn distill_abstract(
    record: &PaperRecord,
    client: &dyn CompletionClient,
    config: &DistillConfig,
) -> Result<Distilled, DistillError> {
    let pmid = record.pmid.clone();
    let mut out = Distilled::default();
    let fail = |source: DistillErrorKind, partial: Distilled| DistillError {
        pmid: pmid.clone(),
        source,
        partial: Box::new(partial),
    };
    let event = |finding_index, stage, outcome| TraceEvent {
        pmid: pmid.clone(),
        finding_index,
        stage,
        outcome,
    };

    let Some(specialty) = record.specialty else {
        return Err(fail(DistillErrorKind::Unrouted, out));
    };
    let Ok(prompt) = render_finding_prompt(&record.abstract_text) else {
        return Err(fail(DistillErrorKind::EmptyAbstract, out));
    };

    let mut findings = Vec::new();
    for attempt in 1..=config.finding_attempts.max(1) {
        let completion = match client.complete(&prompt) {
            Ok(c) => c,
            Err(e) => {
                out.trace.push(event(
                    None,
                    Stage::Extraction,
                    TraceOutcome::ClientError {
                        message: e.to_string(),
                    },
                ));
                return Err(fail(e.into(), out));
            }
        };
        out.usage.finding += completion.usage;
        match parse_findings(&completion.text, &record.pmid) {
            Ok(parsed) => {
                out.trace.push(event(
                    None,
                    Stage::Extraction,
                    TraceOutcome::Findings {
                        count: parsed.len(),
                    },
                ));
                findings = parsed;
                break;
            }
            Err(_) => out.trace.push(event(
                None,
                Stage::Extraction,
                TraceOutcome::NoFindings { attempt },
            )),
        }
    }

    for finding in findings {
        let idx = Some(finding.index);
        let verdict = config.filter.check(&finding);
        if let Some(keyword) = verdict.reason {
            out.trace.push(event(
                idx,
                Stage::Filter,
                TraceOutcome::Filtered { keyword },
            ));
            continue;
        }
        out.trace
            .push(event(idx, Stage::Filter, TraceOutcome::Kept));

        let completion = match client.complete(&render_question_prompt(&finding)) {
            Ok(c) => c,
            Err(e) => {
                out.trace.push(event(
                    idx,
                    Stage::Question,
                    TraceOutcome::ClientError {
                        message: e.to_string(),
                    },
                ));
                return Err(fail(e.into(), out));
            }
        };
        out.usage.question += completion.usage;
        match parse_question(&completion.text) {
            QuestionOutcome::Question(question) => {
                out.trace
                    .push(event(idx, Stage::Question, TraceOutcome::Accepted));
                out.pairs.push(QaPair {
                    question,
                    answer: finding.text,
                    specialty,
                    source_pmid: record.pmid.clone(),
                });
            }
            QuestionOutcome::NotBiomedical => {
                out.trace
                    .push(event(idx, Stage::Question, TraceOutcome::NotBiomedical));
            }
            QuestionOutcome::Reject(reason) => {
                out.trace.push(event(
                    idx,
                    Stage::Question,
                    TraceOutcome::Rejected { reason },
                ));
            }
        }
    }
    Ok(out)
}

/// Orders numeric pmids numerically, falling back to text order.
pub fn pmid_order(a: &str, b: &str) -> CmpOrdering {
    (a.len(), a).cmp(&(b.len(), b))
}

/// Distills many abstracts on `config.workers` threads.
///
/// Output is ordered by (pmid, finding index) regardless of completion order.
/// If any abstract fails, the error for the first failing pmid is returned.
pub fn distill_corpus(
    records: &[PaperRecord],
    client: &dyn CompletionClient,
    config: &DistillConfig,
) -> Result<Distilled, DistillError> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| pmid_order(&records[a].pmid, &records[b].pmid));

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Distilled, DistillError>>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..config.workers.clamp(1, records.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&ri) = order.get(i) else { break };
                let result = distill_abstract(&records[ri], client, config);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut out = Distilled::default();
    for slot in slots {
        out.absorb(slot.into_inner().unwrap().expect("every record ran")?);
    }
    Ok(out)
}
