//! Independent reference implementations used as test oracles.
//!
//! Each oracle computes the expected answer by a different route than the
//! library: dense linear algebra from nalgebra, hand tokenization instead of
//! regex, brute-force window counting, straight-line sequential control flow.
#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use medfleet::corpus::{PaperRecord, QaPair};
use medfleet::distill::{
    parse_findings, parse_question, render_finding_prompt, render_question_prompt,
};
use medfleet::distill::{CompletionClient, QuestionOutcome};
use nalgebra::DMatrix;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Published per-specialty (code, journals, papers, papers-per-journal) rows
/// and the totals row, as printed.
pub const REFERENCE_DATASET_ROWS: [(&str, u64, u64, f64); 12] = [
    ("ALL", 39, 5049, 129.46),
    ("CAR", 144, 57810, 401.45),
    ("MET", 185, 31056, 167.87),
    ("GAS", 140, 34964, 249.74),
    ("HEM", 98, 38816, 396.08),
    ("INF", 130, 29579, 227.53),
    ("ONC", 319, 77977, 244.44),
    ("RES", 102, 27160, 266.27),
    ("RHE", 56, 11553, 206.30),
    ("URO", 126, 31148, 247.20),
    ("MED", 330, 52490, 159.06),
    ("Total", 1669, 397602, 238.22),
];

/// Published five-run serving results: (full time, full loads), lora time.
pub const REFERENCE_FULL_RUNS: [(f64, u64); 5] = [
    (630.25, 63),
    (498.25, 47),
    (584.51, 60),
    (547.92, 54),
    (490.98, 47),
];
pub const REFERENCE_LORA_RUNS: [f64; 5] = [312.62, 315.46, 337.39, 314.94, 298.78];

/// Expected value of full-swap loads per 100 requests: 100 × (1 − 5/11).
pub const ANALYTIC_MEAN_LOADS: f64 = 100.0 * 6.0 / 11.0;

// ---------------------------------------------------------------- LoRA

pub fn to_dense(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// `W + scale · (B · A)` with nalgebra's matrix product.
pub fn dense_merge(
    w: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    scale: f64,
) -> DMatrix<f64> {
    w + (b * a) * scale
}

pub fn max_abs_diff_dense(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    // nalgebra stores column-major; compare element by element in row-major order.
    let mut worst: f64 = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            worst = worst.max((x[(i, j)] - y[i * x.ncols() + j]).abs());
        }
    }
    worst
}

// ---------------------------------------------------------- keywords

/// Whole-word, case-insensitive keyword hit by splitting on non-word chars.
pub fn has_whole_word(text: &str, keywords: &[&str]) -> Option<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .find(|w| keywords.iter().any(|k| k == w))
}

// ------------------------------------------------------ distillation

/// Sequential, uncached reference for the QA pipeline: one abstract at a
/// time in numeric pmid order, one finding at a time, no retries.
pub fn reference_distill(
    records: &[PaperRecord],
    client: &dyn CompletionClient,
    keywords: &[&str],
) -> Vec<QaPair> {
    let mut ordered: Vec<&PaperRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.pmid.parse::<u64>().expect("numeric pmid"));
    let mut pairs = Vec::new();
    for record in ordered {
        let prompt =
            render_finding_prompt(&record.abstract_text).expect("fixture abstracts are non-empty");
        let completion = client.complete(&prompt).expect("mock never fails");
        let Ok(findings) = parse_findings(&completion.text, &record.pmid) else {
            continue;
        };
        for finding in findings {
            if has_whole_word(&finding.text, keywords).is_some() {
                continue;
            }
            let reply = client
                .complete(&render_question_prompt(&finding))
                .expect("mock never fails");
            if let QuestionOutcome::Question(question) = parse_question(&reply.text) {
                pairs.push(QaPair {
                    question,
                    answer: finding.text.clone(),
                    specialty: record.specialty.expect("fixture is routed"),
                    source_pmid: record.pmid.clone(),
                });
            }
        }
    }
    pairs
}

// ------------------------------------------------------- rate limits

/// Largest number of instants falling in any half-open window `[t, t + width)`,
/// checked from every instant.
pub fn brute_force_max_in_window(times: &[Duration], width: Duration) -> usize {
    times
        .iter()
        .map(|&start| {
            times
                .iter()
                .filter(|&&t| t >= start && t < start + width)
                .count()
        })
        .max()
        .unwrap_or(0)
}

// ------------------------------------------------------- statistics

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}
