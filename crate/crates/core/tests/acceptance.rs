//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use medfleet::adapter::{lora_merge, lora_unmerge, LayerDelta, Matrix};
use medfleet::corpus::{
    self, papers_per_journal, Finding, PaperRecord, QaPair, StatsRow, SubSpecialty,
};
use medfleet::distill::filter::DEFAULT_KEYWORDS;
use medfleet::distill::{distill_corpus, filter_finding, DistillConfig, KeywordFilter, MockClient};
use medfleet::partition::{
    compute_stats, JournalCatalog, StatsTable, WhitespaceTokenizer, WordPunctTokenizer,
};
use medfleet::pubmed::{
    ingest_journals, EutilsClient, FakeClock, FetchCachePolicy, FixtureEutils, IngestOptions,
    UreqTransport,
};
use medfleet::sim::{run_seeded, SimConfig, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

// 1. Full-swap load counts match the stationary miss rate and cover the published runs.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::default();
    let mut loads: Vec<u64> = (1..=1000u64)
        .map(|seed| run_seeded(Strategy::FullSwap, 100, &cfg, seed).map(|r| r.model_loads))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let m = mean(&loads.iter().map(|&l| l as f64).collect::<Vec<_>>());
    loads.sort_unstable();
    let (lo, hi) = (percentile(&loads, 0.5), percentile(&loads, 99.5));
    let detail = format!(
        "mean loads {m:.2} (analytic {ANALYTIC_MEAN_LOADS:.2}), envelope [{lo}, {hi}], {:.2}s",
        elapsed.as_secs_f64()
    );
    check(
        (53.0..=56.0).contains(&m),
        format!("mean out of [53, 56]: {detail}"),
    )?;
    for (_, published) in REFERENCE_FULL_RUNS {
        check(
            (lo..=hi).contains(&published),
            format!("{published} outside envelope: {detail}"),
        )?;
    }
    let within = loads.iter().filter(|&&l| (35..=75).contains(&l)).count();
    check(
        within >= 999,
        format!("only {within}/1000 runs in [35, 75]"),
    )?;
    check(
        elapsed < Duration::from_secs(5),
        format!("too slow: {detail}"),
    )?;
    Ok(detail)
}

// 2. Adapter swapping beats full swapping on paired seeds, with less spread.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::default();
    let mut full = Vec::new();
    let mut lora = Vec::new();
    let mut wins = 0;
    for seed in 1..=1000u64 {
        let f = run_seeded(Strategy::FullSwap, 100, &cfg, seed).map_err(|e| e.to_string())?;
        let l = run_seeded(Strategy::LoraSwap, 100, &cfg, seed).map_err(|e| e.to_string())?;
        check(
            l.weight_loads == 100,
            format!("seed {seed}: {} weight loads", l.weight_loads),
        )?;
        wins += usize::from(l.total_time_s < f.total_time_s);
        full.push(f.total_time_s);
        lora.push(l.total_time_s);
    }
    let elapsed = start.elapsed();
    let (sd_f, sd_l) = (sample_sd(&full), sample_sd(&lora));
    let detail = format!(
        "lora faster in {wins}/1000, sd lora {sd_l:.2} < full {sd_f:.2}, {:.2}s",
        elapsed.as_secs_f64()
    );
    check(wins >= 950, format!("dominance too weak: {detail}"))?;
    check(sd_l < sd_f, format!("spread not lower: {detail}"))?;
    check(
        elapsed < Duration::from_secs(5),
        format!("too slow: {detail}"),
    )?;
    Ok(detail)
}

// 3. Calibrated defaults land inside the published time bands.
fn criterion_3() -> Outcome {
    let cfg = SimConfig::default();
    let mut lora_in = 0;
    let mut full_in = 0;
    for seed in 1..=1000u64 {
        let f = run_seeded(Strategy::FullSwap, 100, &cfg, seed).map_err(|e| e.to_string())?;
        let l = run_seeded(Strategy::LoraSwap, 100, &cfg, seed).map_err(|e| e.to_string())?;
        lora_in += usize::from((290.0..=345.0).contains(&l.total_time_s));
        full_in += usize::from((460.0..=660.0).contains(&f.total_time_s));
    }
    let detail = format!("lora in [290, 345]: {lora_in}/1000, full in [460, 660]: {full_in}/1000");
    check(lora_in >= 900 && full_in >= 800, detail.clone())?;
    Ok(detail)
}

// 4. Published papers-per-journal cells and hand-counted stats on a synthetic corpus.
fn criterion_4() -> Outcome {
    let rows: Vec<StatsRow> = REFERENCE_DATASET_ROWS[..11]
        .iter()
        .map(|&(code, j, p, _)| StatsRow::new(Some(code.parse().unwrap()), j, p))
        .collect();
    let table = StatsTable::from_rows(rows);
    for (row, &(code, journals, papers, expected)) in
        table.all_rows().zip(REFERENCE_DATASET_ROWS.iter())
    {
        check(
            row.label() == code,
            format!("row order: {} vs {code}", row.label()),
        )?;
        check(
            row.journals == journals && row.papers == papers,
            format!("{code}: totals differ"),
        )?;
        check(
            format!("{:.2}", row.papers_per_journal) == format!("{expected:.2}"),
            format!("{code}: {} vs {expected}", row.papers_per_journal),
        )?;
    }
    check(papers_per_journal(397602, 1669) == 238.22, "total 238.22")?;

    let catalog = JournalCatalog::from_entries([
        ("Alpha Cardiology", SubSpecialty::CAR),
        ("Beta Heart", SubSpecialty::CAR),
        ("Gamma Gut", SubSpecialty::GAS),
        ("Delta Blood", SubSpecialty::HEM),
    ])
    .map_err(|e| e.to_string())?;
    let rec = |pmid: &str, journal: &str, text: &str| PaperRecord {
        pmid: pmid.into(),
        journal: journal.into(),
        title: String::new(),
        abstract_text: text.into(),
        pub_year: 2015,
        specialty: None,
    };
    let records = [
        rec("1", "Alpha Cardiology", "Aspirin reduced events."),
        rec(
            "2",
            "Alpha Cardiology",
            "Statins lower LDL by 40% in adults.",
        ),
        rec("3", "Beta Heart", "Beta blockers help."),
        rec(
            "4",
            "Gamma Gut",
            "Fibre lowers colitis risk in older adults.",
        ),
        rec("5", "gamma  GUT", "Probiotics shorten diarrhea."),
    ];
    let qa = |s| QaPair {
        question: "q?".into(),
        answer: "a.".into(),
        specialty: s,
        source_pmid: "1".into(),
    };
    let pairs = [
        qa(SubSpecialty::CAR),
        qa(SubSpecialty::CAR),
        qa(SubSpecialty::GAS),
    ];

    let ws = compute_stats(&records, &catalog, &WhitespaceTokenizer, Some(&pairs))
        .map_err(|e| e.to_string())?;
    let wp =
        compute_stats(&records, &catalog, &WordPunctTokenizer, None).map_err(|e| e.to_string())?;
    // (journals, papers, ppj, whitespace tokens, wordpunct tokens, qa), counted by hand
    let expected = [
        (
            ws.row(SubSpecialty::CAR),
            wp.row(SubSpecialty::CAR),
            (2, 3, 1.50, 13, 17, 2),
        ),
        (
            ws.row(SubSpecialty::GAS),
            wp.row(SubSpecialty::GAS),
            (1, 2, 2.00, 10, 12, 1),
        ),
        (
            ws.row(SubSpecialty::HEM),
            wp.row(SubSpecialty::HEM),
            (0, 0, 0.00, 0, 0, 0),
        ),
        (&ws.total, &wp.total, (3, 5, 1.66, 23, 29, 3)),
    ];
    for (a, b, (j, p, ppj, t_ws, t_wp, q)) in expected {
        let got = (
            a.journals,
            a.papers,
            a.papers_per_journal,
            a.tokens,
            b.tokens,
            a.qa_pairs,
        );
        check(
            got == (j, p, ppj, t_ws, t_wp, q),
            format!("{}: got {got:?}", a.label()),
        )?;
    }
    Ok(
        "11 published rows + total reproduced to 2 decimals; synthetic stats match hand counts"
            .into(),
    )
}

fn random_finding(rng: &mut impl Rng, i: usize) -> Finding {
    const WORDS: &[&str] = &[
        "aspirin",
        "reduced",
        "mortality",
        "in",
        "patients",
        "with",
        "heart",
        "failure",
        "studies",
        "Studied",
        "Authors",
        "authorship",
        "papers",
        "resulted",
        "results",
        "abstracts",
        "departmental",
        "cohort",
        "HbA1c",
        "STUDY",
        "Paper",
        "result",
        "abstract",
        "author",
        "department",
        "study-based",
        "paper's",
        "Result:",
        "(study)",
        "sub_study",
        "departments",
        "x-department",
        "findings",
        "e.g.",
        "2.5",
        "mg/dL",
    ];
    let n = rng.random_range(3..14);
    let mut words: Vec<&str> = (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    if rng.random_bool(0.3) {
        words.retain(|w| has_whole_word(w, &DEFAULT_KEYWORDS).is_none());
    }
    Finding {
        text: format!("{}.", words.join(" ")),
        source_pmid: "1".into(),
        index: i + 1,
    }
}

// 5. Parallel pipeline equals a straight-line reference; filter is sound and complete.
fn criterion_5() -> Outcome {
    let records =
        corpus::read_corpus(&fixtures().join("abstracts.jsonl")).map_err(|e| e.to_string())?;
    check(
        records.len() == 20,
        format!("fixture has {} abstracts", records.len()),
    )?;
    let client = MockClient::default();
    let pipeline = distill_corpus(
        &records,
        &client,
        &DistillConfig {
            workers: 8,
            ..DistillConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let reference = reference_distill(&records, &client, &DEFAULT_KEYWORDS);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    corpus::write_jsonl(&pipeline.pairs, &mut a).map_err(|e| e.to_string())?;
    corpus::write_jsonl(&reference, &mut b).map_err(|e| e.to_string())?;
    check(
        !a.is_empty() && a == b,
        format!(
            "outputs differ ({} vs {} pairs)",
            pipeline.pairs.len(),
            reference.len()
        ),
    )?;
    for pair in &pipeline.pairs {
        check(
            has_whole_word(&pair.answer, &DEFAULT_KEYWORDS).is_none(),
            format!("keyword in answer: {}", pair.answer),
        )?;
    }

    let filter = KeywordFilter::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut kept = 0;
    for i in 0..10_000 {
        let f = random_finding(&mut rng, i);
        let verdict = filter_finding(&f, &filter);
        let oracle = has_whole_word(&f.text, &DEFAULT_KEYWORDS);
        check(
            verdict.kept == oracle.is_none(),
            format!("filter disagrees with oracle on `{}`", f.text),
        )?;
        kept += usize::from(verdict.kept);
    }
    Ok(format!(
        "{} pairs byte-identical to reference; 10000 findings ({kept} kept) agree with oracle",
        pipeline.pairs.len()
    ))
}

// 6. Merge and round-trip against dense products; linearity in the scale.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_merge, mut worst_trip, mut worst_lin): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let d = rng.random_range(1..=64);
        let k = rng.random_range(1..=64);
        let r = rng.random_range(1..=8usize.min(d).min(k));
        let scale = rng.random_range(-4.0..4.0);
        let w = Matrix::random(d, k, 1.0, &mut rng);
        let a = Matrix::random(r, k, 1.0, &mut rng);
        let b = Matrix::random(d, r, 1.0, &mut rng);
        let delta = LayerDelta::new("w", a.clone(), b.clone(), scale).map_err(|e| e.to_string())?;

        let merged = lora_merge(&w, &delta).map_err(|e| e.to_string())?;
        let oracle = dense_merge(
            &to_dense(d, k, w.as_slice()),
            &to_dense(d, r, b.as_slice()),
            &to_dense(r, k, a.as_slice()),
            scale,
        );
        worst_merge = worst_merge.max(max_abs_diff_dense(&oracle, merged.as_slice()));
        worst_trip = worst_trip.max(
            lora_unmerge(&merged, &delta)
                .map_err(|e| e.to_string())?
                .max_abs_diff(&w),
        );

        let alpha = rng.random_range(-3.0..3.0);
        let scaled = lora_merge(&w, &delta.with_scale(alpha * scale)).map_err(|e| e.to_string())?;
        for ((s, m), w0) in scaled
            .as_slice()
            .iter()
            .zip(merged.as_slice())
            .zip(w.as_slice())
        {
            worst_lin = worst_lin.max(((s - w0) - alpha * (m - w0)).abs());
        }
    }
    let detail = format!("max errors: merge {worst_merge:.1e}, round-trip {worst_trip:.1e}, linearity {worst_lin:.1e}");
    check(
        worst_merge <= 1e-9 && worst_trip <= 1e-6 && worst_lin <= 1e-9,
        detail.clone(),
    )?;
    Ok(detail)
}

// 7. Fixture-server ingest is deterministic, cache-served on rerun, and rate limited.
fn criterion_7() -> Outcome {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let articles =
        std::fs::read_to_string(fixtures().join("articles.json")).map_err(|e| err(&e))?;
    let catalog =
        JournalCatalog::load_path(&fixtures().join("catalog.csv")).map_err(|e| err(&e))?;
    let jobs: Vec<_> = catalog
        .entries()
        .into_iter()
        .map(|(n, s)| (n.to_string(), s))
        .collect();
    let options = IngestOptions {
        page_size: 5,
        ..IngestOptions::default()
    };

    let service = FixtureEutils::from_json(&articles).map_err(|e| err(&e))?;
    let server = service.serve().map_err(|e| err(&e))?;
    let run = |cache: &std::path::Path| -> Result<(Vec<u8>, usize), String> {
        let transport = Arc::new(UreqTransport::new(Duration::from_secs(10)));
        let client = EutilsClient::new(&FetchCachePolicy::new(cache), transport)
            .with_base_url(server.base_url());
        let mut records = Vec::new();
        for outcome in ingest_journals(&client, &jobs, options, 4) {
            records.extend(outcome.map_err(|e| err(&e))?.records);
        }
        let mut bytes = Vec::new();
        corpus::write_jsonl(&records, &mut bytes).map_err(|e| err(&e))?;
        Ok((bytes, client.network_requests()))
    };
    let cache = tempfile::tempdir().map_err(|e| err(&e))?;
    let (first, first_requests) = run(cache.path())?;
    let served = service.request_count();
    let (second, second_requests) = run(cache.path())?;
    let other_cache = tempfile::tempdir().map_err(|e| err(&e))?;
    let (third, _) = run(other_cache.path())?;
    check(
        !first.is_empty() && first == second && first == third,
        "ingest output not byte-identical",
    )?;
    check(
        second_requests == 0 && service.request_count() == 2 * served,
        format!("rerun made {second_requests} requests"),
    )?;

    let clock = Arc::new(FakeClock::new());
    let limited_cache = tempfile::tempdir().map_err(|e| err(&e))?;
    let fresh = FixtureEutils::from_json(&articles).map_err(|e| err(&e))?;
    let client = EutilsClient::new(
        &FetchCachePolicy::new(limited_cache.path()),
        Arc::new(fresh.clone()),
    )
    .with_base_url("http://fixture/entrez/eutils")
    .with_clock(clock);
    for outcome in ingest_journals(&client, &jobs, options, 4) {
        outcome.map_err(|e| err(&e))?;
    }
    let grants = client.limiter().grants();
    let worst = brute_force_max_in_window(&grants, Duration::from_secs(1));
    check(
        grants.len() == fresh.request_count(),
        "limiter missed requests",
    )?;
    check(
        worst <= 3,
        format!("{worst} requests in one 1-second window"),
    )?;
    Ok(format!(
        "{} bytes identical over 3 runs; first run {first_requests} requests, rerun 0; max {worst}/s over {} fake-clock grants",
        first.len(),
        grants.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("full-swap load counts", criterion_1),
        ("adapter-swap dominance", criterion_2),
        ("time bands", criterion_3),
        ("dataset table arithmetic", criterion_4),
        ("distillation oracle", criterion_5),
        ("adapter arithmetic", criterion_6),
        ("fixture ingestion", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
