//! Command-line front end.
//!
//! Every subcommand reads one config file (flags win over config values),
//! writes its outputs under the configured directories and prints a single
//! JSON summary line on stdout. Exit codes: 0 success, 1 domain failure,
//! 2 usage or config error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::adapter::{self, AdapterRegistry, ModelSpec};
use crate::config::{parse_config, ClientKind, Config, ConfigError};
use crate::corpus::{self, PaperRecord, QaPair};
use crate::distill::client::{HttpCompletionClient, RateLimitedClient, RecordingClient};
use crate::distill::{
    compute_cost, distill_corpus, CompletionClient, DistillConfig, KeywordFilter, MockClient,
    ReplayClient,
};
use crate::partition::{self, JournalCatalog, Partition, PartitionError};
use crate::pubmed::{
    ingest_journals, EutilsClient, FetchCachePolicy, FixtureEutils, IngestOptions, RateLimiter,
    Transport, UreqTransport,
};
use crate::sim::{self, InferDist, SimConfig, SimReport, Strategy};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "medfleet",
    version,
    about = "Specialty corpus building, QA distillation and adapter-fleet serving simulation"
)]
pub struct Cli {
    /// Config file (TOML). Without one, defaults apply relative to the working directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Never touch the network; serve from cache or fixtures only.
    #[arg(long, global = true)]
    pub offline: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Harvest abstracts for every catalog journal into the corpus directory.
    Ingest(IngestArgs),
    /// Route the ingested corpus into one file per sub-specialty.
    Partition(PartitionArgs),
    /// Distill question-answer pairs from the partitioned corpus.
    Distill(DistillArgs),
    /// Per-specialty dataset statistics as CSV.
    Stats(StatsArgs),
    /// Adapter sizes versus full-model memory.
    FleetReport(FleetArgs),
    /// One serving simulation.
    Simulate(SimulateArgs),
    /// Paired full-swap and adapter-swap runs over several seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Only these journals (default: every catalog journal).
    #[arg(long = "journal")]
    pub journals: Vec<String>,
    #[arg(long)]
    pub min_year: Option<i32>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Corpus to route (default: <corpus_dir>/ingested.jsonl).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    /// Routed corpus file (default: the partition files in corpus_dir).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// mock, replay or http.
    #[arg(long)]
    pub client: Option<String>,
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Save every completion for later replay.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// `specialty,pt_steps,sft_steps` CSV to include.
    #[arg(long)]
    pub steps: Option<PathBuf>,
    /// QA dataset (default: <out_dir>/qa.jsonl when present).
    #[arg(long)]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    pub tokenizer: Option<String>,
}

#[derive(Debug, Args)]
pub struct FleetArgs {
    /// Adapter manifest (JSONL); a synthetic fleet is used otherwise.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<f64>,
    #[arg(long)]
    pub bytes_per_param: Option<f64>,
    #[arg(long)]
    pub budget_bytes: Option<f64>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Also write the fleet's manifest here.
    #[arg(long)]
    pub write_manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SimFlags {
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long)]
    pub requests: Option<usize>,
    #[arg(long)]
    pub load_s: Option<f64>,
    #[arg(long)]
    pub overhead_s: Option<f64>,
    #[arg(long)]
    pub unload_s: Option<f64>,
    /// Use a constant inference time instead of the configured distribution.
    #[arg(long)]
    pub infer_fixed: Option<f64>,
    /// Count the initial model loads.
    #[arg(long)]
    pub include_warmup: bool,
    /// Reload a fresh cache before every request.
    #[arg(long)]
    pub reload_each_round: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// full or lora.
    #[arg(long)]
    pub strategy: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub runs: Option<usize>,
    /// `1..5` (inclusive), `1,2,3` or a single seed.
    #[arg(long)]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub sim: SimFlags,
}

/// Parses `a..b` (inclusive), `a..=b`, `a,b,c` or `a`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse seeds `{text}`"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    if let Some((a, b)) = text.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',').map(num).collect()
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => Config::with_base(Path::new(".")),
    };
    if let Some(out) = &cli.out_dir {
        config.out_dir = out.clone();
    }
    config.offline |= cli.offline;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| domain(format!("creating {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| domain(format!("writing {}: {e}", path.display())))
}

fn load_catalog(config: &Config) -> Result<JournalCatalog, CliError> {
    if !config.catalog_path.is_file() {
        return Err(CliError::Usage(format!(
            "catalog {} does not exist",
            config.catalog_path.display()
        )));
    }
    JournalCatalog::load_path(&config.catalog_path).map_err(domain)
}

fn cmd_ingest(config: &Config, args: &IngestArgs) -> Result<Value, CliError> {
    let catalog = load_catalog(config)?;
    let mut jobs: Vec<(String, corpus::SubSpecialty)> = catalog
        .entries()
        .into_iter()
        .map(|(n, s)| (n.to_string(), s))
        .collect();
    if !args.journals.is_empty() {
        let mut picked = Vec::new();
        for name in &args.journals {
            let spec = catalog
                .lookup(name)
                .ok_or_else(|| domain(PartitionError::UnroutedJournal(name.clone())))?;
            picked.push((partition::normalize_journal(name), spec));
        }
        jobs = picked;
    }

    let transport: Arc<dyn Transport> = match &config.fixture_articles {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| domain(format!("reading {}: {e}", path.display())))?;
            Arc::new(FixtureEutils::from_json(&text).map_err(domain)?)
        }
        None => Arc::new(UreqTransport::new(Duration::from_secs(30))),
    };
    let policy = FetchCachePolicy {
        cache_dir: config.cache_dir.clone(),
        offline_only: config.offline,
        max_requests_per_second: config.requests_per_second,
    };
    let client = EutilsClient::from_env(&policy, transport);
    let options = IngestOptions {
        min_year: args.min_year.unwrap_or(config.min_year),
        page_size: config.page_size,
    };

    let mut records: Vec<PaperRecord> = Vec::new();
    let mut summaries = Vec::new();
    for result in ingest_journals(
        &client,
        &jobs,
        options,
        args.workers.unwrap_or(config.workers),
    ) {
        let outcome = result.map_err(domain)?;
        records.extend(outcome.records);
        summaries.push(outcome.summary);
    }
    let path = config.ingested_path();
    create_dir(&config.corpus_dir)?;
    corpus::write_corpus(&records, &path).map_err(domain)?;

    let skipped: usize = summaries.iter().map(|s| s.skipped.len()).sum();
    Ok(json!({
        "command": "ingest",
        "journals": summaries.len(),
        "records": records.len(),
        "skipped": skipped,
        "cached_hits": summaries.iter().map(|s| s.cached_hits).sum::<usize>(),
        "network_requests": client.network_requests(),
        "output": path,
    }))
}

fn cmd_partition(config: &Config, args: &PartitionArgs) -> Result<Value, CliError> {
    let catalog = load_catalog(config)?;
    let input = args.input.clone().unwrap_or_else(|| config.ingested_path());
    if !input.is_file() {
        return Err(CliError::Usage(format!(
            "corpus {} does not exist",
            input.display()
        )));
    }
    let records = corpus::read_corpus(&input).map_err(domain)?;
    let parts = partition::partition_corpus(&records, &catalog).map_err(domain)?;
    parts.write_dir(&config.corpus_dir).map_err(domain)?;
    let counts: serde_json::Map<String, Value> = parts
        .groups
        .iter()
        .map(|(s, r)| (s.code().to_string(), json!(r.len())))
        .collect();
    Ok(
        json!({"command": "partition", "records": parts.len(), "groups": counts, "output_dir": config.corpus_dir}),
    )
}

fn completion_client(
    config: &Config,
    args: &DistillArgs,
) -> Result<Box<dyn CompletionClient>, CliError> {
    let kind = match args.client.as_deref() {
        None => config.llm.client,
        Some("mock") => ClientKind::Mock,
        Some("replay") => ClientKind::Replay,
        Some("http") => ClientKind::Http,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown client `{other}` (mock, replay, http)"
            )))
        }
    };
    Ok(match kind {
        ClientKind::Mock => Box::new(MockClient::default()),
        ClientKind::Replay => {
            let path = args
                .replay
                .clone()
                .or_else(|| config.llm.replay_path.clone())
                .ok_or_else(|| {
                    CliError::Usage("replay client needs --replay or llm.replay_path".into())
                })?;
            let file = File::open(&path)
                .map_err(|e| CliError::Usage(format!("replay file {}: {e}", path.display())))?;
            Box::new(ReplayClient::load(file).map_err(domain)?)
        }
        ClientKind::Http => {
            if config.offline {
                return Err(CliError::Usage(
                    "the http client cannot run in offline mode".into(),
                ));
            }
            let http =
                HttpCompletionClient::from_env().map_err(|e| CliError::Usage(e.to_string()))?;
            match config.llm.requests_per_second {
                Some(rate) => Box::new(RateLimitedClient::new(
                    http,
                    Arc::new(RateLimiter::per_second(rate)),
                )),
                None => Box::new(http),
            }
        }
    })
}

fn cmd_distill(config: &Config, args: &DistillArgs) -> Result<Value, CliError> {
    let records: Vec<PaperRecord> = match &args.input {
        Some(path) => corpus::read_corpus(path).map_err(domain)?,
        None => Partition::read_dir(&config.corpus_dir)
            .map_err(domain)?
            .records()
            .cloned()
            .collect(),
    };
    let record_path = args
        .record
        .clone()
        .or_else(|| config.llm.record_path.clone());
    let client = RecordingClient::new(completion_client(config, args)?);
    let distill_config = DistillConfig {
        filter: KeywordFilter::new(config.filter.keywords.clone(), config.filter.mode),
        finding_attempts: config.llm.finding_attempts,
        workers: args.workers.unwrap_or(config.workers),
    };
    let out = distill_corpus(&records, &client, &distill_config).map_err(domain)?;

    let qa_path = config.out_dir.join("qa.jsonl");
    let trace_path = config.out_dir.join("trace.jsonl");
    let cost_path = config.out_dir.join("cost.json");
    corpus::write_jsonl(&out.pairs, create_file(&qa_path)?).map_err(domain)?;
    corpus::write_jsonl(&out.trace, create_file(&trace_path)?).map_err(domain)?;
    let cost = compute_cost(
        &out.usage,
        config.llm.price_per_1k_prompt,
        config.llm.price_per_1k_completion,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    serde_json::to_writer_pretty(create_file(&cost_path)?, &cost).map_err(domain)?;
    if let Some(path) = &record_path {
        corpus::write_jsonl(&client.entries(), create_file(path)?).map_err(domain)?;
    }
    Ok(json!({
        "command": "distill",
        "abstracts": records.len(),
        "qa_pairs": out.pairs.len(),
        "filtered": out.dropped_at(crate::distill::pipeline::Stage::Filter),
        "cost": (cost.total * 100.0).round() / 100.0,
        "output": qa_path,
    }))
}

fn cmd_stats(config: &Config, args: &StatsArgs) -> Result<Value, CliError> {
    let catalog = load_catalog(config)?;
    let tokenizer_name = args.tokenizer.as_deref().unwrap_or(&config.tokenizer);
    let tokenizer =
        partition::tokenizer_by_name(tokenizer_name).map_err(|e| CliError::Usage(e.to_string()))?;
    let parts = Partition::read_dir(&config.corpus_dir).map_err(domain)?;
    let records: Vec<PaperRecord> = parts.records().cloned().collect();
    let qa_path = args
        .qa
        .clone()
        .unwrap_or_else(|| config.out_dir.join("qa.jsonl"));
    let qa: Option<Vec<QaPair>> = if qa_path.is_file() {
        Some(corpus::read_jsonl(File::open(&qa_path).map_err(domain)?).map_err(domain)?)
    } else if args.qa.is_some() {
        return Err(CliError::Usage(format!(
            "qa file {} does not exist",
            qa_path.display()
        )));
    } else {
        None
    };
    let mut table = partition::compute_stats(&records, &catalog, tokenizer.as_ref(), qa.as_deref())
        .map_err(domain)?;
    if let Some(path) = &args.steps {
        let file = File::open(path)
            .map_err(|e| CliError::Usage(format!("steps file {}: {e}", path.display())))?;
        table = table.with_steps(&partition::load_steps(file).map_err(domain)?);
    }
    let out = config.out_dir.join("stats.csv");
    table.write_csv(create_file(&out)?).map_err(domain)?;
    Ok(json!({
        "command": "stats",
        "papers": table.total.papers,
        "journals": table.total.journals,
        "tokens": table.total.tokens,
        "qa_pairs": table.total.qa_pairs,
        "output": out,
    }))
}

fn cmd_fleet(config: &Config, args: &FleetArgs) -> Result<Value, CliError> {
    let f = &config.fleet;
    let params = args.params.map_or(f.param_count, |p| p as u64);
    let mut model = ModelSpec::new(params, args.bytes_per_param.unwrap_or(f.bytes_per_param));
    for l in &f.layers {
        model = model.with_layer(&l.name, l.d, l.k);
    }
    let manifest = args.manifest.clone().or_else(|| f.manifest.clone());
    let registry = match &manifest {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))?;
            let mut reg = AdapterRegistry::new();
            for a in adapter::read_manifest(file).map_err(domain)? {
                reg.register(a).map_err(domain)?;
            }
            reg
        }
        None => {
            adapter::synthetic_fleet(&model, args.rank.unwrap_or(f.rank), f.seed).map_err(domain)?
        }
    };
    let budget = args.budget_bytes.unwrap_or(f.budget_bytes);
    let report = adapter::fleet_report(&model, &registry, budget).map_err(domain)?;
    let txt = config.out_dir.join("fleet_report.txt");
    let js = config.out_dir.join("fleet_report.json");
    std::io::Write::write_all(&mut create_file(&txt)?, report.render().as_bytes())
        .map_err(domain)?;
    serde_json::to_writer_pretty(create_file(&js)?, &report).map_err(domain)?;
    if let Some(path) = &args.write_manifest {
        let adapters: Vec<_> = registry.adapters().cloned().collect();
        corpus::write_jsonl(&adapter::to_manifest(&adapters), create_file(path)?)
            .map_err(domain)?;
    }
    Ok(json!({
        "command": "fleet-report",
        "adapters": report.rows.len(),
        "model_bytes": report.model_bytes,
        "full_model_capacity": report.full_model_capacity,
        "base_plus_all_adapters_bytes": report.base_plus_all_adapters_bytes,
        "output": txt,
    }))
}

fn sim_config(config: &Config, flags: &SimFlags) -> Result<(SimConfig, usize), CliError> {
    let mut timing = config.timing.clone();
    if let Some(v) = flags.load_s {
        timing.full_model_load_s = v;
    }
    if let Some(v) = flags.overhead_s {
        timing.adapter_swap_overhead_s = v;
    }
    if let Some(v) = flags.unload_s {
        timing.unload_s = v;
    }
    if let Some(v) = flags.infer_fixed {
        timing.infer = InferDist::Fixed { value: v };
    }
    timing
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let capacity = flags.capacity.unwrap_or(config.capacity);
    sim::CacheState::new(capacity).map_err(|e| CliError::Usage(e.to_string()))?;
    let requests = flags.requests.unwrap_or(config.requests);
    if requests == 0 {
        return Err(CliError::Usage("--requests must be at least 1".into()));
    }
    let cfg = SimConfig {
        timing,
        capacity,
        include_warmup: flags.include_warmup || config.include_warmup,
        reload_each_round: flags.reload_each_round || config.reload_each_round,
        ..SimConfig::default()
    };
    Ok((cfg, requests))
}

fn cmd_simulate(config: &Config, args: &SimulateArgs) -> Result<Value, CliError> {
    let strategy: Strategy = args
        .strategy
        .parse()
        .map_err(|e: sim::SimError| CliError::Usage(e.to_string()))?;
    let (cfg, requests) = sim_config(config, &args.sim)?;
    let report = sim::run_seeded(strategy, requests, &cfg, args.seed).map_err(domain)?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| config.out_dir.join("simulate.csv"));
    let events_path = args
        .events
        .clone()
        .unwrap_or_else(|| config.out_dir.join("events.jsonl"));
    sim::write_report_csv(std::slice::from_ref(&report), create_file(&report_path)?)
        .map_err(domain)?;
    report
        .write_events_jsonl(create_file(&events_path)?)
        .map_err(domain)?;
    Ok(json!({
        "command": "simulate",
        "strategy": strategy.as_str(),
        "seed": args.seed,
        "requests": requests,
        "total_time_s": (report.total_time_s * 100.0).round() / 100.0,
        "model_loads": report.model_loads,
        "weight_loads": report.weight_loads,
        "output": report_path,
    }))
}

/// Runs both strategies for every seed, one thread per seed.
pub fn run_bench(
    cfg: &SimConfig,
    requests: usize,
    seeds: &[u64],
) -> Result<Vec<SimReport>, sim::SimError> {
    let pairs: Vec<Result<(SimReport, SimReport), sim::SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || {
                    Ok((
                        sim::run_seeded(Strategy::FullSwap, requests, cfg, seed)?,
                        sim::run_seeded(Strategy::LoraSwap, requests, cfg, seed)?,
                    ))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let mut full = Vec::new();
    let mut lora = Vec::new();
    for p in pairs {
        let (f, l) = p?;
        full.push(f);
        lora.push(l);
    }
    full.extend(lora);
    Ok(full)
}

fn cmd_bench(config: &Config, args: &BenchArgs) -> Result<Value, CliError> {
    let seeds = match (&args.seeds, args.runs) {
        (Some(text), runs) => {
            let seeds = parse_seeds(text)?;
            if let Some(n) = runs.filter(|&n| n != seeds.len()) {
                return Err(CliError::Usage(format!(
                    "--runs {n} but {} seeds given",
                    seeds.len()
                )));
            }
            seeds
        }
        (None, Some(n)) => (1..=n as u64).collect(),
        (None, None) => config.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(CliError::Usage("no seeds to run".into()));
    }
    let (cfg, requests) = sim_config(config, &args.sim)?;
    let reports = run_bench(&cfg, requests, &seeds).map_err(domain)?;
    let table = sim::summarize(&reports).map_err(domain)?;
    let runs_path = config.out_dir.join("bench_runs.csv");
    let table_path = config.out_dir.join("bench.csv");
    sim::write_report_csv(&reports, create_file(&runs_path)?).map_err(domain)?;
    table.write_csv(create_file(&table_path)?).map_err(domain)?;
    let mean = |s, m| table.row(s, m).map(|r| (r.mean * 100.0).round() / 100.0);
    Ok(json!({
        "command": "bench",
        "seeds": seeds,
        "full_mean_time_s": mean(Strategy::FullSwap, "infer time"),
        "full_mean_model_loads": mean(Strategy::FullSwap, "#_model_load"),
        "lora_mean_time_s": mean(Strategy::LoraSwap, "infer time"),
        "lora_mean_weight_loads": mean(Strategy::LoraSwap, "#_weight_load"),
        "output": table_path,
    }))
}

pub fn run(cli: &Cli) -> Result<Value, CliError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&config, a),
        Command::Partition(a) => cmd_partition(&config, a),
        Command::Distill(a) => cmd_distill(&config, a),
        Command::Stats(a) => cmd_stats(&config, a),
        Command::FleetReport(a) => cmd_fleet(&config, a),
        Command::Simulate(a) => cmd_simulate(&config, a),
        Command::Bench(a) => cmd_bench(&config, a),
    }
}

/// Parses arguments, runs, prints the summary line or error; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
