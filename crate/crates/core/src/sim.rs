//! Discrete-event simulation of serving eleven specialty models.
//!
//! Two strategies are compared:
//! - [`Strategy::FullSwap`]: a fixed number of whole models stay resident. On a
//!   miss, one resident chosen uniformly at random is unloaded and the requested
//!   model is loaded.
//! - [`Strategy::LoraSwap`]: one base model stays resident. Each request loads
//!   and merges that specialty's adapter weights.
//!
//! The clock is virtual. Each run draws from two seeded streams: one for
//! inference durations and one for warm-up and eviction choices. Because the
//! inference stream is shared, running both strategies with the same seed and
//! workload compares them on identical inference draws.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Pert, Triangular};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::AdapterRegistry;
use crate::corpus::SubSpecialty;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid timing model: {0}")]
    InvalidTiming(String),
    #[error("capacity must be between 1 and {max}, got {got}", max = SubSpecialty::COUNT)]
    InvalidCapacity { got: usize },
    #[error("workload is empty")]
    EmptyWorkload,
    #[error("no adapter registered for {0}")]
    UnknownSpecialty(SubSpecialty),
    #[error("no reports to summarize")]
    NoReports,
    #[error("unknown strategy `{0}` (expected full or lora)")]
    UnknownStrategy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Inference-duration distribution, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InferDist {
    Fixed {
        value: f64,
    },
    /// Beta-PERT on `[min, max]` with the given mean.
    Pert {
        min: f64,
        mean: f64,
        max: f64,
    },
    Triangular {
        min: f64,
        mode: f64,
        max: f64,
    },
    /// Resample uniformly from observed durations.
    Empirical {
        samples: Vec<f64>,
    },
}

pub const DEFAULT_INFER_MIN_S: f64 = 0.36;
pub const DEFAULT_INFER_MEAN_S: f64 = 2.25;
pub const DEFAULT_INFER_MAX_S: f64 = 6.40;

impl Default for InferDist {
    fn default() -> Self {
        InferDist::Pert {
            min: DEFAULT_INFER_MIN_S,
            mean: DEFAULT_INFER_MEAN_S,
            max: DEFAULT_INFER_MAX_S,
        }
    }
}

fn finite_nonneg(name: &str, v: f64) -> Result<(), SimError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidTiming(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

impl InferDist {
    pub fn mean(&self) -> f64 {
        match self {
            InferDist::Fixed { value } => *value,
            InferDist::Pert { mean, .. } => *mean,
            InferDist::Triangular { min, mode, max } => (min + mode + max) / 3.0,
            InferDist::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidTiming(m));
        match self {
            InferDist::Fixed { value } => finite_nonneg("fixed infer time", *value),
            InferDist::Pert { min, mean, max } => {
                for (n, v) in [("min", min), ("mean", mean), ("max", max)] {
                    finite_nonneg(n, *v)?;
                }
                if !(min < mean && mean < max) {
                    return bad(format!(
                        "pert needs min < mean < max, got {min}, {mean}, {max}"
                    ));
                }
                Ok(())
            }
            InferDist::Triangular { min, mode, max } => {
                for (n, v) in [("min", min), ("mode", mode), ("max", max)] {
                    finite_nonneg(n, *v)?;
                }
                if !(min <= mode && mode <= max && min < max) {
                    return bad(format!(
                        "triangular needs min <= mode <= max, got {min}, {mode}, {max}"
                    ));
                }
                Ok(())
            }
            InferDist::Empirical { samples } => {
                if samples.is_empty() {
                    return bad("empirical trace is empty".into());
                }
                samples
                    .iter()
                    .try_for_each(|s| finite_nonneg("trace sample", *s))
            }
        }
    }

    fn sampler(&self) -> Result<Sampler<'_>, SimError> {
        self.validate()?;
        let err = |e: &dyn fmt::Display| SimError::InvalidTiming(e.to_string());
        Ok(match self {
            InferDist::Fixed { value } => Sampler::Fixed(*value),
            InferDist::Pert { min, mean, max } => Sampler::Pert(
                Pert::new(*min, *max)
                    .with_mean(*mean)
                    .map_err(|e| err(&e))?,
            ),
            InferDist::Triangular { min, mode, max } => {
                Sampler::Triangular(Triangular::new(*min, *max, *mode).map_err(|e| err(&e))?)
            }
            InferDist::Empirical { samples } => Sampler::Empirical(samples),
        })
    }
}

enum Sampler<'a> {
    Fixed(f64),
    Pert(Pert<f64>),
    Triangular(Triangular<f64>),
    Empirical(&'a [f64]),
}

impl Sampler<'_> {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Sampler::Fixed(v) => *v,
            Sampler::Pert(d) => d.sample(rng),
            Sampler::Triangular(d) => d.sample(rng),
            Sampler::Empirical(s) => *s.choose(rng).expect("validated non-empty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingModel {
    pub full_model_load_s: f64,
    pub infer: InferDist,
    /// Per-request adapter load + merge. Calibrated, not measured.
    pub adapter_swap_overhead_s: f64,
    pub unload_s: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            full_model_load_s: 5.0,
            infer: InferDist::default(),
            adapter_swap_overhead_s: 0.90,
            unload_s: 0.0,
        }
    }
}

impl TimingModel {
    pub fn fixed(infer_s: f64) -> Self {
        TimingModel {
            infer: InferDist::Fixed { value: infer_s },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        finite_nonneg("full_model_load_s", self.full_model_load_s)?;
        finite_nonneg("adapter_swap_overhead_s", self.adapter_swap_overhead_s)?;
        finite_nonneg("unload_s", self.unload_s)?;
        self.infer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FullSwap,
    LoraSwap,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FullSwap => "full",
            Strategy::LoraSwap => "lora",
        }
    }

    /// Row label used in the comparison table.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::FullSwap => "Full",
            Strategy::LoraSwap => "Lora",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "full_swap" | "full-swap" | "fullswap" => Ok(Strategy::FullSwap),
            "lora" | "lora_swap" | "lora-swap" | "loraswap" => Ok(Strategy::LoraSwap),
            _ => Err(SimError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub seq: usize,
    pub specialty: SubSpecialty,
}

/// `n` requests, specialties i.i.d. uniform, sequence numbers from 1.
pub fn generate_workload(n: usize, seed: u64) -> Vec<Request> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n)
        .map(|seq| Request {
            seq,
            specialty: SubSpecialty::ALL_CODES[rng.random_range(0..SubSpecialty::COUNT)],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Unload,
    Load,
    WeightLoadMerge,
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// 0 for warm-up events, otherwise the request's sequence number.
    pub seq: usize,
    pub specialty: SubSpecialty,
    pub event: EventKind,
    pub duration_s: f64,
}

/// Resident full models, kept sorted so eviction by index is reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    slots: Vec<SubSpecialty>,
    capacity: usize,
}

pub const DEFAULT_CAPACITY: usize = 5;

impl CacheState {
    pub fn new(capacity: usize) -> Result<Self, SimError> {
        if capacity == 0 || capacity > SubSpecialty::COUNT {
            return Err(SimError::InvalidCapacity { got: capacity });
        }
        Ok(CacheState {
            slots: Vec::with_capacity(capacity),
            capacity,
        })
    }

    pub fn with_residents(capacity: usize, residents: &[SubSpecialty]) -> Result<Self, SimError> {
        let mut state = Self::new(capacity)?;
        let set: BTreeSet<_> = residents.iter().copied().collect();
        if set.len() != residents.len() || set.len() > capacity {
            return Err(SimError::InvalidCapacity {
                got: residents.len(),
            });
        }
        state.slots = set.into_iter().collect();
        Ok(state)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn residents(&self) -> &[SubSpecialty] {
        &self.slots
    }

    pub fn contains(&self, s: SubSpecialty) -> bool {
        self.slots.binary_search(&s).is_ok()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.capacity
    }

    /// Fills every free slot with distinct random specialties; returns them.
    pub fn warm_up(&mut self, rng: &mut impl Rng) -> Vec<SubSpecialty> {
        let absent: Vec<SubSpecialty> = SubSpecialty::ALL_CODES
            .iter()
            .copied()
            .filter(|s| !self.contains(*s))
            .collect();
        let need = self.capacity - self.slots.len();
        let picked: Vec<SubSpecialty> = absent.choose_multiple(rng, need).copied().collect();
        for s in &picked {
            self.insert(*s);
        }
        picked
    }

    pub fn clear(&mut self) -> Vec<SubSpecialty> {
        std::mem::take(&mut self.slots)
    }

    fn insert(&mut self, s: SubSpecialty) {
        if let Err(pos) = self.slots.binary_search(&s) {
            self.slots.insert(pos, s);
        }
    }
}

/// One step of a request, before durations are attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub specialty: SubSpecialty,
    pub kind: EventKind,
}

/// Hit: `[Infer]`. Miss: evict a uniformly random resident, then
/// `[Unload, Load, Infer]`.
pub fn handle_request_full(state: &mut CacheState, req: &Request, rng: &mut impl Rng) -> Vec<Step> {
    debug_assert!(state.is_full(), "full-swap cache must be warm");
    let infer = Step {
        specialty: req.specialty,
        kind: EventKind::Infer,
    };
    if state.contains(req.specialty) {
        return vec![infer];
    }
    let victim_idx = rng.random_range(0..state.slots.len());
    let victim = state.slots.remove(victim_idx);
    state.insert(req.specialty);
    vec![
        Step {
            specialty: victim,
            kind: EventKind::Unload,
        },
        Step {
            specialty: req.specialty,
            kind: EventKind::Load,
        },
        infer,
    ]
}

/// Base-resident state for adapter swapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoraState {
    adapters: BTreeSet<SubSpecialty>,
}

impl LoraState {
    /// Every specialty has an adapter.
    pub fn all() -> Self {
        LoraState {
            adapters: SubSpecialty::ALL_CODES.into_iter().collect(),
        }
    }

    pub fn from_registry(registry: &AdapterRegistry) -> Self {
        LoraState {
            adapters: registry.specialties(),
        }
    }

    pub fn with_adapters(adapters: impl IntoIterator<Item = SubSpecialty>) -> Self {
        LoraState {
            adapters: adapters.into_iter().collect(),
        }
    }
}

/// Every request: `[WeightLoadMerge, Infer]`. No adapter caching.
pub fn handle_request_lora(state: &LoraState, req: &Request) -> Result<Vec<Step>, SimError> {
    if !state.adapters.contains(&req.specialty) {
        return Err(SimError::UnknownSpecialty(req.specialty));
    }
    Ok(vec![
        Step {
            specialty: req.specialty,
            kind: EventKind::WeightLoadMerge,
        },
        Step {
            specialty: req.specialty,
            kind: EventKind::Infer,
        },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub timing: TimingModel,
    pub capacity: usize,
    /// Count the initial loads in `model_loads` and total time.
    pub include_warmup: bool,
    /// Reload a fresh random cache (or the base model) before every request.
    pub reload_each_round: bool,
    pub lora: LoraState,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timing: TimingModel::default(),
            capacity: DEFAULT_CAPACITY,
            include_warmup: false,
            reload_each_round: false,
            lora: LoraState::all(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub requests: usize,
    pub total_time_s: f64,
    /// Sum of inference draws alone.
    pub infer_time_s: f64,
    pub model_loads: u64,
    pub weight_loads: u64,
    #[serde(skip)]
    pub events: Vec<Event>,
}

impl SimReport {
    /// Report carrying only the headline numbers, e.g. published results.
    pub fn summary_only(
        strategy: Strategy,
        total_time_s: f64,
        model_loads: u64,
        weight_loads: u64,
    ) -> Self {
        SimReport {
            strategy,
            seed: 0,
            requests: 0,
            total_time_s,
            infer_time_s: 0.0,
            model_loads,
            weight_loads,
            events: Vec::new(),
        }
    }

    pub fn write_events_jsonl<W: Write>(&self, out: W) -> Result<(), SimError> {
        crate::corpus::write_jsonl(&self.events, out)
            .map_err(|e| SimError::Io(std::io::Error::other(e)))?;
        Ok(())
    }
}

const INFER_STREAM: u64 = 1;
const CACHE_STREAM: u64 = 2;

fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut infer = ChaCha8Rng::seed_from_u64(seed);
    infer.set_stream(INFER_STREAM);
    let mut cache = ChaCha8Rng::seed_from_u64(seed);
    cache.set_stream(CACHE_STREAM);
    (infer, cache)
}

struct Clocked {
    events: Vec<Event>,
    infer_sum: f64,
    loads: u64,
    unloads: u64,
    weight_loads: u64,
}

impl Clocked {
    fn push(
        &mut self,
        seq: usize,
        step: Step,
        timing: &TimingModel,
        sampler: &Sampler,
        rng: &mut ChaCha8Rng,
    ) {
        let duration_s = match step.kind {
            EventKind::Load => {
                self.loads += 1;
                timing.full_model_load_s
            }
            EventKind::Unload => {
                self.unloads += 1;
                timing.unload_s
            }
            EventKind::WeightLoadMerge => {
                self.weight_loads += 1;
                timing.adapter_swap_overhead_s
            }
            EventKind::Infer => {
                let d = sampler.sample(rng);
                self.infer_sum += d;
                d
            }
        };
        self.events.push(Event {
            seq,
            specialty: step.specialty,
            event: step.kind,
            duration_s,
        });
    }
}

/// Runs one strategy over `workload`. Fully determined by its arguments.
pub fn run_simulation(
    strategy: Strategy,
    workload: &[Request],
    config: &SimConfig,
    seed: u64,
) -> Result<SimReport, SimError> {
    if workload.is_empty() {
        return Err(SimError::EmptyWorkload);
    }
    let timing = &config.timing;
    timing.validate()?;
    let sampler = timing.infer.sampler()?;
    let (mut infer_rng, mut cache_rng) = streams(seed);
    let mut clock = Clocked {
        events: Vec::new(),
        infer_sum: 0.0,
        loads: 0,
        unloads: 0,
        weight_loads: 0,
    };
    // Base-model loads for lora, counted separately from weight loads.
    let mut base_loads: u64 = 0;
    let mut warmup_loads: u64 = 0;

    match strategy {
        Strategy::FullSwap => {
            let mut cache = CacheState::new(config.capacity)?;
            for s in cache.warm_up(&mut cache_rng) {
                warmup_loads += 1;
                clock.events.push(Event {
                    seq: 0,
                    specialty: s,
                    event: EventKind::Load,
                    duration_s: timing.full_model_load_s,
                });
            }
            for (round, req) in workload.iter().enumerate() {
                if config.reload_each_round && round > 0 {
                    for s in cache.clear() {
                        clock.push(
                            req.seq,
                            Step {
                                specialty: s,
                                kind: EventKind::Unload,
                            },
                            timing,
                            &sampler,
                            &mut cache_rng,
                        );
                    }
                    for s in cache.warm_up(&mut cache_rng) {
                        clock.push(
                            req.seq,
                            Step {
                                specialty: s,
                                kind: EventKind::Load,
                            },
                            timing,
                            &sampler,
                            &mut cache_rng,
                        );
                    }
                }
                for step in handle_request_full(&mut cache, req, &mut cache_rng) {
                    clock.push(req.seq, step, timing, &sampler, &mut infer_rng);
                }
            }
        }
        Strategy::LoraSwap => {
            warmup_loads = 1;
            clock.events.push(Event {
                seq: 0,
                specialty: workload[0].specialty,
                event: EventKind::Load,
                duration_s: timing.full_model_load_s,
            });
            for (round, req) in workload.iter().enumerate() {
                if config.reload_each_round && round > 0 {
                    base_loads += 1;
                    clock.events.push(Event {
                        seq: req.seq,
                        specialty: req.specialty,
                        event: EventKind::Load,
                        duration_s: timing.full_model_load_s,
                    });
                }
                for step in handle_request_lora(&config.lora, req)? {
                    clock.push(req.seq, step, timing, &sampler, &mut infer_rng);
                }
            }
        }
    }

    let counted_warmup = if config.include_warmup {
        warmup_loads
    } else {
        0
    };
    if !config.include_warmup {
        clock.events.retain(|e| e.seq != 0);
    }
    let model_loads = clock.loads + base_loads + counted_warmup;
    let total_time_s = model_loads as f64 * timing.full_model_load_s
        + clock.infer_sum
        + clock.unloads as f64 * timing.unload_s
        + clock.weight_loads as f64 * timing.adapter_swap_overhead_s;
    Ok(SimReport {
        strategy,
        seed,
        requests: workload.len(),
        total_time_s,
        infer_time_s: clock.infer_sum,
        model_loads,
        weight_loads: clock.weight_loads,
        events: clock.events,
    })
}

/// Workload and simulation both seeded by `seed`.
pub fn run_seeded(
    strategy: Strategy,
    requests: usize,
    config: &SimConfig,
    seed: u64,
) -> Result<SimReport, SimError> {
    run_simulation(strategy, &generate_workload(requests, seed), config, seed)
}

pub const REPORT_CSV_HEADER: &str = "strategy,run,total_time_s,model_loads,weight_loads";

/// One row per report; `run` counts from 1 within each strategy.
pub fn write_report_csv<W: Write>(reports: &[SimReport], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER.split(','))?;
    let mut runs = std::collections::BTreeMap::new();
    for r in reports {
        let run = runs.entry(r.strategy).or_insert(0u32);
        *run += 1;
        w.write_record([
            r.strategy.as_str().to_string(),
            run.to_string(),
            format!("{:.2}", r.total_time_s),
            r.model_loads.to_string(),
            r.weight_loads.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub strategy: Strategy,
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub integral: bool,
}

/// Strategy × {infer time, load count} across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub runs: usize,
    pub rows: Vec<BenchRow>,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn row(strategy: Strategy, metric: &str, values: Vec<f64>, integral: bool) -> BenchRow {
    let (mean, sd) = mean_sd(&values);
    BenchRow {
        strategy,
        metric: metric.into(),
        values,
        mean,
        sd,
        integral,
    }
}

pub fn summarize(reports: &[SimReport]) -> Result<BenchTable, SimError> {
    if reports.is_empty() {
        return Err(SimError::NoReports);
    }
    let mut rows = Vec::new();
    let mut runs = 0;
    for strategy in [Strategy::FullSwap, Strategy::LoraSwap] {
        let mine: Vec<&SimReport> = reports.iter().filter(|r| r.strategy == strategy).collect();
        if mine.is_empty() {
            continue;
        }
        runs = runs.max(mine.len());
        rows.push(row(
            strategy,
            "infer time",
            mine.iter().map(|r| r.total_time_s).collect(),
            false,
        ));
        let (metric, counts): (&str, Vec<f64>) = match strategy {
            Strategy::FullSwap => (
                "#_model_load",
                mine.iter().map(|r| r.model_loads as f64).collect(),
            ),
            Strategy::LoraSwap => (
                "#_weight_load",
                mine.iter().map(|r| r.weight_loads as f64).collect(),
            ),
        };
        rows.push(row(strategy, metric, counts, true));
    }
    Ok(BenchTable { runs, rows })
}

impl BenchTable {
    pub fn row(&self, strategy: Strategy, metric: &str) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.metric == metric)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["strategy".to_string(), "metric".to_string()];
        h.extend((1..=self.runs).map(ordinal));
        h.push("mean".into());
        h.push("sd".into());
        h
    }

    /// Formatted cells: times to 2 decimals, counts as integers.
    pub fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.strategy.label().to_string(), r.metric.clone()];
                for i in 0..self.runs {
                    cells.push(match r.values.get(i) {
                        Some(v) if r.integral => format!("{v:.0}"),
                        Some(v) => format!("{v:.2}"),
                        None => String::new(),
                    });
                }
                cells.push(format!("{:.2}", r.mean));
                cells.push(format!("{:.2}", r.sd));
                cells
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for cells in self.cells() {
            w.write_record(cells)?;
        }
        w.flush()?;
        Ok(())
    }
}
