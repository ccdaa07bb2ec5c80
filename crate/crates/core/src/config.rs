//! Run configuration loaded from a TOML file.
//!
//! Every key is optional. Absent keys take defaults and unknown keys are
//! rejected. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DEFAULT_MIN_YEAR;
use crate::distill::filter::{MatchMode, DEFAULT_KEYWORDS};
use crate::pubmed::client::DEFAULT_REQUESTS_PER_SECOND;
use crate::pubmed::ingest::DEFAULT_PAGE_SIZE;
use crate::sim::{SimError, TimingModel, DEFAULT_CAPACITY};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} does not exist")]
    MissingFile(PathBuf),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    TypeError { key: String, message: String },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    /// Deterministic offline responder.
    #[default]
    Mock,
    /// Answers from a recorded JSONL file.
    Replay,
    /// OpenAI-style chat endpoint from the environment.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub keywords: Vec<String>,
    pub mode: MatchMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            mode: MatchMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub client: ClientKind,
    pub replay_path: Option<PathBuf>,
    /// Write every completion here so a later run can replay it.
    pub record_path: Option<PathBuf>,
    pub price_per_1k_prompt: f64,
    pub price_per_1k_completion: f64,
    pub finding_attempts: u32,
    pub requests_per_second: Option<f64>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            client: ClientKind::Mock,
            replay_path: None,
            record_path: None,
            price_per_1k_prompt: 0.0015,
            price_per_1k_completion: 0.002,
            finding_attempts: 1,
            requests_per_second: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub d: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub param_count: u64,
    pub bytes_per_param: f64,
    pub budget_bytes: f64,
    pub rank: usize,
    pub layers: Vec<LayerShape>,
    /// Adapter manifest; a synthetic fleet is generated when absent.
    pub manifest: Option<PathBuf>,
    pub seed: u64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            param_count: 7_000_000_000,
            bytes_per_param: crate::adapter::DEFAULT_BYTES_PER_PARAM,
            budget_bytes: 40.0e9,
            rank: 8,
            layers: vec![
                LayerShape {
                    name: "q_proj".into(),
                    d: 4096,
                    k: 4096,
                },
                LayerShape {
                    name: "v_proj".into(),
                    d: 4096,
                    k: 4096,
                },
            ],
            manifest: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub cache_dir: PathBuf,
    pub corpus_dir: PathBuf,
    pub catalog_path: PathBuf,
    pub out_dir: PathBuf,
    /// JSON article list served in-process instead of the live service.
    pub fixture_articles: Option<PathBuf>,
    pub offline: bool,
    pub min_year: i32,
    pub page_size: usize,
    pub requests_per_second: f64,
    pub workers: usize,
    pub tokenizer: String,
    pub filter: FilterConfig,
    pub llm: LlmConfig,
    pub timing: TimingModel,
    pub capacity: usize,
    pub requests: usize,
    pub seeds: Vec<u64>,
    pub include_warmup: bool,
    pub reload_each_round: bool,
    pub fleet: FleetConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            cache_dir: "cache".into(),
            corpus_dir: "corpus".into(),
            catalog_path: "catalog.csv".into(),
            out_dir: "out".into(),
            fixture_articles: None,
            offline: false,
            min_year: DEFAULT_MIN_YEAR,
            page_size: DEFAULT_PAGE_SIZE,
            requests_per_second: DEFAULT_REQUESTS_PER_SECOND,
            workers: 4,
            tokenizer: "whitespace".into(),
            filter: FilterConfig::default(),
            llm: LlmConfig::default(),
            timing: TimingModel::default(),
            capacity: DEFAULT_CAPACITY,
            requests: 100,
            seeds: vec![1, 2, 3, 4, 5],
            include_warmup: false,
            reload_each_round: false,
            fleet: FleetConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    /// Defaults with paths under `base`.
    pub fn with_base(base: &Path) -> Self {
        let mut c = Config::default();
        c.resolve_paths(base);
        c
    }

    /// Parses TOML text; relative paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let mut on_ignored = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
        let tracked = serde_ignored::Deserializer::new(de, &mut on_ignored);
        let mut config: Config = serde_path_to_error::deserialize(tracked).map_err(|e| {
            let key = e.path().to_string();
            let message = e.inner().message().to_string();
            if key == "." {
                ConfigError::Syntax(message)
            } else {
                ConfigError::TypeError { key, message }
            }
        })?;
        if let Some(first) = unknown.into_iter().next() {
            return Err(ConfigError::UnknownKey(first));
        }
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.cache_dir,
            &mut self.corpus_dir,
            &mut self.catalog_path,
            &mut self.out_dir,
        ] {
            resolve(base, p);
        }
        for p in [
            &mut self.fixture_articles,
            &mut self.llm.replay_path,
            &mut self.llm.record_path,
            &mut self.fleet.manifest,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.timing
            .validate()
            .map_err(|e: SimError| ConfigError::Invalid(e.to_string()))?;
        if self.capacity == 0 || self.capacity > crate::corpus::SubSpecialty::COUNT {
            return invalid(format!(
                "capacity must be between 1 and 11, got {}",
                self.capacity
            ));
        }
        if self.requests == 0 {
            return invalid("requests must be at least 1".into());
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        if self.requests_per_second.is_nan() || self.requests_per_second <= 0.0 {
            return invalid("requests_per_second must be positive".into());
        }
        if self.page_size == 0 || self.page_size > crate::pubmed::query::MAX_PAGE_SIZE {
            return invalid(format!(
                "page_size must be between 1 and 10000, got {}",
                self.page_size
            ));
        }
        if crate::partition::tokenizer_by_name(&self.tokenizer).is_err() {
            return invalid(format!("unknown tokenizer `{}`", self.tokenizer));
        }
        if self.llm.client == ClientKind::Replay && self.llm.replay_path.is_none() {
            return invalid("llm.client = \"replay\" needs llm.replay_path".into());
        }
        Ok(())
    }

    pub fn ingested_path(&self) -> PathBuf {
        self.corpus_dir.join("ingested.jsonl")
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    if !path.is_file() {
        return Err(ConfigError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    Config::from_toml_str(&text, base)
}
