//! E-utilities client: transport, content-addressed cache, retries.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;
use url::Url;

use super::query::JournalQuery;
use super::ratelimit::{Clock, RateLimiter, SystemClock};
use super::xml::{self, SearchResult, XmlError};

pub const DEFAULT_BASE_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
pub const BASE_URL_ENV: &str = "MEDFLEET_EUTILS_BASE";
pub const API_KEY_ENV: &str = "MEDFLEET_EUTILS_API_KEY";
pub const DEFAULT_REQUESTS_PER_SECOND: f64 = 3.0;
pub const DEFAULT_MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Search,
    Fetch,
}

impl Endpoint {
    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Search => "esearch.fcgi",
            Endpoint::Fetch => "efetch.fcgi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Error)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

/// Issues one GET. Implementations must not retry on their own.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError>;
}

/// Blocking HTTP(S) transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        UreqTransport {
            agent: config.into(),
        }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let mut resp = self
            .agent
            .get(url)
            .call()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("rate limited after {0} attempts")]
    RateLimitExceeded(u32),
    #[error("cache miss for {0} in offline mode")]
    CacheMiss(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Where and how responses are fetched and cached.
#[derive(Debug, Clone)]
pub struct FetchCachePolicy {
    pub cache_dir: PathBuf,
    pub offline_only: bool,
    pub max_requests_per_second: f64,
}

impl FetchCachePolicy {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        FetchCachePolicy {
            cache_dir: cache_dir.into(),
            offline_only: false,
            max_requests_per_second: DEFAULT_REQUESTS_PER_SECOND,
        }
    }
}

/// Raw responses stored as `<dir>/<sha256(endpoint + query + page)>.xml`.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DiskCache { dir: dir.into() }
    }

    pub fn key(endpoint: Endpoint, query: &str, page: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(endpoint.path().as_bytes());
        hasher.update(query.as_bytes());
        hasher.update(page.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.xml"))
    }

    pub fn get(&self, key: &str) -> std::io::Result<Option<Vec<u8>>> {
        match std::fs::read(self.path_for(key)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes through a temp file so readers never see a partial entry.
    pub fn put(&self, key: &str, body: &[u8]) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{:?}.tmp",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, self.path_for(key))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// A response body and whether it came from the cache.
#[derive(Debug, Clone)]
pub struct Fetched {
    pub body: Vec<u8>,
    pub from_cache: bool,
    /// Network attempts made for this response (0 on a cache hit).
    pub attempts: u32,
}

pub struct EutilsClient {
    base_url: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    limiter: Arc<RateLimiter>,
    clock: Arc<dyn Clock>,
    cache: DiskCache,
    offline_only: bool,
    max_retries: u32,
    backoff: Duration,
    network_requests: AtomicUsize,
}

impl EutilsClient {
    pub fn new(policy: &FetchCachePolicy, transport: Arc<dyn Transport>) -> Self {
        EutilsClient {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            transport,
            limiter: Arc::new(RateLimiter::per_second(policy.max_requests_per_second)),
            clock: Arc::new(SystemClock::default()),
            cache: DiskCache::new(&policy.cache_dir),
            offline_only: policy.offline_only,
            max_retries: DEFAULT_MAX_RETRIES,
            backoff: Duration::from_millis(500),
            network_requests: AtomicUsize::new(0),
        }
    }

    /// Applies the base-URL and API-key environment overrides.
    pub fn from_env(policy: &FetchCachePolicy, transport: Arc<dyn Transport>) -> Self {
        let mut client = Self::new(policy, transport);
        if let Ok(base) = std::env::var(BASE_URL_ENV) {
            client.base_url = base;
        }
        client.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        client
    }

    pub fn with_base_url(mut self, base_url: impl Into<String>) -> Self {
        self.base_url = base_url.into();
        self
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Shares one limiter across clients (one token source for all workers).
    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    pub fn cache(&self) -> &DiskCache {
        &self.cache
    }

    /// Requests sent over the transport, retries included.
    pub fn network_requests(&self) -> usize {
        self.network_requests.load(Ordering::SeqCst)
    }

    fn url(&self, endpoint: Endpoint, params: &[(&str, String)]) -> String {
        let base = format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            endpoint.path()
        );
        let mut pairs: Vec<(&str, String)> = params.to_vec();
        if let Some(key) = &self.api_key {
            pairs.push(("api_key", key.clone()));
        }
        match Url::parse_with_params(&base, &pairs) {
            Ok(url) => url.to_string(),
            Err(_) => {
                let query: String = url::form_urlencoded::Serializer::new(String::new())
                    .extend_pairs(pairs.iter().map(|(k, v)| (*k, v.as_str())))
                    .finish();
                format!("{base}?{query}")
            }
        }
    }

    fn get_with_retry(&self, url: &str) -> Result<(Vec<u8>, u32), FetchError> {
        let mut attempts = 0;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            attempts += 1;
            self.network_requests.fetch_add(1, Ordering::SeqCst);
            let resp = self.transport.get(url)?;
            let retryable = resp.status == 429 || resp.status >= 500;
            match resp.status {
                200..=299 => return Ok((resp.body, attempts)),
                _ if retryable && attempts <= self.max_retries => {
                    self.clock
                        .sleep(self.backoff * 2u32.saturating_pow(attempts - 1));
                }
                429 => return Err(FetchError::RateLimitExceeded(attempts)),
                s => return Err(FetchError::Http(s)),
            }
        }
    }

    fn cached_get(
        &self,
        endpoint: Endpoint,
        query: &str,
        page: &str,
        params: &[(&str, String)],
    ) -> Result<Fetched, FetchError> {
        let key = DiskCache::key(endpoint, query, page);
        if let Some(body) = self.cache.get(&key)? {
            return Ok(Fetched {
                body,
                from_cache: true,
                attempts: 0,
            });
        }
        if self.offline_only {
            return Err(FetchError::CacheMiss(format!(
                "{} {query} {page}",
                endpoint.path()
            )));
        }
        let (body, attempts) = self.get_with_retry(&self.url(endpoint, params))?;
        self.cache.put(&key, &body)?;
        Ok(Fetched {
            body,
            from_cache: false,
            attempts,
        })
    }

    /// Raw esearch page for `query`.
    pub fn search_raw(&self, query: &JournalQuery) -> Result<Fetched, FetchError> {
        let term = query.term();
        self.cached_get(
            Endpoint::Search,
            &term,
            &query.page_token(),
            &[
                ("db", "pubmed".into()),
                ("term", term.clone()),
                ("retstart", query.page_offset.to_string()),
                ("retmax", query.page_size.to_string()),
                ("retmode", "xml".into()),
            ],
        )
    }

    /// One page of ids plus the total hit count.
    pub fn search_ids(&self, query: &JournalQuery) -> Result<(SearchResult, Fetched), FetchError> {
        let fetched = self.search_raw(query)?;
        let mut result = xml::parse_esearch(&fetched.body)?;
        result.ids.truncate(query.page_size);
        Ok((result, fetched))
    }

    /// Raw efetch article set for the ids on one search page.
    pub fn fetch_articles(
        &self,
        query: &JournalQuery,
        ids: &[String],
    ) -> Result<Fetched, FetchError> {
        self.cached_get(
            Endpoint::Fetch,
            &query.term(),
            &query.page_token(),
            &[
                ("db", "pubmed".into()),
                ("id", ids.join(",")),
                ("retmode", "xml".into()),
                ("rettype", "abstract".into()),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pubmed::ratelimit::FakeClock;
    use std::collections::VecDeque;
    use std::sync::Mutex;

    struct Scripted {
        statuses: Mutex<VecDeque<u16>>,
        urls: Mutex<Vec<String>>,
    }

    impl Transport for Scripted {
        fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
            self.urls.lock().unwrap().push(url.to_string());
            let status = self.statuses.lock().unwrap().pop_front().unwrap_or(200);
            let body = if status == 200 {
                b"<eSearchResult><Count>3</Count><IdList><Id>1</Id><Id>2</Id><Id>3</Id></IdList></eSearchResult>".to_vec()
            } else {
                Vec::new()
            };
            Ok(HttpResponse { status, body })
        }
    }

    fn setup(statuses: &[u16], offline: bool) -> (tempfile::TempDir, Arc<Scripted>, EutilsClient) {
        let dir = tempfile::tempdir().unwrap();
        let mut policy = FetchCachePolicy::new(dir.path());
        policy.offline_only = offline;
        let transport = Arc::new(Scripted {
            statuses: Mutex::new(statuses.iter().copied().collect()),
            urls: Mutex::new(Vec::new()),
        });
        let client = EutilsClient::new(&policy, transport.clone())
            .with_clock(Arc::new(FakeClock::new()))
            .with_base_url("http://fixture.local/eutils");
        (dir, transport, client)
    }

    #[test]
    fn search_page_from_fixture() {
        let (_dir, transport, client) = setup(&[], false);
        let q = JournalQuery::new("Circulation", 2010, 100).unwrap();
        let (result, fetched) = client.search_ids(&q).unwrap();
        assert_eq!(result.ids, ["1", "2", "3"]);
        assert_eq!(result.total_count, 3);
        assert!(!fetched.from_cache);
        let url = &transport.urls.lock().unwrap()[0];
        assert!(url.starts_with("http://fixture.local/eutils/esearch.fcgi?db=pubmed&term="));
        assert!(url.contains("retmax=100"));
        // second call is served from disk
        let (_, again) = client.search_ids(&q).unwrap();
        assert!(again.from_cache);
        assert_eq!(client.network_requests(), 1);
    }

    #[test]
    fn offline_cold_cache_never_touches_network() {
        let (_dir, transport, client) = setup(&[], true);
        let q = JournalQuery::new("Gut", 2010, 10).unwrap();
        assert!(matches!(
            client.search_ids(&q),
            Err(FetchError::CacheMiss(_))
        ));
        assert!(transport.urls.lock().unwrap().is_empty());
    }

    #[test]
    fn retries_429_within_budget() {
        let (_dir, _t, client) = setup(&[429, 429, 200], false);
        let q = JournalQuery::new("Gut", 2010, 10).unwrap();
        let (result, fetched) = client.search_ids(&q).unwrap();
        assert_eq!(result.ids.len(), 3);
        assert_eq!(fetched.attempts, 3);
        assert_eq!(client.network_requests(), 3);
    }

    #[test]
    fn retry_budget_exhausted() {
        let (_dir, _t, client) = setup(&[429, 429, 429, 429, 429], false);
        let q = JournalQuery::new("Gut", 2010, 10).unwrap();
        assert!(matches!(
            client.search_ids(&q),
            Err(FetchError::RateLimitExceeded(4))
        ));
        let (_dir, _t, client) = setup(&[503, 503, 503, 503], false);
        assert!(matches!(client.search_ids(&q), Err(FetchError::Http(503))));
        let (_dir, _t, client) = setup(&[404], false);
        assert!(matches!(client.search_ids(&q), Err(FetchError::Http(404))));
        assert_eq!(client.network_requests(), 1);
    }

    #[test]
    fn cache_key_layout() {
        let key = DiskCache::key(
            Endpoint::Search,
            "\"Gut\"[Journal] AND 2010:3000[dp]",
            "0:100",
        );
        assert_eq!(key.len(), 64);
        let mut h = Sha256::new();
        h.update(b"esearch.fcgi\"Gut\"[Journal] AND 2010:3000[dp]0:100");
        assert_eq!(key, hex::encode(h.finalize()));
    }
}
