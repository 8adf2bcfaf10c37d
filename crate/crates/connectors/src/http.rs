//! HTTP access with a content-addressed response cache, per-host token buckets
//! and retries.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ConnectorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

/// A fully specified request; its serialized form is the cache key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    /// Sorted by name.
    pub headers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(base: &str, params: &[(&str, &str)]) -> Self {
        let url = if params.is_empty() {
            base.to_string()
        } else {
            let query = url::form_urlencoded::Serializer::new(String::new())
                .extend_pairs(params)
                .finish();
            let sep = if base.contains('?') { '&' } else { '?' };
            format!("{base}{sep}{query}")
        };
        HttpRequest {
            method: Method::Get,
            url,
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.retain(|(n, _)| !n.eq_ignore_ascii_case(name));
        self.headers
            .push((name.to_ascii_lowercase(), value.to_string()));
        self.headers.sort();
        self
    }

    pub fn host(&self) -> &str {
        let rest = self
            .url
            .split_once("://")
            .map(|(_, r)| r)
            .unwrap_or(&self.url);
        rest.split(['/', '?', '#']).next().unwrap_or(rest)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: String,
}

/// Something that can perform a request. Failures are connection-level only;
/// HTTP error statuses come back as responses.
pub trait Transport: Send + Sync {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, String>;
}

/// Blocking transport over ureq.
pub struct UreqTransport {
    agent: ureq::Agent,
    body_limit: u64,
}

impl UreqTransport {
    pub fn new(timeout: Duration, user_agent: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent(user_agent)
            .build();
        UreqTransport {
            agent: config.into(),
            body_limit: 512 * 1024 * 1024,
        }
    }
}

impl Transport for UreqTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        let result = match request.method {
            Method::Get => {
                let mut req = self.agent.get(&request.url);
                for (k, v) in &request.headers {
                    req = req.header(k, v);
                }
                req.call()
            }
            Method::Post => {
                let mut req = self.agent.post(&request.url);
                for (k, v) in &request.headers {
                    req = req.header(k, v);
                }
                req.send(request.body.clone().unwrap_or_default())
            }
        };
        let mut resp = result.map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp
            .body_mut()
            .with_config()
            .limit(self.body_limit)
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse {
            status,
            content_type,
            body,
        })
    }
}

/// One cached exchange, stored as `<dir>/<first two hex chars>/<key>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: HttpRequest,
    pub fetched_at: DateTime<Utc>,
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, request: &HttpRequest) -> Result<Option<CacheEntry>, ConnectorError> {
        let path = self.path_for(&request.cache_key());
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ConnectorError::io(&path, e)),
        };
        let entry: CacheEntry =
            serde_json::from_str(&text).map_err(|e| ConnectorError::Malformed {
                context: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(Some(entry))
    }

    /// Written to a temporary file first, then renamed into place.
    pub fn put(&self, entry: &CacheEntry) -> Result<PathBuf, ConnectorError> {
        let path = self.path_for(&entry.request.cache_key());
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent).map_err(|e| ConnectorError::io(parent, e))?;
        let json = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        write_atomic(&path, &json)?;
        Ok(path)
    }

    /// Relative path and SHA-256 of every cache file, sorted.
    pub fn fingerprint(&self) -> Result<Vec<(String, String)>, ConnectorError> {
        let mut out = Vec::new();
        if !self.dir.exists() {
            return Ok(out);
        }
        for shard in fs::read_dir(&self.dir).map_err(|e| ConnectorError::io(&self.dir, e))? {
            let shard = shard.map_err(|e| ConnectorError::io(&self.dir, e))?.path();
            if !shard.is_dir() {
                continue;
            }
            for f in fs::read_dir(&shard).map_err(|e| ConnectorError::io(&shard, e))? {
                let f = f.map_err(|e| ConnectorError::io(&shard, e))?.path();
                if f.extension().is_some_and(|e| e == "json") {
                    let bytes = fs::read(&f).map_err(|e| ConnectorError::io(&f, e))?;
                    let rel = f
                        .strip_prefix(&self.dir)
                        .unwrap_or(&f)
                        .to_string_lossy()
                        .replace('\\', "/");
                    out.push((rel, hex::encode(Sha256::digest(&bytes))));
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ConnectorError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| ConnectorError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ConnectorError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| ConnectorError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| ConnectorError::io(path, e.error))?;
    Ok(())
}

/// Token bucket per host; capacity equals the per-second rate.
pub struct RateLimiter {
    rate: f64,
    buckets: Mutex<HashMap<String, (f64, Instant)>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        RateLimiter {
            rate: requests_per_second.max(f64::MIN_POSITIVE),
            buckets: Mutex::new(HashMap::new()),
        }
    }

    /// Blocks until a token for `host` is available.
    pub fn acquire(&self, host: &str) {
        loop {
            let wait = {
                let mut buckets = self.buckets.lock().expect("rate limiter lock");
                let now = Instant::now();
                let capacity = self.rate.max(1.0);
                let (tokens, last) = buckets.entry(host.to_string()).or_insert((capacity, now));
                *tokens =
                    (*tokens + now.duration_since(*last).as_secs_f64() * self.rate).min(capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.rate)
            };
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkMode {
    Online,
    /// Cache only; a miss is an error.
    Offline,
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Cache-first HTTP client. Successful responses are persisted before they are returned.
pub struct CachedClient {
    transport: Box<dyn Transport>,
    cache: ResponseCache,
    limiter: RateLimiter,
    mode: NetworkMode,
    retry: RetryPolicy,
}

impl CachedClient {
    pub fn new(
        transport: Box<dyn Transport>,
        cache: ResponseCache,
        requests_per_second: f64,
        mode: NetworkMode,
    ) -> Self {
        CachedClient {
            transport,
            cache,
            limiter: RateLimiter::new(requests_per_second),
            mode,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn mode(&self) -> NetworkMode {
        self.mode
    }

    pub fn fetch(&self, request: &HttpRequest) -> Result<CacheEntry, ConnectorError> {
        if let Some(hit) = self.cache.get(request)? {
            return Ok(hit);
        }
        if self.mode == NetworkMode::Offline {
            return Err(ConnectorError::CacheMiss {
                url: request.url.clone(),
                key: request.cache_key(),
            });
        }
        let mut backoff = self.retry.initial_backoff;
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            self.limiter.acquire(request.host());
            match self.transport.execute(request) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    let entry = CacheEntry {
                        request: request.clone(),
                        fetched_at: Utc::now(),
                        status: resp.status,
                        content_type: resp.content_type,
                        body: resp.body,
                    };
                    self.cache.put(&entry)?;
                    return Ok(entry);
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last_error = format!("HTTP {}", resp.status);
                }
                Ok(resp) => {
                    return Err(ConnectorError::Status {
                        url: request.url.clone(),
                        status: resp.status,
                        body: resp.body.chars().take(500).collect(),
                    })
                }
                Err(e) => last_error = e,
            }
            log::warn!("{} attempt {attempt} failed: {last_error}", request.url);
            if attempt < self.retry.max_attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(ConnectorError::Network {
            url: request.url.clone(),
            attempts: self.retry.max_attempts.max(1),
            message: last_error,
        })
    }
}
