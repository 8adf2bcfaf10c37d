//! Harvest configuration: endpoints, cache, rate limits and filters.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use lodaudit_core::model::Language;

use crate::http::{CachedClient, NetworkMode, ResponseCache, UreqTransport};
use crate::wikidata::is_entity_id;
use crate::ConnectorError;

const EXCLUDED: &str = include_str!("../data/excluded_categories.txt");
pub const REQUIRED_EXCLUSIONS: [&str; 2] = ["Q13442814", "Q16521"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpConfig {
    pub cache_dir: PathBuf,
    pub requests_per_second: f64,
    pub timeout_secs: u64,
    pub user_agent: String,
    pub max_attempts: u32,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            cache_dir: PathBuf::from("cache"),
            requests_per_second: 5.0,
            timeout_secs: 120,
            user_agent: concat!("lodaudit/", env!("CARGO_PKG_VERSION")).to_string(),
            max_attempts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WikidataConfig {
    pub api: String,
    pub max_results: usize,
    pub page_size: usize,
    /// Path to a Q-id list; the shipped list is used when absent.
    pub excluded_categories: Option<PathBuf>,
    pub description_languages: Vec<Language>,
    /// Superclass levels fetched for the excluded-category check.
    pub class_depth: usize,
}

impl Default for WikidataConfig {
    fn default() -> Self {
        WikidataConfig {
            api: "https://www.wikidata.org/w/api.php".into(),
            max_results: crate::wikidata::MAX_RESULTS,
            page_size: 500,
            excluded_categories: None,
            description_languages: vec![Language::En],
            class_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AatConfig {
    pub endpoint: String,
    pub page_size: usize,
}

impl Default for AatConfig {
    fn default() -> Self {
        AatConfig {
            endpoint: "http://vocab.getty.edu/sparql".into(),
            page_size: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarvestConfig {
    pub languages: Vec<Language>,
    pub http: HttpConfig,
    pub wikidata: Option<WikidataConfig>,
    pub aat: Option<AatConfig>,
    /// PWN RDF dump (Turtle or N-Triples).
    pub pwn: Option<PathBuf>,
    /// ODWN XML file.
    pub odwn: Option<PathBuf>,
}

impl HarvestConfig {
    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.http.cache_dir);
        if let Some(w) = self.wikidata.as_mut() {
            if let Some(p) = w.excluded_categories.as_mut() {
                fix(p);
            }
        }
        if let Some(p) = self.pwn.as_mut() {
            fix(p);
        }
        if let Some(p) = self.odwn.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConnectorError> {
        let bad = |m: String| Err(ConnectorError::Config(m));
        if self.http.requests_per_second.is_nan() || self.http.requests_per_second <= 0.0 {
            return bad("http.requests_per_second must be positive".into());
        }
        if let Some(w) = &self.wikidata {
            if w.max_results > crate::wikidata::MAX_RESULTS {
                return bad(format!(
                    "wikidata.max_results exceeds {}",
                    crate::wikidata::MAX_RESULTS
                ));
            }
            if w.page_size == 0 {
                return bad("wikidata.page_size must be positive".into());
            }
        }
        if self.aat.as_ref().is_some_and(|a| a.page_size == 0) {
            return bad("aat.page_size must be positive".into());
        }
        Ok(())
    }

    pub fn languages(&self) -> Vec<Language> {
        if self.languages.is_empty() {
            Language::ALL.to_vec()
        } else {
            self.languages.clone()
        }
    }

    pub fn excluded_categories(&self) -> Result<BTreeSet<String>, ConnectorError> {
        match self
            .wikidata
            .as_ref()
            .and_then(|w| w.excluded_categories.as_ref())
        {
            Some(p) => load_excluded_categories(p),
            None => parse_excluded_categories(EXCLUDED, "excluded_categories.txt"),
        }
    }

    pub fn client(&self, mode: NetworkMode) -> CachedClient {
        let transport = UreqTransport::new(
            Duration::from_secs(self.http.timeout_secs),
            &self.http.user_agent,
        );
        CachedClient::new(
            Box::new(transport),
            ResponseCache::new(&self.http.cache_dir),
            self.http.requests_per_second,
            mode,
        )
        .with_retry(crate::http::RetryPolicy {
            max_attempts: self.http.max_attempts,
            ..Default::default()
        })
    }
}

/// One Q id per line, `#` starts a comment. Both required ids must be present.
pub fn parse_excluded_categories(
    text: &str,
    origin: &str,
) -> Result<BTreeSet<String>, ConnectorError> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let id = line.split('#').next().unwrap_or("").trim();
        if id.is_empty() {
            continue;
        }
        if !is_entity_id(id) {
            return Err(ConnectorError::Config(format!(
                "{origin}:{}: not a Q id: {id:?}",
                i + 1
            )));
        }
        out.insert(id.to_string());
    }
    for req in REQUIRED_EXCLUSIONS {
        if !out.contains(req) {
            return Err(ConnectorError::Config(format!(
                "{origin}: must exclude {req}"
            )));
        }
    }
    Ok(out)
}

pub fn load_excluded_categories(path: &Path) -> Result<BTreeSet<String>, ConnectorError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConnectorError::io(path, e))?;
    parse_excluded_categories(&text, &path.display().to_string())
}

pub fn default_excluded_categories() -> BTreeSet<String> {
    parse_excluded_categories(EXCLUDED, "excluded_categories.txt").expect("shipped list parses")
}
