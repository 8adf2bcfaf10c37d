//! Harvesting of literals from Wikidata, the Getty AAT, Princeton WordNet and
//! Open Dutch WordNet, behind a caching, rate-limited HTTP client.

use std::io;
use std::path::{Path, PathBuf};

use lodaudit_core::model::ModelError;
use thiserror::Error;

pub mod aat;
pub mod config;
pub mod http;
pub mod odwn;
pub mod pwn;
pub mod wikidata;

pub use config::{load_excluded_categories, HarvestConfig};
pub use http::{CachedClient, HttpRequest, NetworkMode, ResponseCache, UreqTransport};
pub use wikidata::{filter_wikidata, search_wikidata, WikidataEntityRecord};

#[derive(Debug, Error)]
pub enum ConnectorError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed response from {context}: {message}")]
    Malformed { context: String, message: String },
    #[error("offline and not cached: {url} (key {key})")]
    CacheMiss { url: String, key: String },
    #[error("HTTP {status} from {url}: {body}")]
    Status {
        url: String,
        status: u16,
        body: String,
    },
    #[error("{url}: giving up after {attempts} attempts: {message}")]
    Network {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(
        "query {query} returned {triple} twice (page at offset {offset}); paging is not stable"
    )]
    PageInconsistency {
        query: String,
        offset: usize,
        triple: String,
    },
    #[error("{0}")]
    Rdf(#[from] lodaudit_core::rdf::RdfError),
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("config: {0}")]
    Config(String),
}

impl ConnectorError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        ConnectorError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
