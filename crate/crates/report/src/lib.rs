//! Report tables, plot data and the staged pipeline that produces them.

pub mod config;
pub mod pipeline;
pub mod tables;

pub use config::{load_config, ConfigError, LoadedConfig, PipelineConfig};
pub use pipeline::{bundle_digest, run_pipeline, Pipeline, ReportBundle, Stage, StageError};
pub use tables::{build_hit_matrix, top_terms, HitMatrix, ResultSet, TermRanking};
