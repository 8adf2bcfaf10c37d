//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lodaudit_connectors::config::HarvestConfig;
use lodaudit_core::markers::DEFAULT_SUGGESTION_FLOOR;
use lodaudit_core::wsd::{DEFAULT_THRESHOLD, DEFAULT_TOP_K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    /// Turtle or N-Triples file with the contentious terms.
    pub kg: PathBuf,
    pub inflections: Option<PathBuf>,
    pub odwn_links: Option<PathBuf>,
    /// Predicate carrying suggested alternative terms; `skos:related` when absent.
    pub suggestion_predicate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WsdConfig {
    pub embedding_en: Option<PathBuf>,
    pub embedding_nl: Option<PathBuf>,
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for WsdConfig {
    fn default() -> Self {
        WsdConfig {
            embedding_en: None,
            embedding_nl: None,
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarkerConfig {
    pub lexemes: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    /// Scan label paths for implicit markers too.
    pub implicit_on_labels: bool,
    pub suggestion_floor: f64,
}

impl Default for MarkerConfig {
    fn default() -> Self {
        MarkerConfig {
            lexemes: None,
            rules: None,
            implicit_on_labels: false,
            suggestion_floor: DEFAULT_SUGGESTION_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub per_quartile: usize,
    /// One blank annotation sheet is written per id.
    pub annotators: Vec<String>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            per_quartile: lodaudit_core::evaluation::PER_QUARTILE,
            annotators: vec!["annotator1".into(), "annotator2".into()],
        }
    }
}

/// Previously harvested stores, used instead of querying the sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    pub store: PathBuf,
    pub set1_store: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub lexicon: LexiconConfig,
    #[serde(default)]
    pub harvest: HarvestConfig,
    pub snapshot: Option<SnapshotConfig>,
    #[serde(default)]
    pub wsd: WsdConfig,
    #[serde(default)]
    pub markers: MarkerConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// A parsed configuration plus the TOML needed to rerun it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// The configuration as given (relative paths kept, output dir omitted).
    pub snapshot: String,
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.lexicon.kg);
        for p in [&mut self.lexicon.inflections, &mut self.lexicon.odwn_links]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for p in [
            &mut self.wsd.embedding_en,
            &mut self.wsd.embedding_nl,
            &mut self.markers.lexemes,
            &mut self.markers.rules,
            &mut self.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(s) = self.snapshot.as_mut() {
            fix(&mut s.store);
            fix(&mut s.set1_store);
        }
        self.harvest.resolve_paths(base);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if !self.lexicon.kg.is_file() {
            return bad(format!(
                "lexicon.kg: no such file {}",
                self.lexicon.kg.display()
            ));
        }
        for p in [&self.lexicon.inflections, &self.lexicon.odwn_links]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return bad(format!("lexicon: no such file {}", p.display()));
            }
        }
        let h = &self.harvest;
        if self.snapshot.is_none()
            && h.wikidata.is_none()
            && h.aat.is_none()
            && h.pwn.is_none()
            && h.odwn.is_none()
        {
            return bad("no sources: configure [harvest] sources or a [snapshot]".into());
        }
        h.validate().map_err(|e| ConfigError(e.to_string()))?;
        for lang in h.languages() {
            let path = match lang {
                lodaudit_core::Language::En => &self.wsd.embedding_en,
                lodaudit_core::Language::Nl => &self.wsd.embedding_nl,
            };
            if path.is_none() {
                return bad(format!("wsd.embedding_{lang} is required"));
            }
        }
        if !(-1.0..=1.0).contains(&self.wsd.threshold) {
            return bad("wsd.threshold must lie in [-1, 1]".into());
        }
        if self.wsd.top_k == 0 {
            return bad("wsd.top_k must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.evaluation.annotators {
            if !lodaudit_core::evaluation::valid_annotator(a) || !seen.insert(a) {
                return bad(format!(
                    "evaluation.annotators: invalid or duplicate id {a:?}"
                ));
            }
        }
        if self.out_dir.is_none() {
            return bad("no output directory: set out_dir or pass --out".into());
        }
        Ok(())
    }
}

/// Reads, overrides, resolves and validates a configuration file.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut config = PipelineConfig::parse(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let snapshot = toml::to_string(&config).map_err(|e| ConfigError(e.to_string()))?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    if let Some(o) = out {
        config.out_dir = Some(o.to_path_buf());
    }
    config.resolve_paths(&base_dir);
    config.validate()?;
    Ok(LoadedConfig {
        config,
        snapshot,
        base_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_omits_output_and_keeps_seed_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("kg.ttl"), "").unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(
            &cfg,
            "seed = 1\nout_dir = \"o\"\n[lexicon]\nkg = \"kg.ttl\"\n[harvest]\nlanguages = [\"en\"]\npwn = \"wn.ttl\"\n[wsd]\nembedding_en = \"e.txt\"\n",
        )
        .unwrap();
        let l = load_config(&cfg, Some(7), None).unwrap();
        assert_eq!(l.config.seed, 7);
        assert!(l.snapshot.contains("seed = 7"));
        assert!(!l.snapshot.contains("out_dir"));
        assert!(l.snapshot.contains("kg = \"kg.ttl\""));
        assert_eq!(
            l.config.out_dir.as_deref(),
            Some(dir.path().join("o").as_path())
        );
        let err = load_config(&cfg, None, None);
        assert!(err.is_ok());
        std::fs::write(
            &cfg,
            "[lexicon]\nkg = \"kg.ttl\"\n[harvest]\npwn = \"wn.ttl\"\n",
        )
        .unwrap();
        let err = load_config(&cfg, None, Some(dir.path())).unwrap_err();
        assert!(err.0.contains("embedding"), "{err}");
    }
}
