//! Implicit (phrase) and explicit (property/value) markers of contentiousness,
//! and fuzzy detection of suggested alternative terms.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{ContentiousTerm, TermLexicon};
use crate::matcher::FormMatcher;
use crate::model::{
    Dataset, Language, LiteralStore, PathKind, PropertyPath, ResourceRecord, ResourceRef,
};
use crate::text::{find_sequence, folded_words, word_tokens};
use crate::wsd::WsdScore;

const LEXEMES: &str = include_str!("../data/marker_lexemes.csv");
const RULES: &str = include_str!("../data/explicit_rules.csv");

pub const DEFAULT_SUGGESTION_FLOOR: f64 = 0.85;
pub const WILDCARD: &str = "*";

#[derive(Debug, Error)]
pub enum MarkerError {
    #[error("{origin}:{line}: {message}")]
    Row {
        origin: String,
        line: u64,
        message: String,
    },
    #[error("{origin}: {source}")]
    Csv {
        origin: String,
        #[source]
        source: csv::Error,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Marker type, one per catalog row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Category(u8);

impl Category {
    pub const OFFENSIVENESS: Category = Category(1);
    pub const HISTORICAL_USAGE: Category = Category(2);
    pub const INFORMAL_SPEECH: Category = Category(3);
    pub const IDENTITY: Category = Category(4);
    pub const STEREOTYPES: Category = Category(5);
    pub const USAGE_SUGGESTIONS: Category = Category(6);

    pub fn new(n: u8) -> Option<Self> {
        (1..=6).contains(&n).then_some(Category(n))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "offensiveness",
            2 => "historical usage",
            3 => "informal speech",
            4 => "(self-)identity categories",
            5 => "stereotypes incl. racism",
            _ => "usage suggestions",
        }
    }
}

impl TryFrom<u8> for Category {
    type Error = String;
    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Category::new(n).ok_or_else(|| format!("category {n} outside 1..6"))
    }
}

impl From<Category> for u8 {
    fn from(c: Category) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MarkerLexeme {
    pub language: Language,
    pub phrase: String,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExplicitMarkerRule {
    pub dataset: Dataset,
    pub selector_property: String,
    /// `*` accepts any value of the property.
    pub selector_value: String,
    pub category: Category,
}

impl ExplicitMarkerRule {
    pub fn accepts(&self, value: &str) -> bool {
        self.selector_value == WILDCARD || self.selector_value == value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerKind {
    Implicit,
    Explicit,
}

impl MarkerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MarkerKind::Implicit => "implicit",
            MarkerKind::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Marker {
    pub resource: ResourceRef,
    pub kind: MarkerKind,
    pub category: Category,
    /// Property path id (implicit) or selector property (explicit).
    pub evidence_property: String,
    /// Matched phrase (implicit) or observed value (explicit).
    pub evidence_text: String,
    /// The literal the phrase was found in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal: Option<String>,
}

fn parse_category(s: &str) -> Result<Category, String> {
    s.parse::<u8>()
        .ok()
        .and_then(Category::new)
        .ok_or_else(|| format!("category {s:?} outside 1..6"))
}

fn read_table<R: Read, T>(
    reader: R,
    origin: &str,
    header: &[&str],
    row: impl Fn(&csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, MarkerError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let found = rdr.headers().map_err(|source| MarkerError::Csv {
        origin: origin.into(),
        source,
    })?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(MarkerError::Row {
            origin: origin.into(),
            line: 1,
            message: format!("expected header {}", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| MarkerError::Csv {
            origin: origin.into(),
            source,
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() || rec.iter().any(str::is_empty) {
            return Err(MarkerError::Row {
                origin: origin.into(),
                line,
                message: format!("expected {} non-empty fields", header.len()),
            });
        }
        out.push(row(&rec).map_err(|message| MarkerError::Row {
            origin: origin.into(),
            line,
            message,
        })?);
    }
    Ok(out)
}

/// `language,phrase,category` rows.
pub fn parse_lexemes<R: Read>(reader: R, origin: &str) -> Result<Vec<MarkerLexeme>, MarkerError> {
    read_table(reader, origin, &["language", "phrase", "category"], |r| {
        Ok(MarkerLexeme {
            language: r[0]
                .parse()
                .map_err(|e: crate::model::ModelError| e.to_string())?,
            phrase: r[1].to_string(),
            category: parse_category(&r[2])?,
        })
    })
}

/// `dataset,selector_property,selector_value,category` rows.
pub fn parse_rules<R: Read>(
    reader: R,
    origin: &str,
) -> Result<Vec<ExplicitMarkerRule>, MarkerError> {
    read_table(
        reader,
        origin,
        &["dataset", "selector_property", "selector_value", "category"],
        |r| {
            Ok(ExplicitMarkerRule {
                dataset: r[0]
                    .parse()
                    .map_err(|e: crate::model::ModelError| e.to_string())?,
                selector_property: r[1].to_string(),
                selector_value: r[2].to_string(),
                category: parse_category(&r[3])?,
            })
        },
    )
}

fn open(path: &Path) -> Result<std::fs::File, MarkerError> {
    std::fs::File::open(path).map_err(|source| MarkerError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_lexemes(path: &Path) -> Result<Vec<MarkerLexeme>, MarkerError> {
    parse_lexemes(open(path)?, &path.display().to_string())
}

pub fn load_rules(path: &Path) -> Result<Vec<ExplicitMarkerRule>, MarkerError> {
    parse_rules(open(path)?, &path.display().to_string())
}

pub fn default_lexemes() -> Vec<MarkerLexeme> {
    parse_lexemes(LEXEMES.as_bytes(), "marker_lexemes.csv").expect("shipped lexemes parse")
}

pub fn default_rules() -> Vec<ExplicitMarkerRule> {
    parse_rules(RULES.as_bytes(), "explicit_rules.csv").expect("shipped rules parse")
}

/// Which literals implicit scanning looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImplicitScope {
    #[default]
    Descriptive,
    AllPaths,
}

impl ImplicitScope {
    fn admits(self, path: PropertyPath) -> bool {
        self == ImplicitScope::AllPaths || path.kind() == PathKind::Descriptive
    }
}

/// One marker per (resource, lexeme, literal) with the lexeme present as a whole
/// phrase, case-insensitively.
pub fn scan_implicit<'a>(
    records: impl IntoIterator<Item = &'a ResourceRecord>,
    lexemes: &[MarkerLexeme],
    scope: ImplicitScope,
) -> Vec<Marker> {
    let compiled: Vec<(&MarkerLexeme, Vec<String>)> = lexemes
        .iter()
        .map(|l| (l, folded_words(&l.phrase)))
        .collect();
    let mut out = BTreeSet::new();
    for rec in records {
        for lit in rec
            .literals
            .iter()
            .filter(|l| scope.admits(l.property_path))
        {
            let toks = folded_words(&lit.text);
            for (lex, phrase) in &compiled {
                if lex.language == rec.resource.language && find_sequence(&toks, phrase).is_some() {
                    out.insert(Marker {
                        resource: rec.resource.clone(),
                        kind: MarkerKind::Implicit,
                        category: lex.category,
                        evidence_property: lit.property_path.path_id().to_string(),
                        evidence_text: lex.phrase.clone(),
                        literal: Some(lit.text.clone()),
                    });
                }
            }
        }
    }
    out.into_iter().collect()
}

/// One marker per rule satisfied by a resource's recorded properties.
pub fn scan_explicit<'a>(
    records: impl IntoIterator<Item = &'a ResourceRecord>,
    rules: &[ExplicitMarkerRule],
) -> Vec<Marker> {
    let mut out = BTreeSet::new();
    for rec in records {
        for rule in rules.iter().filter(|r| r.dataset == rec.resource.dataset) {
            let Some(values) = rec.properties.get(&rule.selector_property) else {
                continue;
            };
            if let Some(v) = values.iter().filter(|v| rule.accepts(v)).min() {
                out.insert(Marker {
                    resource: rec.resource.clone(),
                    kind: MarkerKind::Explicit,
                    category: rule.category,
                    evidence_property: rule.selector_property.clone(),
                    evidence_text: v.clone(),
                    literal: None,
                });
            }
        }
    }
    out.into_iter().collect()
}

/// Values of selector properties that no rule accepts: uses of marker
/// properties for purposes other than contentiousness.
pub fn unmarked_selector_values<'a>(
    records: impl IntoIterator<Item = &'a ResourceRecord>,
    rules: &[ExplicitMarkerRule],
) -> Vec<(ResourceRef, String, String)> {
    let selectors: BTreeSet<(Dataset, &str)> = rules
        .iter()
        .map(|r| (r.dataset, r.selector_property.as_str()))
        .collect();
    let mut out = Vec::new();
    for rec in records {
        for (prop, values) in &rec.properties {
            if !selectors.contains(&(rec.resource.dataset, prop.as_str())) {
                continue;
            }
            for v in values {
                let accepted = rules.iter().any(|r| {
                    r.dataset == rec.resource.dataset
                        && &r.selector_property == prop
                        && r.accepts(v)
                });
                if !accepted {
                    out.push((rec.resource.clone(), prop.clone(), v.clone()));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestionMatch {
    pub suggestion: String,
    pub property_path: PropertyPath,
    /// The literal text the suggestion was matched against, as written.
    pub span: String,
    pub similarity: f64,
}

/// Suggestions of `term` found in the record's literals: each suggestion is
/// compared with every token window of the same length, and the best window per
/// literal is kept when its normalized edit similarity reaches `floor`.
pub fn find_suggestions(
    rec: &ResourceRecord,
    term: &ContentiousTerm,
    floor: f64,
) -> Vec<SuggestionMatch> {
    let mut out = Vec::new();
    for suggestion in &term.suggestions {
        let target = folded_words(suggestion).join(" ");
        let n = folded_words(suggestion).len();
        if n == 0 {
            continue;
        }
        for lit in &rec.literals {
            let toks = word_tokens(&lit.text, true);
            let mut best: Option<(f64, usize, usize)> = None;
            for w in toks.windows(n) {
                let cand = w
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                let sim = strsim::normalized_levenshtein(&cand, &target);
                if best.is_none_or(|(b, _, _)| sim > b) {
                    best = Some((sim, w[0].start, w[n - 1].end));
                }
            }
            if let Some((sim, s, e)) = best.filter(|(sim, _, _)| *sim >= floor) {
                out.push(SuggestionMatch {
                    suggestion: suggestion.clone(),
                    property_path: lit.property_path,
                    span: lit.text[s..e].to_string(),
                    similarity: sim,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCoverage {
    /// Resources whose preferred label or lemma contains a contentious term.
    pub with_term: usize,
    /// Of those, resources carrying at least one marker.
    pub marked: usize,
}

/// Per dataset: included Set-3 resources whose primary label contains their
/// term, and how many of them are marked. Resources count once per (dataset, id).
pub fn label_coverage_report(
    set3: &[WsdScore],
    store: &LiteralStore,
    lexicon: &TermLexicon,
    markers: &[Marker],
) -> BTreeMap<Dataset, LabelCoverage> {
    let marked: BTreeSet<(Dataset, &str)> = markers
        .iter()
        .map(|m| (m.resource.dataset, m.resource.resource_id.as_str()))
        .collect();
    let en = FormMatcher::new(lexicon, Language::En);
    let nl = FormMatcher::new(lexicon, Language::Nl);
    let mut with_term: BTreeSet<(Dataset, &str)> = BTreeSet::new();
    for s in set3.iter().filter(|s| s.included) {
        let Some(rec) = store.get(&s.resource) else {
            continue;
        };
        let matcher = match s.resource.language {
            Language::En => &en,
            Language::Nl => &nl,
        };
        let hit = rec
            .literals
            .iter()
            .filter(|l| l.property_path.is_primary_label())
            .any(|l| {
                matcher
                    .find(&l.text)
                    .iter()
                    .any(|(c, _)| *c == s.canonical_form)
            });
        if hit {
            with_term.insert((s.resource.dataset, s.resource.resource_id.as_str()));
        }
    }
    let mut out: BTreeMap<Dataset, LabelCoverage> = Dataset::ALL
        .into_iter()
        .map(|d| (d, LabelCoverage::default()))
        .collect();
    for key in &with_term {
        let c = out.entry(key.0).or_default();
        c.with_term += 1;
        if marked.contains(key) {
            c.marked += 1;
        }
    }
    out
}

pub const MARKER_HEADER: [&str; 7] = [
    "resource_id",
    "dataset",
    "language",
    "kind",
    "category",
    "evidence_property",
    "evidence_text",
];

pub fn write_markers_csv<W: io::Write>(out: W, markers: &[Marker]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MARKER_HEADER)?;
    for m in markers {
        let cat = m.category.number().to_string();
        w.write_record([
            m.resource.resource_id.as_str(),
            m.resource.dataset.as_str(),
            m.resource.language.as_str(),
            m.kind.as_str(),
            cat.as_str(),
            m.evidence_property.as_str(),
            m.evidence_text.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
