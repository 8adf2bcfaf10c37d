//! Contentious-term lexicon: canonical terms, their inflected forms, suggestions
//! and curated related-resource links.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use oxrdf::Term;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, Language, ModelError, ResourceRef};
use crate::rdf::{self, vocab, Graph, RdfError};
use crate::text::fold;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error(transparent)]
    Rdf(#[from] RdfError),
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },
    #[error("form {form:?} ({language}) belongs to both {first:?} and {second:?}")]
    FormCollision {
        language: Language,
        form: String,
        first: String,
        second: String,
    },
    #[error("unknown language tag {tag:?} on {context}")]
    UnknownLanguage { tag: String, context: String },
    #[error("term label {0} has no literal form")]
    MissingLiteralForm(String),
    #[error("unknown term {canonical:?} ({language})")]
    UnknownTerm {
        canonical: String,
        language: Language,
    },
    #[error("invalid lexicon snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentiousTerm {
    pub canonical_form: String,
    pub language: Language,
    pub inflected_forms: BTreeSet<String>,
    pub suggestions: Vec<String>,
    /// Sorted by (dataset, resource_id), without duplicates.
    pub related_resources: Vec<ResourceRef>,
    pub source_id: String,
}

impl ContentiousTerm {
    pub fn new(canonical: &str, language: Language, source_id: impl Into<String>) -> Self {
        let canonical_form = fold(canonical.trim());
        ContentiousTerm {
            inflected_forms: BTreeSet::from([canonical_form.clone()]),
            canonical_form,
            language,
            suggestions: Vec::new(),
            related_resources: Vec::new(),
            source_id: source_id.into(),
        }
    }

    pub fn add_form(&mut self, form: &str) {
        let f = fold(form.trim());
        if !f.is_empty() {
            self.inflected_forms.insert(f);
        }
    }

    pub fn add_related(&mut self, r: ResourceRef) {
        if let Err(pos) = self.related_resources.binary_search(&r) {
            self.related_resources.insert(pos, r);
        }
    }

    pub fn related_in(&self, dataset: Dataset) -> impl Iterator<Item = &ResourceRef> {
        self.related_resources
            .iter()
            .filter(move |r| r.dataset == dataset)
    }
}

/// Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermLexicon {
    terms: Vec<ContentiousTerm>,
    index: BTreeMap<(Language, String), usize>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    terms: Vec<ContentiousTerm>,
}

impl TermLexicon {
    /// Builds the form index; terms are ordered by (language, canonical form).
    pub fn from_terms(mut terms: Vec<ContentiousTerm>) -> Result<Self, LexiconError> {
        terms.sort_by(|a, b| (a.language, &a.canonical_form).cmp(&(b.language, &b.canonical_form)));
        let mut index: BTreeMap<(Language, String), usize> = BTreeMap::new();
        for (i, term) in terms.iter().enumerate() {
            for form in &term.inflected_forms {
                if let Some(&prev) = index.get(&(term.language, form.clone())) {
                    return Err(LexiconError::FormCollision {
                        language: term.language,
                        form: form.clone(),
                        first: terms[prev].canonical_form.clone(),
                        second: term.canonical_form.clone(),
                    });
                }
                index.insert((term.language, form.clone()), i);
            }
        }
        Ok(TermLexicon { terms, index })
    }

    pub fn terms(&self) -> &[ContentiousTerm] {
        &self.terms
    }

    pub fn terms_in(&self, language: Language) -> impl Iterator<Item = &ContentiousTerm> {
        self.terms.iter().filter(move |t| t.language == language)
    }

    pub fn term(&self, canonical: &str, language: Language) -> Option<&ContentiousTerm> {
        self.lookup(canonical, language)
            .filter(|t| t.canonical_form == fold(canonical.trim()))
    }

    /// Resolves any inflected form to its canonical term.
    pub fn lookup(&self, form: &str, language: Language) -> Option<&ContentiousTerm> {
        self.index
            .get(&(language, fold(form.trim())))
            .map(|&i| &self.terms[i])
    }

    /// All (form, canonical) pairs for a language, ordered by form.
    pub fn forms(&self, language: Language) -> impl Iterator<Item = (&str, &ContentiousTerm)> {
        self.index
            .range((language, String::new())..)
            .take_while(move |((l, _), _)| *l == language)
            .map(|((_, f), &i)| (f.as_str(), &self.terms[i]))
    }

    pub fn form_count(&self, language: Language) -> usize {
        self.forms(language).count()
    }

    pub fn to_json(&self) -> String {
        let snap = Snapshot {
            terms: self.terms.clone(),
        };
        serde_json::to_string_pretty(&snap).expect("lexicon serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        let snap: Snapshot =
            serde_json::from_str(json).map_err(|e| LexiconError::Snapshot(e.to_string()))?;
        Self::from_terms(snap.terms)
    }
}

/// Curated links for one term, optionally restricted to one dataset, sorted by resource id.
pub fn related_resources(
    lexicon: &TermLexicon,
    canonical: &str,
    language: Language,
    dataset: Option<Dataset>,
) -> Result<Vec<ResourceRef>, LexiconError> {
    let term = lexicon
        .term(canonical, language)
        .ok_or_else(|| LexiconError::UnknownTerm {
            canonical: canonical.to_string(),
            language,
        })?;
    let mut out: Vec<ResourceRef> = term
        .related_resources
        .iter()
        .filter(|r| dataset.is_none_or(|d| r.dataset == d))
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        a.resource_id
            .cmp(&b.resource_id)
            .then(a.dataset.cmp(&b.dataset))
    });
    Ok(out)
}

/// Loads the reference layout: a SKOS-XL term graph plus an inflection table.
pub fn load_lexicon(kg_file: &Path, inflections_file: &Path) -> Result<TermLexicon, LexiconError> {
    LexiconLoader::new(kg_file)
        .inflections(inflections_file)
        .load()
}

/// Loader with the optional inputs spelled out.
#[derive(Debug, Clone)]
pub struct LexiconLoader {
    kg: PathBuf,
    inflections: Option<PathBuf>,
    odwn_links: Option<PathBuf>,
    suggestion_predicate: String,
}

impl LexiconLoader {
    pub fn new(kg: impl Into<PathBuf>) -> Self {
        LexiconLoader {
            kg: kg.into(),
            inflections: None,
            odwn_links: None,
            suggestion_predicate: vocab::SKOS_RELATED.to_string(),
        }
    }

    pub fn inflections(mut self, path: impl Into<PathBuf>) -> Self {
        self.inflections = Some(path.into());
        self
    }

    /// Extra `canonical,language,resource_id` table of ODWN links.
    pub fn odwn_links(mut self, path: impl Into<PathBuf>) -> Self {
        self.odwn_links = Some(path.into());
        self
    }

    pub fn suggestion_predicate(mut self, iri: impl Into<String>) -> Self {
        self.suggestion_predicate = iri.into();
        self
    }

    pub fn load(&self) -> Result<TermLexicon, LexiconError> {
        let graph = Graph::load(&self.kg)?;
        let mut terms = terms_from_graph(&graph, &self.suggestion_predicate)?;
        if let Some(path) = &self.inflections {
            for row in read_rows(path, ["canonical", "language", "form"])? {
                let term = find_term(&mut terms, &row, path)?;
                term.add_form(&row.values[2]);
            }
        }
        if let Some(path) = &self.odwn_links {
            for row in read_rows(path, ["canonical", "language", "resource_id"])? {
                let line = row.line;
                let term = find_term(&mut terms, &row, path)?;
                let r = ResourceRef::new(Dataset::Odwn, row.values[2].trim(), term.language)
                    .map_err(|e| row_error(path, line, e))?;
                term.add_related(r);
            }
        }
        TermLexicon::from_terms(terms.into_values().collect())
    }
}

fn terms_from_graph(
    graph: &Graph,
    suggestion_predicate: &str,
) -> Result<BTreeMap<(Language, String), ContentiousTerm>, LexiconError> {
    let label_class = Term::NamedNode(oxrdf::NamedNode::new_unchecked(vocab::XL_LABEL));
    let mut subjects: Vec<_> = graph
        .subjects_for(vocab::RDF_TYPE, &label_class)
        .cloned()
        .collect();
    for s in graph.subjects_with(vocab::XL_LITERAL_FORM) {
        if !subjects.contains(s) {
            subjects.push(s.clone());
        }
    }
    let mut terms: BTreeMap<(Language, String), ContentiousTerm> = BTreeMap::new();
    for subject in &subjects {
        let source_id = subject_id(subject);
        let lit = graph
            .literals(subject, vocab::XL_LITERAL_FORM)
            .next()
            .ok_or_else(|| LexiconError::MissingLiteralForm(source_id.clone()))?;
        let tag = lit.language().unwrap_or("");
        let language: Language =
            tag.to_ascii_lowercase()
                .parse()
                .map_err(|_| LexiconError::UnknownLanguage {
                    tag: tag.to_string(),
                    context: source_id.clone(),
                })?;
        let fresh = ContentiousTerm::new(lit.value(), language, source_id.clone());
        let term = terms
            .entry((language, fresh.canonical_form.clone()))
            .or_insert(fresh);
        for obj in graph.objects(subject, vocab::SKOS_RELATED_MATCH) {
            let Term::NamedNode(n) = obj else { continue };
            match resource_from_iri(n.as_str(), language) {
                Some(r) => term.add_related(r),
                None => log::warn!("{source_id}: ignoring related resource {n}"),
            }
        }
        for obj in graph.objects(subject, suggestion_predicate) {
            let text = match obj {
                Term::Literal(l) => Some(l.value().to_string()),
                other => rdf::as_subject(other).and_then(|s| {
                    graph
                        .literals(&s, vocab::XL_LITERAL_FORM)
                        .next()
                        .map(|l| l.value().to_string())
                }),
            };
            if let Some(t) = text.map(|t| t.trim().to_string()).filter(|t| !t.is_empty()) {
                if !term.suggestions.contains(&t) {
                    term.suggestions.push(t);
                }
            }
        }
    }
    for term in terms.values_mut() {
        term.suggestions.sort();
    }
    Ok(terms)
}

fn subject_id(s: &oxrdf::Subject) -> String {
    match s {
        oxrdf::Subject::NamedNode(n) => n.as_str().to_string(),
        other => other.to_string(),
    }
}

/// Maps a linked-resource IRI onto a dataset-native reference.
pub fn resource_from_iri(iri: &str, language: Language) -> Option<ResourceRef> {
    let dataset = if iri.contains("wikidata.org/") {
        Dataset::Wikidata
    } else if iri.contains("vocab.getty.edu/aat/") {
        Dataset::Aat
    } else if iri.contains("wordnet-rdf.princeton.edu/") {
        Dataset::Pwn
    } else {
        return None;
    };
    ResourceRef::new(dataset, rdf::local_name(iri), language).ok()
}

struct Row {
    line: u64,
    values: [String; 3],
}

fn read_rows(path: &Path, header: [&str; 3]) -> Result<Vec<Row>, LexiconError> {
    let p = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| LexiconError::Csv {
            path: p.clone(),
            source,
        })?;
    let found = reader
        .headers()
        .map_err(|source| LexiconError::Csv {
            path: p.clone(),
            source,
        })?
        .clone();
    if !found.is_empty() && found.iter().collect::<Vec<_>>() != header {
        return Err(LexiconError::Row {
            path: p,
            line: 1,
            message: format!("expected header {}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| LexiconError::Csv {
            path: p.clone(),
            source,
        })?;
        let line = rec.position().map(|pos| pos.line()).unwrap_or(0);
        if rec.len() != 3 || rec.iter().any(|v| v.is_empty()) {
            return Err(LexiconError::Row {
                path: p,
                line,
                message: "expected three non-empty fields".into(),
            });
        }
        rows.push(Row {
            line,
            values: [rec[0].to_string(), rec[1].to_string(), rec[2].to_string()],
        });
    }
    Ok(rows)
}

fn find_term<'a>(
    terms: &'a mut BTreeMap<(Language, String), ContentiousTerm>,
    row: &Row,
    path: &Path,
) -> Result<&'a mut ContentiousTerm, LexiconError> {
    let language: Language = row.values[1]
        .parse()
        .map_err(|_| LexiconError::UnknownLanguage {
            tag: row.values[1].clone(),
            context: format!("{}:{}", path.display(), row.line),
        })?;
    let canonical = fold(&row.values[0]);
    terms
        .get_mut(&(language, canonical.clone()))
        .ok_or(LexiconError::UnknownTerm {
            canonical,
            language,
        })
}

fn row_error(path: &Path, line: u64, e: ModelError) -> LexiconError {
    LexiconError::Row {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}
