//! Bag-of-words disambiguation of query hits against each term's background.

mod embedding;
mod preprocess;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedding::EmbeddingModel;
pub use preprocess::{preprocess, Preprocessor, MIN_TOKEN_CHARS};

use crate::lexicon::ContentiousTerm;
use crate::matcher::Hit;
use crate::model::{
    Dataset, Language, LiteralStore, PathKind, PropertyPath, ResourceRecord, ResourceRef,
};
use crate::text::{find_sequence, folded_words};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum WsdError {
    #[error("no background for {canonical:?} ({language}): no related resources")]
    NoBackground {
        canonical: String,
        language: Language,
    },
    #[error("degenerate vector: zero norm")]
    DegenerateVector,
    #[error("vector dimensions differ: {expected} vs {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding file line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BagRole {
    Background,
    Context,
}

/// A multiset of preprocessed tokens, kept in source order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfWords {
    pub tokens: Vec<String>,
    pub role: BagRole,
    pub canonical_form: String,
    pub language: Language,
}

impl BagOfWords {
    pub fn from_texts<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        role: BagRole,
        canonical_form: &str,
        pre: &Preprocessor,
    ) -> Self {
        BagOfWords {
            tokens: texts.into_iter().flat_map(|t| pre.preprocess(t)).collect(),
            role,
            canonical_form: canonical_form.to_string(),
            language: pre.language,
        }
    }
}

/// Mean of the in-vocabulary token vectors, each occurrence counted.
/// `None` when no token is in the vocabulary.
pub fn embed(bow: &BagOfWords, model: &EmbeddingModel) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; model.dimension()];
    let mut n = 0usize;
    for v in bow.tokens.iter().filter_map(|t| model.get(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Some(sum)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, WsdError> {
    if a.len() != b.len() {
        return Err(WsdError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(WsdError::DegenerateVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

fn mentions(text: &str, forms: &[Vec<String>]) -> bool {
    let toks = folded_words(text);
    forms.iter().any(|f| find_sequence(&toks, f).is_some())
}

/// Background texts contributed by one related resource.
fn background_texts<'a>(rec: &'a ResourceRecord, forms: &[Vec<String>]) -> Vec<&'a str> {
    let all: Vec<&str> = rec.literals.iter().map(|l| l.text.as_str()).collect();
    match rec.resource.dataset {
        Dataset::Wikidata => {
            let in_labels = rec
                .literals
                .iter()
                .filter(|l| l.property_path.kind() == PathKind::Label)
                .any(|l| mentions(&l.text, forms));
            let mut out = all;
            if in_labels {
                for p in ["P31", "P279"] {
                    if let Some(labels) = rec.linked_labels.get(p) {
                        out.extend(labels.iter().map(String::as_str));
                    }
                }
            }
            out
        }
        Dataset::Odwn => {
            let glosses: Vec<_> = rec
                .literals
                .iter()
                .filter(|l| {
                    l.property_path == PropertyPath::OdwnSynsetDefinitionGloss
                        && mentions(&l.text, forms)
                })
                .collect();
            if glosses.is_empty() {
                return all;
            }
            let mut out: Vec<&str> = glosses.iter().map(|l| l.text.as_str()).collect();
            out.extend(
                rec.literals
                    .iter()
                    .filter(|l| l.property_path == PropertyPath::OdwnLemmaWrittenForm)
                    .map(|l| l.text.as_str()),
            );
            for synset in glosses
                .iter()
                .filter_map(|l| l.origin.as_deref())
                .collect::<BTreeSet<_>>()
            {
                if let Some(lemmas) = rec.linked_labels.get(synset) {
                    out.extend(lemmas.iter().map(String::as_str));
                }
            }
            out
        }
        Dataset::Aat | Dataset::Pwn => all,
    }
}

/// Concatenated literals of the term's related resources, with the Wikidata
/// class-label and ODWN synset-gloss rules applied.
pub fn build_background(
    term: &ContentiousTerm,
    set1: &LiteralStore,
    pre: &Preprocessor,
) -> Result<BagOfWords, WsdError> {
    let no_bg = || WsdError::NoBackground {
        canonical: term.canonical_form.clone(),
        language: term.language,
    };
    if term.related_resources.is_empty() {
        return Err(no_bg());
    }
    let forms: Vec<Vec<String>> = term
        .inflected_forms
        .iter()
        .map(|f| folded_words(f))
        .collect();
    let mut texts = Vec::new();
    let mut found = false;
    for r in &term.related_resources {
        if let Some(rec) = set1.get(r) {
            found = true;
            texts.extend(background_texts(rec, &forms));
        }
    }
    if !found {
        return Err(no_bg());
    }
    Ok(BagOfWords::from_texts(
        texts,
        BagRole::Background,
        &term.canonical_form,
        pre,
    ))
}

/// Context bag from all label and descriptive literals of a resource.
pub fn build_context(rec: &ResourceRecord, canonical: &str, pre: &Preprocessor) -> BagOfWords {
    BagOfWords::from_texts(
        rec.literals.iter().map(|l| l.text.as_str()),
        BagRole::Context,
        canonical,
        pre,
    )
}

/// A Set-2 resource to score for one canonical term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub canonical_form: String,
    pub resource: ResourceRef,
    pub context: BagOfWords,
}

/// Distinct (canonical, resource) pairs among the hits, in sorted order.
pub fn candidates_from_hits(
    hits: &[Hit],
    store: &LiteralStore,
    pre_en: &Preprocessor,
    pre_nl: &Preprocessor,
) -> Vec<Candidate> {
    let pairs: BTreeSet<(&str, &ResourceRef)> = hits
        .iter()
        .map(|h| (h.canonical_form.as_str(), &h.literal.resource))
        .collect();
    pairs
        .into_iter()
        .filter_map(|(canonical, r)| {
            let rec = store.get(r)?;
            let pre = match r.language {
                Language::En => pre_en,
                Language::Nl => pre_nl,
            };
            Some(Candidate {
                canonical_form: canonical.to_string(),
                resource: r.clone(),
                context: build_context(rec, canonical, pre),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsdScore {
    pub resource: ResourceRef,
    pub canonical_form: String,
    /// `None` when either bag has no in-vocabulary token.
    pub similarity: Option<f64>,
    pub included: bool,
}

fn rank(a: &WsdScore, b: &WsdScore) -> Ordering {
    match (a.similarity, b.similarity) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.resource.resource_id.cmp(&b.resource.resource_id))
}

/// Scores every candidate and includes at most `k` per (canonical, dataset,
/// language), all at or above `threshold`. Output is grouped in that key order
/// and ranked within groups by similarity, then resource id.
pub fn disambiguate(
    candidates: &[Candidate],
    backgrounds: &BTreeMap<(String, Language), BagOfWords>,
    model: &EmbeddingModel,
    threshold: f64,
    k: usize,
) -> Result<Vec<WsdScore>, WsdError> {
    let mut bg_vectors: BTreeMap<(&str, Language), Option<Vec<f64>>> = BTreeMap::new();
    let mut groups: BTreeMap<(&str, Dataset, Language), Vec<WsdScore>> = BTreeMap::new();
    for c in candidates {
        let lang = c.resource.language;
        let key = (c.canonical_form.as_str(), lang);
        if let std::collections::btree_map::Entry::Vacant(slot) = bg_vectors.entry(key) {
            let bg = backgrounds
                .get(&(c.canonical_form.clone(), lang))
                .ok_or_else(|| WsdError::NoBackground {
                    canonical: c.canonical_form.clone(),
                    language: lang,
                })?;
            slot.insert(embed(bg, model));
        }
        let similarity = match (&bg_vectors[&key], embed(&c.context, model)) {
            (Some(b), Some(v)) => match cosine(&v, b) {
                Ok(s) => Some(s),
                Err(WsdError::DegenerateVector) => None,
                Err(e) => return Err(e),
            },
            _ => None,
        };
        groups
            .entry((c.canonical_form.as_str(), c.resource.dataset, lang))
            .or_default()
            .push(WsdScore {
                resource: c.resource.clone(),
                canonical_form: c.canonical_form.clone(),
                similarity,
                included: false,
            });
    }
    let mut out = Vec::with_capacity(candidates.len());
    for (_, mut scores) in groups {
        scores.sort_by(rank);
        for (i, s) in scores.iter_mut().enumerate() {
            s.included = i < k && s.similarity.is_some_and(|x| x >= threshold);
        }
        out.extend(scores);
    }
    Ok(out)
}

/// Set-1 resources absent from the included Set-3 resources, per dataset and language.
pub fn sanity_check_set1<'a>(
    set3: &[WsdScore],
    set1: impl IntoIterator<Item = &'a ResourceRef>,
) -> BTreeMap<(Dataset, Language), Vec<ResourceRef>> {
    let included: BTreeSet<&ResourceRef> = set3
        .iter()
        .filter(|s| s.included)
        .map(|s| &s.resource)
        .collect();
    let mut missing: BTreeMap<(Dataset, Language), BTreeSet<ResourceRef>> = BTreeMap::new();
    for r in set1 {
        if !included.contains(r) {
            missing
                .entry((r.dataset, r.language))
                .or_default()
                .insert(r.clone());
        }
    }
    missing
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// `canonical,dataset,language,resource_id,similarity,included`; unscored rows leave similarity empty.
pub fn write_scores_csv<W: io::Write>(out: W, scores: &[WsdScore]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "canonical",
        "dataset",
        "language",
        "resource_id",
        "similarity",
        "included",
    ])?;
    for s in scores {
        let sim = s.similarity.map(|x| format!("{x:.9}")).unwrap_or_default();
        w.write_record([
            s.canonical_form.as_str(),
            s.resource.dataset.as_str(),
            s.resource.language.as_str(),
            s.resource.resource_id.as_str(),
            sim.as_str(),
            if s.included { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}
