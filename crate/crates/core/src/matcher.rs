//! Whole-word term matching over literals and hit aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use serde::{Deserialize, Serialize};

use crate::lexicon::TermLexicon;
use crate::model::{Dataset, Language, LiteralStore, PropertyPath, ResourceRef, RetrievedLiteral};
use crate::text::{find_sequence, fold, folded_words};

/// The forms from `forms` occurring in `text` as whole words or contiguous word
/// sequences. Case-insensitive; diacritics are significant.
pub fn match_term<S: AsRef<str>>(text: &str, forms: &[S]) -> BTreeSet<String> {
    let tokens = folded_words(text);
    forms
        .iter()
        .filter(|f| find_sequence(&tokens, &folded_words(f.as_ref())).is_some())
        .map(|f| fold(f.as_ref()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub literal: RetrievedLiteral,
    /// The earliest matching form when several forms of the term occur.
    pub matched_form: String,
    pub canonical_form: String,
    pub language: Language,
}

/// Form tokens, the form itself and its canonical form.
type FormEntry<'a> = (Vec<String>, &'a str, &'a str);

/// Precomputed form index for one language, keyed by first token.
pub struct FormMatcher<'a> {
    by_first: HashMap<String, Vec<FormEntry<'a>>>,
}

impl<'a> FormMatcher<'a> {
    pub fn new(lexicon: &'a TermLexicon, language: Language) -> Self {
        let mut by_first: HashMap<String, Vec<FormEntry<'a>>> = HashMap::new();
        for (form, term) in lexicon.forms(language) {
            let toks = folded_words(form);
            let Some(first) = toks.first().cloned() else {
                continue;
            };
            by_first
                .entry(first)
                .or_default()
                .push((toks, form, term.canonical_form.as_str()));
        }
        FormMatcher { by_first }
    }

    /// (canonical, form) pairs found in `text`, one per canonical, in order of first occurrence.
    pub fn find(&self, text: &str) -> Vec<(&'a str, &'a str)> {
        let tokens = folded_words(text);
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for i in 0..tokens.len() {
            let Some(cands) = self.by_first.get(&tokens[i]) else {
                continue;
            };
            let mut here: Vec<&(Vec<String>, &str, &str)> = cands
                .iter()
                .filter(|(seq, _, _)| {
                    tokens.len() - i >= seq.len() && tokens[i..i + seq.len()] == seq[..]
                })
                .collect();
            // longest form first so "bush negroes" beats "bush" at the same position
            here.sort_by_key(|(seq, form, _)| (std::cmp::Reverse(seq.len()), *form));
            for (_, form, canonical) in here {
                if seen.insert(*canonical) {
                    out.push((*canonical, *form));
                }
            }
        }
        out
    }
}

/// One hit per (literal, canonical term); each literal is matched against the
/// lexicon of its resource's language.
pub fn count_hits<'l, I>(literals: I, lexicon: &TermLexicon) -> Vec<Hit>
where
    I: IntoIterator<Item = &'l RetrievedLiteral>,
{
    let en = FormMatcher::new(lexicon, Language::En);
    let nl = FormMatcher::new(lexicon, Language::Nl);
    let mut hits = Vec::new();
    for lit in literals {
        let language = lit.resource.language;
        let matcher = match language {
            Language::En => &en,
            Language::Nl => &nl,
        };
        for (canonical, form) in matcher.find(&lit.text) {
            hits.push(Hit {
                literal: lit.clone(),
                matched_form: form.to_string(),
                canonical_form: canonical.to_string(),
                language,
            });
        }
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormGrouping {
    /// Inflected forms fold into their canonical row.
    Canonical,
    /// One row per matched form.
    PerForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitAggregate {
    pub canonical_form: String,
    /// Set only for per-form aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    pub dataset: Dataset,
    pub language: Language,
    pub property_path: PropertyPath,
    pub count: u64,
}

type AggKey = (
    String,
    &'static str,
    &'static str,
    &'static str,
    Option<String>,
);

pub fn aggregate(hits: &[Hit], grouping: FormGrouping) -> Vec<HitAggregate> {
    let mut groups: BTreeMap<AggKey, (Dataset, Language, PropertyPath, u64)> = BTreeMap::new();
    for h in hits {
        let r = &h.literal.resource;
        let path = h.literal.property_path;
        let form = match grouping {
            FormGrouping::Canonical => None,
            FormGrouping::PerForm => Some(h.matched_form.clone()),
        };
        let key = (
            h.canonical_form.clone(),
            r.dataset.as_str(),
            r.language.as_str(),
            path.path_id(),
            form,
        );
        groups
            .entry(key)
            .or_insert((r.dataset, r.language, path, 0))
            .3 += 1;
    }
    groups
        .into_iter()
        .map(
            |((canonical_form, _, _, _, form), (dataset, language, property_path, count))| {
                HitAggregate {
                    canonical_form,
                    form,
                    dataset,
                    language,
                    property_path,
                    count,
                }
            },
        )
        .collect()
}

/// Total hits per (canonical, language).
pub fn totals(aggregates: &[HitAggregate]) -> BTreeMap<(String, Language), u64> {
    let mut out = BTreeMap::new();
    for a in aggregates {
        *out.entry((a.canonical_form.clone(), a.language))
            .or_insert(0) += a.count;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Set1 {
    pub hits: Vec<Hit>,
    /// Canonical terms without related resources, per dataset and language.
    pub uncovered: BTreeMap<(Dataset, Language), Vec<String>>,
    /// Canonical terms without related resources in any dataset.
    pub uncovered_everywhere: BTreeMap<Language, Vec<String>>,
    /// Linked resources with no record in the store.
    pub missing: Vec<ResourceRef>,
}

/// Hits in the literals of curated related resources, plus coverage gaps.
pub fn build_set1(lexicon: &TermLexicon, store: &LiteralStore) -> Set1 {
    let mut related: BTreeSet<&ResourceRef> = BTreeSet::new();
    let mut set1 = Set1::default();
    for language in Language::ALL {
        let mut everywhere = Vec::new();
        for term in lexicon.terms_in(language) {
            if term.related_resources.is_empty() {
                everywhere.push(term.canonical_form.clone());
            }
            for dataset in Dataset::ALL.into_iter().filter(|d| d.supports(language)) {
                if term.related_in(dataset).next().is_none() {
                    set1.uncovered
                        .entry((dataset, language))
                        .or_default()
                        .push(term.canonical_form.clone());
                }
            }
            related.extend(term.related_resources.iter());
        }
        set1.uncovered_everywhere.insert(language, everywhere);
    }
    let mut literals = Vec::new();
    for r in related {
        match store.get(r) {
            Some(rec) => literals.extend(rec.literals.iter()),
            None => {
                log::warn!("related resource {r} not in store");
                set1.missing.push(r.clone());
            }
        }
    }
    set1.hits = count_hits(literals, lexicon);
    set1
}

pub const AGGREGATE_HEADER: [&str; 5] =
    ["canonical", "dataset", "language", "property_path", "count"];

/// Canonical aggregates as CSV; per-form rows carry an extra `form` column.
pub fn write_aggregates_csv<W: io::Write>(out: W, aggregates: &[HitAggregate]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let per_form = aggregates.iter().any(|a| a.form.is_some());
    if per_form {
        w.write_record([
            "canonical",
            "form",
            "dataset",
            "language",
            "property_path",
            "count",
        ])?;
    } else {
        w.write_record(AGGREGATE_HEADER)?;
    }
    for a in aggregates {
        let count = a.count.to_string();
        let mut row = vec![a.canonical_form.as_str()];
        if per_form {
            row.push(a.form.as_deref().unwrap_or(""));
        }
        row.extend([
            a.dataset.as_str(),
            a.language.as_str(),
            a.property_path.path_id(),
            &count,
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct HitLine<'a> {
    canonical: &'a str,
    form: &'a str,
    dataset: Dataset,
    language: Language,
    resource_id: &'a str,
    property_path: PropertyPath,
    text: &'a str,
}

/// One JSON object per hit, in input order.
pub fn write_hits_jsonl<W: io::Write>(mut out: W, hits: &[Hit]) -> io::Result<()> {
    for h in hits {
        let line = HitLine {
            canonical: &h.canonical_form,
            form: &h.matched_form,
            dataset: h.literal.resource.dataset,
            language: h.language,
            resource_id: &h.literal.resource.resource_id,
            property_path: h.literal.property_path,
            text: &h.literal.text,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
