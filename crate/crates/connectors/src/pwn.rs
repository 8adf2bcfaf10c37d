//! Princeton WordNet literals from its OntoLex RDF rendering.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use oxrdf::{Subject, Term};

use lodaudit_core::model::{
    Dataset, Language, PropertyPath, ResourceRecord, ResourceRef, RetrievedLiteral,
};
use lodaudit_core::rdf::{as_subject, local_name, vocab, Graph};

pub const USAGE_DOMAIN: &str = "https://globalwordnet.github.io/schemas/wn#usage_domain";

/// Splits a gloss into its definition and the double-quoted examples.
///
/// `relating to X; "the X roamed"` gives `("relating to X", ["the X roamed"])`.
pub fn split_definition(text: &str) -> (String, Vec<String>) {
    let mut definition = String::new();
    let mut examples = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    for c in text.chars() {
        match c {
            '"' | '\u{201C}' | '\u{201D}' => {
                if quoted {
                    let ex = current.trim();
                    if !ex.is_empty() {
                        examples.push(ex.to_string());
                    }
                    current.clear();
                } else {
                    definition.push(' ');
                }
                quoted = !quoted;
            }
            _ if quoted => current.push(c),
            _ => definition.push(c),
        }
    }
    if quoted {
        // unbalanced quote: keep the tail as definition text
        definition.push_str(&current);
    }
    let definition = definition
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_matches(|c: char| c == ';' || c == ',' || c.is_whitespace())
        .to_string();
    (definition, examples)
}

fn text_values<'a>(
    graph: &'a Graph,
    node: &Subject,
    predicate: &'a str,
) -> Vec<(&'a oxrdf::Literal, String)> {
    let mut out = Vec::new();
    for o in graph.objects(node, predicate) {
        match o {
            Term::Literal(l) => out.push((l, node.to_string())),
            other => {
                if let Some(s) = as_subject(other) {
                    for l in graph.literals(&s, vocab::RDF_VALUE) {
                        out.push((l, s.to_string()));
                    }
                }
            }
        }
    }
    out
}

fn english(lit: &oxrdf::Literal, context: &str) -> bool {
    match lit.language() {
        Some(tag) => Language::from_tag(tag).is_ok_and(|l| l == Language::En),
        None => {
            log::warn!(
                "{context}: skipping literal without language tag: {:?}",
                lit.value()
            );
            false
        }
    }
}

/// One record per synset: member written representations, the definition and
/// its examples, and `usage_domain` targets as properties. A target is named by
/// its `rdfs:label`, else its alphabetically first member lemma, else its id.
pub fn extract_records(graph: &Graph, retrieved_at: DateTime<Utc>) -> Vec<ResourceRecord> {
    let mut records: BTreeMap<String, ResourceRecord> = BTreeMap::new();
    let mut record_for = |synset: &Subject| -> Option<String> {
        let Subject::NamedNode(n) = synset else {
            return None;
        };
        let id = local_name(n.as_str()).to_string();
        let r = ResourceRef::new(Dataset::Pwn, &id, Language::En).ok()?;
        records
            .entry(id.clone())
            .or_insert_with(|| ResourceRecord::new(r));
        Some(id)
    };
    let mut pending: Vec<(String, PropertyPath, String, String)> = Vec::new();
    let mut properties: Vec<(String, String)> = Vec::new();
    let mut members: HashMap<Subject, Vec<String>> = HashMap::new();

    for entry in graph.subjects_with(vocab::ONTOLEX_CANONICAL_FORM) {
        let mut written = Vec::new();
        for form in graph
            .objects(entry, vocab::ONTOLEX_CANONICAL_FORM)
            .filter_map(as_subject)
        {
            for l in graph.literals(&form, vocab::ONTOLEX_WRITTEN_REP) {
                if english(l, &form.to_string()) {
                    written.push(l.value().to_string());
                }
            }
        }
        let mut synsets: Vec<Subject> = graph
            .objects(entry, vocab::ONTOLEX_EVOKES)
            .filter_map(as_subject)
            .collect();
        for sense in graph
            .objects(entry, vocab::ONTOLEX_SENSE)
            .filter_map(as_subject)
        {
            for p in [
                vocab::ONTOLEX_IS_LEXICALIZED_SENSE_OF,
                vocab::ONTOLEX_REFERENCE,
            ] {
                synsets.extend(graph.objects(&sense, p).filter_map(as_subject));
            }
        }
        synsets.sort_by_key(|s| s.to_string());
        synsets.dedup();
        for s in &synsets {
            members
                .entry(s.clone())
                .or_default()
                .extend(written.iter().cloned());
            if let Some(id) = record_for(s) {
                for w in &written {
                    pending.push((
                        id.clone(),
                        PropertyPath::PwnWrittenRep,
                        w.clone(),
                        entry.to_string(),
                    ));
                }
            }
        }
    }

    for synset in graph.subjects_with(vocab::WN_DEFINITION) {
        let Some(id) = record_for(synset) else {
            continue;
        };
        for (lit, origin) in text_values(graph, synset, vocab::WN_DEFINITION) {
            if !english(lit, &origin) {
                continue;
            }
            let (def, examples) = split_definition(lit.value());
            if !def.is_empty() {
                pending.push((id.clone(), PropertyPath::PwnDefinition, def, origin.clone()));
            }
            for ex in examples {
                pending.push((id.clone(), PropertyPath::PwnExample, ex, origin.clone()));
            }
        }
    }

    for synset in graph.subjects_with(USAGE_DOMAIN) {
        let Some(id) = record_for(synset) else {
            continue;
        };
        for target in graph.objects(synset, USAGE_DOMAIN) {
            let value = match target {
                Term::Literal(l) => l.value().to_string(),
                other => {
                    let s = as_subject(other).expect("non-literal object");
                    let first_member = members.get(&s).and_then(|m| m.iter().min());
                    match (graph.literals(&s, vocab::RDFS_LABEL).next(), first_member) {
                        (Some(l), _) => l.value().to_string(),
                        (None, Some(m)) => m.clone(),
                        (None, None) => match &s {
                            Subject::NamedNode(n) => local_name(n.as_str()).to_string(),
                            b => b.to_string(),
                        },
                    }
                }
            };
            properties.push((id.clone(), value));
        }
    }

    for (id, path, text, origin) in pending {
        let rec = records.get_mut(&id).expect("record created");
        match RetrievedLiteral::new(rec.resource.clone(), path, text, retrieved_at) {
            Ok(l) => rec
                .literals
                .push(l.with_origin(origin.trim_matches(['<', '>']))),
            Err(e) => log::warn!("{id}: {e}"),
        }
    }
    for (id, value) in properties {
        records
            .get_mut(&id)
            .expect("record created")
            .add_property("usage_domain", value);
    }
    records
        .into_values()
        .filter(|r| !r.literals.is_empty())
        .collect()
}
