//! Language subgraphs of the Getty AAT via paged CONSTRUCT queries, and literal
//! extraction from them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use oxrdf::{Subject, Term, Triple};
use oxttl::{NTriplesParser, TurtleParser};

use lodaudit_core::model::{
    Dataset, Language, PropertyPath, ResourceRecord, ResourceRef, RetrievedLiteral,
};
use lodaudit_core::rdf::{as_subject, local_name, vocab, Graph};

use crate::http::{write_atomic, CachedClient, HttpRequest};
use crate::ConnectorError;

const PREFIXES: &str = "PREFIX skos: <http://www.w3.org/2004/02/skos/core#>
PREFIX xl: <http://www.w3.org/2008/05/skos-xl#>
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>
PREFIX gvp: <http://vocab.getty.edu/ontology#>
";

/// One single-triple CONSTRUCT: `?s <predicate> ?o` where `pattern` holds.
struct PageQuery {
    name: &'static str,
    predicate: &'static str,
    pattern: String,
}

fn page_queries(language: Language) -> Vec<PageQuery> {
    let lang = language.as_str();
    let label_in = |rel: &str| {
        format!("?c xl:{rel} ?s . ?s xl:literalForm ?f . FILTER(langMatches(lang(?f), \"{lang}\"))")
    };
    let mut out = Vec::new();
    for rel in ["prefLabel", "altLabel"] {
        out.push(PageQuery {
            name: "label-link",
            predicate: if rel == "prefLabel" {
                "xl:prefLabel"
            } else {
                "xl:altLabel"
            },
            pattern: format!(
                "?s xl:{rel} ?o . ?o xl:literalForm ?f . FILTER(langMatches(lang(?f), \"{lang}\"))"
            ),
        });
        out.push(PageQuery {
            name: "literal-form",
            predicate: "xl:literalForm",
            pattern: format!("{} BIND(?f AS ?o)", label_in(rel)),
        });
        out.push(PageQuery {
            name: "label-comment",
            predicate: "rdfs:comment",
            pattern: format!(
                "{} ?s rdfs:comment ?o . FILTER(langMatches(lang(?o), \"{lang}\"))",
                label_in(rel)
            ),
        });
        for flag in ["gvp:termKind", "gvp:historicFlag"] {
            out.push(PageQuery {
                name: "label-flag",
                predicate: flag,
                pattern: format!("{} ?s {flag} ?o .", label_in(rel)),
            });
        }
    }
    out.push(PageQuery {
        name: "scope-note-link",
        predicate: "skos:scopeNote",
        pattern: format!(
            "?s skos:scopeNote ?o . ?o rdf:value ?v . FILTER(langMatches(lang(?v), \"{lang}\"))"
        ),
    });
    out.push(PageQuery {
        name: "scope-note-value",
        predicate: "rdf:value",
        pattern: format!(
            "?c skos:scopeNote ?s . ?s rdf:value ?o . FILTER(langMatches(lang(?o), \"{lang}\"))"
        ),
    });
    out
}

pub fn construct_query(predicate: &str, pattern: &str, limit: usize, offset: usize) -> String {
    format!(
        "{PREFIXES}CONSTRUCT {{ ?s {predicate} ?o }} WHERE {{ {{ SELECT DISTINCT ?s ?o WHERE {{ {pattern} }} ORDER BY ?s ?o LIMIT {limit} OFFSET {offset} }} }}"
    )
}

fn parse_triples(
    body: &str,
    content_type: Option<&str>,
    context: &str,
) -> Result<Vec<Triple>, ConnectorError> {
    let bad = |e: &dyn std::fmt::Display| ConnectorError::Malformed {
        context: context.to_string(),
        message: e.to_string(),
    };
    let turtle = content_type.is_some_and(|c| c.contains("turtle"));
    let mut out = Vec::new();
    if turtle {
        for t in TurtleParser::new().for_slice(body.as_bytes()) {
            out.push(t.map_err(|e| bad(&e))?);
        }
    } else {
        for t in NTriplesParser::new().for_slice(body.as_bytes()) {
            out.push(t.map_err(|e| bad(&e))?);
        }
    }
    Ok(out)
}

/// Harvests the label, comment, scope-note and label-flag triples of one
/// language into a sorted, duplicate-free N-Triples file. Returns the triple count.
pub fn build_aat_subgraph(
    client: &CachedClient,
    endpoint: &str,
    language: Language,
    out: &Path,
    page_size: usize,
) -> Result<usize, ConnectorError> {
    let page_size = page_size.max(1);
    let mut all: BTreeSet<String> = BTreeSet::new();
    for q in page_queries(language) {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut offset = 0;
        loop {
            let query = construct_query(q.predicate, &q.pattern, page_size, offset);
            let req = HttpRequest::get(endpoint, &[("query", &query)])
                .header("accept", "application/n-triples");
            let entry = client.fetch(&req)?;
            let triples = parse_triples(
                &entry.body,
                entry.content_type.as_deref(),
                &format!("{} page at {offset}", q.name),
            )?;
            let n = triples.len();
            for t in triples {
                let line = format!("{t} .");
                if !seen.insert(line.clone()) {
                    return Err(ConnectorError::PageInconsistency {
                        query: q.name.to_string(),
                        offset,
                        triple: line,
                    });
                }
            }
            if n < page_size {
                break;
            }
            offset += page_size;
        }
        all.extend(seen);
    }
    let mut body = String::new();
    for line in &all {
        body.push_str(line);
        body.push('\n');
    }
    write_atomic(out, body.as_bytes())?;
    Ok(all.len())
}

fn lang_ok(lit: &oxrdf::Literal, language: Language, context: &str) -> bool {
    match lit.language() {
        Some(tag) => Language::from_tag(tag).is_ok_and(|l| l == language),
        None => {
            log::warn!(
                "{context}: skipping literal without language tag: {:?}",
                lit.value()
            );
            false
        }
    }
}

/// One record per concept with literals on the five AAT paths in `language`.
/// Label-level `gvp:termKind` and `gvp:historicFlag` values become properties.
pub fn extract_records(
    graph: &Graph,
    language: Language,
    retrieved_at: DateTime<Utc>,
) -> Vec<ResourceRecord> {
    let mut records: BTreeMap<String, ResourceRecord> = BTreeMap::new();
    let mut concepts: Vec<&Subject> = Vec::new();
    for p in [
        vocab::XL_PREF_LABEL,
        vocab::XL_ALT_LABEL,
        vocab::SKOS_SCOPE_NOTE,
    ] {
        for s in graph.subjects_with(p) {
            if !concepts.contains(&s) {
                concepts.push(s);
            }
        }
    }
    for concept in concepts {
        let Subject::NamedNode(c) = concept else {
            continue;
        };
        let id = local_name(c.as_str()).to_string();
        let Ok(resource) = ResourceRef::new(Dataset::Aat, &id, language) else {
            continue;
        };
        let rec = records
            .entry(id)
            .or_insert_with(|| ResourceRecord::new(resource.clone()));
        let label_paths = [
            (
                vocab::XL_PREF_LABEL,
                PropertyPath::AatPrefLabelLiteralForm,
                PropertyPath::AatPrefLabelComment,
            ),
            (
                vocab::XL_ALT_LABEL,
                PropertyPath::AatAltLabelLiteralForm,
                PropertyPath::AatAltLabelComment,
            ),
        ];
        for (rel, form_path, comment_path) in label_paths {
            for label in graph.objects(concept, rel).filter_map(as_subject) {
                let origin = match &label {
                    Subject::NamedNode(n) => n.as_str().to_string(),
                    other => other.to_string(),
                };
                let mut in_language = false;
                for lit in graph.literals(&label, vocab::XL_LITERAL_FORM) {
                    if lang_ok(lit, language, &origin) {
                        in_language = true;
                        push(
                            rec,
                            &resource,
                            form_path,
                            lit.value(),
                            retrieved_at,
                            &origin,
                        );
                    }
                }
                if !in_language {
                    continue;
                }
                for lit in graph.literals(&label, vocab::RDFS_COMMENT) {
                    if lang_ok(lit, language, &origin) {
                        push(
                            rec,
                            &resource,
                            comment_path,
                            lit.value(),
                            retrieved_at,
                            &origin,
                        );
                    }
                }
                for (pred, name) in [
                    (vocab::GVP_TERM_KIND, "gvp:termKind"),
                    (vocab::GVP_HISTORIC_FLAG, "gvp:historicFlag"),
                ] {
                    for v in graph.objects(&label, pred) {
                        let value = match v {
                            Term::NamedNode(n) => local_name(n.as_str()).to_string(),
                            Term::Literal(l) => l.value().to_string(),
                            _ => continue,
                        };
                        rec.add_property(name, value);
                    }
                }
            }
        }
        for note in graph
            .objects(concept, vocab::SKOS_SCOPE_NOTE)
            .filter_map(as_subject)
        {
            let origin = note.to_string();
            for lit in graph.literals(&note, vocab::RDF_VALUE) {
                if lang_ok(lit, language, &origin) {
                    push(
                        rec,
                        &resource,
                        PropertyPath::AatScopeNoteValue,
                        lit.value(),
                        retrieved_at,
                        &origin,
                    );
                }
            }
        }
    }
    records
        .into_values()
        .filter(|r| !r.literals.is_empty())
        .collect()
}

fn push(
    rec: &mut ResourceRecord,
    resource: &ResourceRef,
    path: PropertyPath,
    text: &str,
    at: DateTime<Utc>,
    origin: &str,
) {
    match RetrievedLiteral::new(resource.clone(), path, text, at) {
        Ok(l) => rec
            .literals
            .push(l.with_origin(origin.trim_matches(['<', '>']))),
        Err(e) => log::warn!("{}: {e}", resource),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lodaudit_core::rdf::RdfFormat;

    const TTL: &str = r#"
@prefix xl: <http://www.w3.org/2008/05/skos-xl#> .
@prefix skos: <http://www.w3.org/2004/02/skos/core#> .
@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
@prefix gvp: <http://vocab.getty.edu/ontology#> .
@prefix aat: <http://vocab.getty.edu/aat/> .
@prefix term: <http://vocab.getty.edu/aat/term/> .
aat:300 xl:prefLabel term:1 ; xl:altLabel term:2 , term:3 , term:4 ; skos:scopeNote <http://vocab.getty.edu/aat/scopeNote/1> .
term:1 xl:literalForm "Pygmy (African culture or style)"@en ; gvp:termKind <http://vocab.getty.edu/term/kind/Pejorative> .
term:2 xl:literalForm "pygmies"@en ; rdfs:comment "plural"@en .
term:3 xl:literalForm "pygmeeën"@nl ; rdfs:comment "meervoud"@nl .
term:4 xl:literalForm "pigmy" .
<http://vocab.getty.edu/aat/scopeNote/1> rdf:value "Use of \"Pygmy\" for a culture is considered pejorative."@en .
"#;

    #[test]
    fn extracts_paths_and_flags() {
        let g = Graph::parse(TTL.as_bytes(), RdfFormat::Turtle, "t").unwrap();
        let at = DateTime::from_timestamp(0, 0).unwrap();
        let recs = extract_records(&g, Language::En, at);
        assert_eq!(recs.len(), 1);
        let paths: Vec<_> = recs[0]
            .literals
            .iter()
            .map(|l| l.property_path.path_id())
            .collect();
        assert_eq!(
            paths,
            [
                "prefLabel/literalForm",
                "altLabel/literalForm",
                "altLabel/comment",
                "scopeNote/value"
            ]
        );
        assert_eq!(recs[0].properties["gvp:termKind"], ["Pejorative"]);
        let nl = extract_records(&g, Language::Nl, at);
        assert_eq!(nl[0].literals.len(), 2);
        assert!(nl[0].properties.is_empty());
    }

    #[test]
    fn query_shape() {
        let q = construct_query("xl:literalForm", "?s xl:literalForm ?o .", 100, 200);
        assert!(q.contains("CONSTRUCT { ?s xl:literalForm ?o }"));
        assert!(q.ends_with("ORDER BY ?s ?o LIMIT 100 OFFSET 200 } }"));
        assert_eq!(page_queries(Language::En).len(), 12);
    }
}
