//! Minimal in-memory triple index over Turtle / N-Triples input.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use oxrdf::{Literal, NamedNode, Subject, Term, Triple};
use oxttl::{NTriplesParser, TurtleParser};
use thiserror::Error;

pub mod vocab {
    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDF_VALUE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#value";
    pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
    pub const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
    pub const SKOS_PREF_LABEL: &str = "http://www.w3.org/2004/02/skos/core#prefLabel";
    pub const SKOS_ALT_LABEL: &str = "http://www.w3.org/2004/02/skos/core#altLabel";
    pub const SKOS_SCOPE_NOTE: &str = "http://www.w3.org/2004/02/skos/core#scopeNote";
    pub const SKOS_RELATED: &str = "http://www.w3.org/2004/02/skos/core#related";
    pub const SKOS_RELATED_MATCH: &str = "http://www.w3.org/2004/02/skos/core#relatedMatch";
    pub const SKOS_IN_SCHEME: &str = "http://www.w3.org/2004/02/skos/core#inScheme";
    pub const XL_LABEL: &str = "http://www.w3.org/2008/05/skos-xl#Label";
    pub const XL_LITERAL_FORM: &str = "http://www.w3.org/2008/05/skos-xl#literalForm";
    pub const XL_PREF_LABEL: &str = "http://www.w3.org/2008/05/skos-xl#prefLabel";
    pub const XL_ALT_LABEL: &str = "http://www.w3.org/2008/05/skos-xl#altLabel";
    pub const XL_HIDDEN_LABEL: &str = "http://www.w3.org/2008/05/skos-xl#hiddenLabel";
    pub const GVP_TERM_KIND: &str = "http://vocab.getty.edu/ontology#termKind";
    pub const GVP_HISTORIC_FLAG: &str = "http://vocab.getty.edu/ontology#historicFlag";
    pub const ONTOLEX_CANONICAL_FORM: &str = "http://www.w3.org/ns/lemon/ontolex#canonicalForm";
    pub const ONTOLEX_WRITTEN_REP: &str = "http://www.w3.org/ns/lemon/ontolex#writtenRep";
    pub const ONTOLEX_SENSE: &str = "http://www.w3.org/ns/lemon/ontolex#sense";
    pub const ONTOLEX_REFERENCE: &str = "http://www.w3.org/ns/lemon/ontolex#reference";
    pub const ONTOLEX_IS_LEXICALIZED_SENSE_OF: &str =
        "http://www.w3.org/ns/lemon/ontolex#isLexicalizedSenseOf";
    pub const ONTOLEX_EVOKES: &str = "http://www.w3.org/ns/lemon/ontolex#evokes";
    pub const WN_NS: &str = "https://globalwordnet.github.io/schemas/wn#";
    pub const WN_DEFINITION: &str = "https://globalwordnet.github.io/schemas/wn#definition";
}

#[derive(Debug, Error)]
pub enum RdfError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("RDF syntax error in {path}: {message}")]
    Syntax { path: String, message: String },
}

/// Serialization accepted by [`Graph::parse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdfFormat {
    Turtle,
    NTriples,
}

impl RdfFormat {
    /// Guesses from the file extension; anything other than `.nt` is read as Turtle,
    /// which is a superset of N-Triples.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("nt") => RdfFormat::NTriples,
            _ => RdfFormat::Turtle,
        }
    }
}

/// Triples plus a subject index. Triple order is parse order.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    triples: Vec<Triple>,
    by_subject: HashMap<Subject, Vec<usize>>,
}

impl Graph {
    pub fn load(path: &Path) -> Result<Self, RdfError> {
        let file = File::open(path).map_err(|source| RdfError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(
            BufReader::new(file),
            RdfFormat::from_path(path),
            &path.display().to_string(),
        )
    }

    /// `origin` only appears in error messages.
    pub fn parse<R: Read>(reader: R, format: RdfFormat, origin: &str) -> Result<Self, RdfError> {
        let mut graph = Graph::default();
        let syntax = |e: &dyn std::fmt::Display| RdfError::Syntax {
            path: origin.to_string(),
            message: e.to_string(),
        };
        match format {
            RdfFormat::Turtle => {
                for triple in TurtleParser::new().for_reader(reader) {
                    graph.insert(triple.map_err(|e| syntax(&e))?);
                }
            }
            RdfFormat::NTriples => {
                for triple in NTriplesParser::new().for_reader(reader) {
                    graph.insert(triple.map_err(|e| syntax(&e))?);
                }
            }
        }
        Ok(graph)
    }

    pub fn insert(&mut self, triple: Triple) {
        let idx = self.triples.len();
        self.by_subject
            .entry(triple.subject.clone())
            .or_default()
            .push(idx);
        self.triples.push(triple);
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn objects<'a>(
        &'a self,
        subject: &Subject,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a Term> + 'a {
        self.by_subject
            .get(subject)
            .map(|v| v.as_slice())
            .unwrap_or_default()
            .iter()
            .map(move |&i| &self.triples[i])
            .filter(move |t| t.predicate.as_str() == predicate)
            .map(|t| &t.object)
    }

    pub fn predicates_of<'a>(&'a self, subject: &Subject) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_subject
            .get(subject)
            .map(|v| v.as_slice())
            .unwrap_or_default()
            .iter()
            .map(move |&i| &self.triples[i])
    }

    /// Subjects having `predicate`, in first-seen order and without repeats.
    pub fn subjects_with(&self, predicate: &str) -> Vec<&Subject> {
        let mut seen = std::collections::HashSet::new();
        self.triples
            .iter()
            .filter(|t| t.predicate.as_str() == predicate)
            .map(|t| &t.subject)
            .filter(|s| seen.insert(*s))
            .collect()
    }

    pub fn subjects_for<'a>(
        &'a self,
        predicate: &'a str,
        object: &'a Term,
    ) -> impl Iterator<Item = &'a Subject> + 'a {
        self.triples
            .iter()
            .filter(move |t| t.predicate.as_str() == predicate && &t.object == object)
            .map(|t| &t.subject)
    }

    pub fn literals<'a>(
        &'a self,
        subject: &Subject,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a Literal> + 'a {
        self.objects(subject, predicate).filter_map(|o| match o {
            Term::Literal(l) => Some(l),
            _ => None,
        })
    }
}

/// Converts an object term into a subject so it can be followed.
pub fn as_subject(term: &Term) -> Option<Subject> {
    match term {
        Term::NamedNode(n) => Some(Subject::NamedNode(n.clone())),
        Term::BlankNode(b) => Some(Subject::BlankNode(b.clone())),
        _ => None,
    }
}

pub fn named(iri: &str) -> Subject {
    Subject::NamedNode(NamedNode::new_unchecked(iri))
}

/// Last path or fragment segment of an IRI.
pub fn local_name(iri: &str) -> &str {
    let trimmed = iri.trim_end_matches('/');
    trimmed
        .rfind(['/', '#'])
        .map(|i| &trimmed[i + 1..])
        .unwrap_or(trimmed)
}
