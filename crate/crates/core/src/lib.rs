//! Core of the contentious-term audit: lexicon, matching, disambiguation,
//! markers and annotation agreement.

pub mod evaluation;
pub mod lexicon;
pub mod markers;
pub mod matcher;
pub mod model;
pub mod rdf;
pub mod text;
pub mod wsd;

pub use lexicon::{load_lexicon, related_resources, ContentiousTerm, LexiconError, TermLexicon};
pub use model::{
    Dataset, Language, LiteralStore, PathKind, PropertyPath, ResourceRecord, ResourceRef,
    RetrievedLiteral,
};
