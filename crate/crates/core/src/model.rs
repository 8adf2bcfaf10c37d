//! Shared domain types: languages, datasets, property paths, literals and the literal store.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown language tag {0:?} (expected en or nl)")]
    UnknownLanguage(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("unknown property path {path:?} for dataset {dataset}")]
    UnknownPath { dataset: Dataset, path: String },
    #[error("empty resource identifier")]
    EmptyResourceId,
    #[error("dataset {dataset} has no {language} literals")]
    UnsupportedLanguage {
        dataset: Dataset,
        language: Language,
    },
    #[error("literal text is empty")]
    EmptyLiteral,
    #[error("property path {path} belongs to {expected}, resource is in {actual}")]
    PathDatasetMismatch {
        path: PropertyPath,
        expected: Dataset,
        actual: Dataset,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Nl,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::En, Language::Nl];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Nl => "nl",
        }
    }

    /// Accepts BCP-47 style tags and the three-letter codes used by WordNet dumps
    /// (`en-GB`, `eng`, `nld`).
    pub fn from_tag(tag: &str) -> Result<Self, ModelError> {
        let primary = tag
            .split(['-', '_'])
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        match primary.as_str() {
            "en" | "eng" => Ok(Language::En),
            "nl" | "nld" | "dut" => Ok(Language::Nl),
            _ => Err(ModelError::UnknownLanguage(tag.to_string())),
        }
    }
}

impl FromStr for Language {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "nl" => Ok(Language::Nl),
            other => Err(ModelError::UnknownLanguage(other.to_string())),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four audited dataset kinds, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Wikidata,
    Aat,
    Pwn,
    Odwn,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Wikidata, Dataset::Aat, Dataset::Pwn, Dataset::Odwn];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Wikidata => "wikidata",
            Dataset::Aat => "aat",
            Dataset::Pwn => "pwn",
            Dataset::Odwn => "odwn",
        }
    }

    pub fn supports(self, language: Language) -> bool {
        !matches!(
            (self, language),
            (Dataset::Pwn, Language::Nl) | (Dataset::Odwn, Language::En)
        )
    }
}

impl FromStr for Dataset {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| ModelError::UnknownDataset(s.to_string()))
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a property gives a resource its name or describes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Label,
    Descriptive,
}

/// The closed set of literal-bearing property paths, one per audited property.
/// Path identifiers are unique across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropertyPath {
    WikidataPrefLabel,
    WikidataAltLabel,
    WikidataDescription,
    AatPrefLabelLiteralForm,
    AatPrefLabelComment,
    AatAltLabelLiteralForm,
    AatAltLabelComment,
    AatScopeNoteValue,
    PwnWrittenRep,
    PwnDefinition,
    PwnExample,
    OdwnLemmaWrittenForm,
    OdwnSenseDefinition,
    OdwnSenseExample,
    OdwnSynsetDefinitionGloss,
}

impl PropertyPath {
    pub const ALL: [PropertyPath; 15] = [
        PropertyPath::WikidataPrefLabel,
        PropertyPath::WikidataAltLabel,
        PropertyPath::WikidataDescription,
        PropertyPath::AatPrefLabelLiteralForm,
        PropertyPath::AatPrefLabelComment,
        PropertyPath::AatAltLabelLiteralForm,
        PropertyPath::AatAltLabelComment,
        PropertyPath::AatScopeNoteValue,
        PropertyPath::PwnWrittenRep,
        PropertyPath::PwnDefinition,
        PropertyPath::PwnExample,
        PropertyPath::OdwnLemmaWrittenForm,
        PropertyPath::OdwnSenseDefinition,
        PropertyPath::OdwnSenseExample,
        PropertyPath::OdwnSynsetDefinitionGloss,
    ];

    pub fn dataset(self) -> Dataset {
        use PropertyPath::*;
        match self {
            WikidataPrefLabel | WikidataAltLabel | WikidataDescription => Dataset::Wikidata,
            AatPrefLabelLiteralForm
            | AatPrefLabelComment
            | AatAltLabelLiteralForm
            | AatAltLabelComment
            | AatScopeNoteValue => Dataset::Aat,
            PwnWrittenRep | PwnDefinition | PwnExample => Dataset::Pwn,
            OdwnLemmaWrittenForm
            | OdwnSenseDefinition
            | OdwnSenseExample
            | OdwnSynsetDefinitionGloss => Dataset::Odwn,
        }
    }

    pub fn path_id(self) -> &'static str {
        use PropertyPath::*;
        match self {
            WikidataPrefLabel => "prefLabel",
            WikidataAltLabel => "altLabel",
            WikidataDescription => "description",
            AatPrefLabelLiteralForm => "prefLabel/literalForm",
            AatPrefLabelComment => "prefLabel/comment",
            AatAltLabelLiteralForm => "altLabel/literalForm",
            AatAltLabelComment => "altLabel/comment",
            AatScopeNoteValue => "scopeNote/value",
            PwnWrittenRep => "writtenRep",
            PwnDefinition => "definition",
            PwnExample => "example",
            OdwnLemmaWrittenForm => "lemmaWrittenForm",
            OdwnSenseDefinition => "senseDefinition",
            OdwnSenseExample => "senseExample",
            OdwnSynsetDefinitionGloss => "synsetDefinitionGloss",
        }
    }

    /// Human-facing property name as used in the source vocabulary.
    pub fn source_property(self) -> &'static str {
        use PropertyPath::*;
        match self {
            WikidataPrefLabel => "skos:prefLabel",
            WikidataAltLabel => "skos:altLabel",
            WikidataDescription => "schema:description",
            AatPrefLabelLiteralForm => "xl:prefLabel\\xl:literalForm",
            AatPrefLabelComment => "xl:prefLabel\\rdfs:comment",
            AatAltLabelLiteralForm => "xl:altLabel\\xl:literalForm",
            AatAltLabelComment => "xl:altLabel\\rdfs:comment",
            AatScopeNoteValue => "skos:scopeNote\\rdf:value",
            PwnWrittenRep => "ontolex:writtenRep",
            PwnDefinition => "wn:definition (Definition)",
            PwnExample => "wn:definition (Examples)",
            OdwnLemmaWrittenForm => "Lemma writtenForm",
            OdwnSenseDefinition => "Sense definition",
            OdwnSenseExample => "SenseExamples",
            OdwnSynsetDefinitionGloss => "Synset Definition gloss",
        }
    }

    pub fn kind(self) -> PathKind {
        use PropertyPath::*;
        match self {
            WikidataPrefLabel
            | WikidataAltLabel
            | AatPrefLabelLiteralForm
            | AatAltLabelLiteralForm
            | PwnWrittenRep
            | OdwnLemmaWrittenForm => PathKind::Label,
            _ => PathKind::Descriptive,
        }
    }

    /// The path carrying a resource's main name (preferred label or lemma).
    pub fn is_primary_label(self) -> bool {
        matches!(
            self,
            PropertyPath::WikidataPrefLabel
                | PropertyPath::AatPrefLabelLiteralForm
                | PropertyPath::PwnWrittenRep
                | PropertyPath::OdwnLemmaWrittenForm
        )
    }

    pub fn for_dataset(dataset: Dataset) -> impl Iterator<Item = PropertyPath> {
        Self::ALL
            .into_iter()
            .filter(move |p| p.dataset() == dataset)
    }

    pub fn from_id(path_id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.path_id() == path_id)
    }

    pub fn parse(dataset: Dataset, path_id: &str) -> Result<Self, ModelError> {
        Self::from_id(path_id)
            .filter(|p| p.dataset() == dataset)
            .ok_or_else(|| ModelError::UnknownPath {
                dataset,
                path: path_id.to_string(),
            })
    }
}

impl fmt::Display for PropertyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.path_id())
    }
}

impl Serialize for PropertyPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.path_id())
    }
}

impl<'de> Deserialize<'de> for PropertyPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let id = String::deserialize(d)?;
        PropertyPath::from_id(&id)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown property path {id:?}")))
    }
}

/// A resource in one dataset, seen through one language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawResourceRef")]
pub struct ResourceRef {
    pub dataset: Dataset,
    pub resource_id: String,
    pub language: Language,
}

#[derive(Deserialize)]
struct RawResourceRef {
    dataset: Dataset,
    resource_id: String,
    language: Language,
}

impl TryFrom<RawResourceRef> for ResourceRef {
    type Error = ModelError;
    fn try_from(raw: RawResourceRef) -> Result<Self, Self::Error> {
        ResourceRef::new(raw.dataset, raw.resource_id, raw.language)
    }
}

impl ResourceRef {
    pub fn new(
        dataset: Dataset,
        resource_id: impl Into<String>,
        language: Language,
    ) -> Result<Self, ModelError> {
        let resource_id = resource_id.into();
        if resource_id.trim().is_empty() {
            return Err(ModelError::EmptyResourceId);
        }
        if !dataset.supports(language) {
            return Err(ModelError::UnsupportedLanguage { dataset, language });
        }
        Ok(ResourceRef {
            dataset,
            resource_id,
            language,
        })
    }
}

impl fmt::Display for ResourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.dataset, self.resource_id, self.language)
    }
}

/// One literal value of one property of one resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedLiteral {
    pub resource: ResourceRef,
    pub property_path: PropertyPath,
    pub text: String,
    pub retrieved_at: DateTime<Utc>,
    /// Node inside the resource the value hangs off (label IRI, synset id), when relevant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl RetrievedLiteral {
    pub fn new(
        resource: ResourceRef,
        property_path: PropertyPath,
        text: impl Into<String>,
        retrieved_at: DateTime<Utc>,
    ) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyLiteral);
        }
        if property_path.dataset() != resource.dataset {
            return Err(ModelError::PathDatasetMismatch {
                path: property_path,
                expected: property_path.dataset(),
                actual: resource.dataset,
            });
        }
        Ok(RetrievedLiteral {
            resource,
            property_path,
            text,
            retrieved_at,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }
}

/// Everything harvested for one resource: its literals plus the non-literal
/// statements needed for explicit markers and background rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub resource: ResourceRef,
    pub literals: Vec<RetrievedLiteral>,
    /// Property identifier (`P31`, `gvp:termKind`, `usage_domain`, ...) to observed values.
    #[serde(default)]
    pub properties: BTreeMap<String, Vec<String>>,
    /// Labels of linked nodes, keyed by property identifier (`P31`) or node id (an ODWN synset).
    #[serde(default)]
    pub linked_labels: BTreeMap<String, Vec<String>>,
}

impl ResourceRecord {
    pub fn new(resource: ResourceRef) -> Self {
        ResourceRecord {
            resource,
            literals: Vec::new(),
            properties: BTreeMap::new(),
            linked_labels: BTreeMap::new(),
        }
    }

    pub fn add_property(&mut self, property: impl Into<String>, value: impl Into<String>) {
        let values = self.properties.entry(property.into()).or_default();
        let value = value.into();
        if !values.contains(&value) {
            values.push(value);
        }
    }

    pub fn add_linked_label(&mut self, key: impl Into<String>, label: impl Into<String>) {
        let labels = self.linked_labels.entry(key.into()).or_default();
        let label = label.into();
        if !labels.contains(&label) {
            labels.push(label);
        }
    }

    /// Merges another record for the same resource; literal duplicates are kept out.
    pub fn merge(&mut self, other: ResourceRecord) {
        for lit in other.literals {
            if !self.literals.iter().any(|l| {
                l.property_path == lit.property_path && l.text == lit.text && l.origin == lit.origin
            }) {
                self.literals.push(lit);
            }
        }
        for (p, vals) in other.properties {
            for v in vals {
                self.add_property(p.clone(), v);
            }
        }
        for (k, vals) in other.linked_labels {
            for v in vals {
                self.add_linked_label(k.clone(), v);
            }
        }
    }
}

/// Harvested records keyed by resource, iterated in resource order.
/// Serializes as a list of records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<ResourceRecord>", into = "Vec<ResourceRecord>")]
pub struct LiteralStore {
    records: BTreeMap<ResourceRef, ResourceRecord>,
}

impl From<Vec<ResourceRecord>> for LiteralStore {
    fn from(records: Vec<ResourceRecord>) -> Self {
        records.into_iter().collect()
    }
}

impl From<LiteralStore> for Vec<ResourceRecord> {
    fn from(store: LiteralStore) -> Self {
        store.records.into_values().collect()
    }
}

impl LiteralStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: ResourceRecord) {
        match self.records.get_mut(&record.resource) {
            Some(existing) => existing.merge(record),
            None => {
                self.records.insert(record.resource.clone(), record);
            }
        }
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = ResourceRecord>) {
        for r in records {
            self.insert(r);
        }
    }

    pub fn get(&self, resource: &ResourceRef) -> Option<&ResourceRecord> {
        self.records.get(resource)
    }

    pub fn contains(&self, resource: &ResourceRef) -> bool {
        self.records.contains_key(resource)
    }

    pub fn records(&self) -> impl Iterator<Item = &ResourceRecord> {
        self.records.values()
    }

    pub fn literals(&self) -> impl Iterator<Item = &RetrievedLiteral> {
        self.records.values().flat_map(|r| r.literals.iter())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Restricts the store to the given resources.
    pub fn subset<'a>(&self, keep: impl IntoIterator<Item = &'a ResourceRef>) -> LiteralStore {
        let mut out = LiteralStore::new();
        for r in keep {
            if let Some(rec) = self.records.get(r) {
                out.records.insert(r.clone(), rec.clone());
            }
        }
        out
    }
}

impl FromIterator<ResourceRecord> for LiteralStore {
    fn from_iter<T: IntoIterator<Item = ResourceRecord>>(iter: T) -> Self {
        let mut store = LiteralStore::new();
        store.extend(iter);
        store
    }
}
