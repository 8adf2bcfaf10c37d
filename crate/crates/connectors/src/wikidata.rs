//! Wikidata entity search, entity records and the person/article/category filters.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lodaudit_core::model::{Language, PropertyPath, ResourceRecord, ResourceRef, RetrievedLiteral};
use lodaudit_core::text::{capitalize_first, find_sequence, word_tokens};

use crate::http::{CachedClient, HttpRequest};
use crate::ConnectorError;

pub const MAX_RESULTS: usize = 10_000;
pub const ENTITY_BATCH: usize = 50;
pub const HUMAN: &str = "Q5";
pub const ARTICLE_PHRASES: [&str; 2] = ["scholarly article", "scientific article"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikidataEntityRecord {
    pub entity_id: String,
    pub labels: BTreeMap<Language, String>,
    pub aliases: BTreeMap<Language, Vec<String>>,
    pub descriptions: BTreeMap<Language, String>,
    /// P31 targets.
    pub instance_of: Vec<String>,
    /// P279 targets.
    pub subclass_of: Vec<String>,
    /// P2559 texts.
    #[serde(default)]
    pub usage_instructions: BTreeMap<Language, Vec<String>>,
    /// Higher is better; `n - position` in the search ranking.
    pub incoming_link_rank: u64,
}

pub fn is_entity_id(id: &str) -> bool {
    id.len() > 1
        && id.starts_with('Q')
        && id[1..].bytes().all(|b| b.is_ascii_digit())
        && !id[1..].starts_with('0')
}

pub fn entity_iri(id: &str) -> String {
    format!("http://www.wikidata.org/entity/{id}")
}

fn malformed(context: &str, message: impl Into<String>) -> ConnectorError {
    ConnectorError::Malformed {
        context: context.to_string(),
        message: message.into(),
    }
}

fn parse_json(context: &str, body: &str) -> Result<Value, ConnectorError> {
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(context, e.to_string()))?;
    if let Some(err) = v.get("error") {
        return Err(malformed(context, format!("API error: {err}")));
    }
    Ok(v)
}

/// Entity ids matching `term_form`, most incoming links first, at most `cap`.
pub fn search_ids(
    client: &CachedClient,
    api_base: &str,
    term_form: &str,
    cap: usize,
    page_size: usize,
) -> Result<Vec<String>, ConnectorError> {
    if cap > MAX_RESULTS {
        return Err(ConnectorError::InvalidArgument(format!(
            "cap {cap} exceeds {MAX_RESULTS}"
        )));
    }
    let page_size = page_size.clamp(1, 500);
    let mut ids: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut offset = 0usize;
    while ids.len() < cap {
        let limit = page_size.min(cap - ids.len()).to_string();
        let off = offset.to_string();
        let req = HttpRequest::get(
            api_base,
            &[
                ("action", "query"),
                ("list", "search"),
                ("srsearch", term_form),
                ("srnamespace", "0"),
                ("srsort", "incoming_links_desc"),
                ("srlimit", &limit),
                ("sroffset", &off),
                ("srprop", ""),
                ("format", "json"),
                ("formatversion", "2"),
            ],
        );
        let entry = client.fetch(&req)?;
        let v = parse_json(&req.url, &entry.body)?;
        let hits = v
            .pointer("/query/search")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(&req.url, "missing query.search"))?;
        for h in hits {
            let title = h
                .get("title")
                .and_then(Value::as_str)
                .ok_or_else(|| malformed(&req.url, "search hit without title"))?;
            if is_entity_id(title) && seen.insert(title.to_string()) && ids.len() < cap {
                ids.push(title.to_string());
            }
        }
        match v.pointer("/continue/sroffset").and_then(Value::as_u64) {
            Some(next) if !hits.is_empty() && (next as usize) < MAX_RESULTS => {
                offset = next as usize
            }
            _ => break,
        }
    }
    Ok(ids)
}

/// Raw entity JSON for each id, in request order; missing entities are skipped.
pub fn fetch_entities(
    client: &CachedClient,
    api_base: &str,
    ids: &[String],
    props: &str,
) -> Result<Vec<Value>, ConnectorError> {
    let mut out = Vec::with_capacity(ids.len());
    for batch in ids.chunks(ENTITY_BATCH) {
        let joined = batch.join("|");
        let req = HttpRequest::get(
            api_base,
            &[
                ("action", "wbgetentities"),
                ("ids", &joined),
                ("props", props),
                ("languages", "en|nl"),
                ("format", "json"),
            ],
        );
        let entry = client.fetch(&req)?;
        let v = parse_json(&req.url, &entry.body)?;
        let entities = v
            .get("entities")
            .and_then(Value::as_object)
            .ok_or_else(|| malformed(&req.url, "missing entities"))?;
        for id in batch {
            match entities.get(id) {
                Some(e) if e.get("missing").is_none() => out.push(e.clone()),
                _ => log::warn!("entity {id} missing from response"),
            }
        }
    }
    Ok(out)
}

fn lang_map(v: &Value, key: &str) -> BTreeMap<Language, String> {
    let mut out = BTreeMap::new();
    if let Some(obj) = v.get(key).and_then(Value::as_object) {
        for (tag, entry) in obj {
            if let (Ok(lang), Some(val)) = (
                tag.parse::<Language>(),
                entry.get("value").and_then(Value::as_str),
            ) {
                out.insert(lang, val.to_string());
            }
        }
    }
    out
}

fn item_claims(v: &Value, property: &str) -> Vec<String> {
    let mut out = Vec::new();
    for claim in v
        .pointer(&format!("/claims/{property}"))
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        if let Some(id) = claim
            .pointer("/mainsnak/datavalue/value/id")
            .and_then(Value::as_str)
        {
            if !out.iter().any(|x| x == id) {
                out.push(id.to_string());
            }
        }
    }
    out
}

fn text_claims(v: &Value, property: &str) -> BTreeMap<Language, Vec<String>> {
    let mut out: BTreeMap<Language, Vec<String>> = BTreeMap::new();
    for claim in v
        .pointer(&format!("/claims/{property}"))
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        let Some(val) = claim.pointer("/mainsnak/datavalue/value") else {
            continue;
        };
        let (Some(text), Some(lang)) = (
            val.get("text").and_then(Value::as_str),
            val.get("language").and_then(Value::as_str),
        ) else {
            continue;
        };
        if let Ok(l) = lang.parse::<Language>() {
            out.entry(l).or_default().push(text.to_string());
        }
    }
    out
}

/// Parses one `wbgetentities` entity object.
pub fn parse_entity(v: &Value, rank: u64) -> Result<WikidataEntityRecord, ConnectorError> {
    let id = v
        .get("id")
        .and_then(Value::as_str)
        .filter(|id| is_entity_id(id))
        .ok_or_else(|| {
            malformed(
                "wbgetentities",
                format!(
                    "entity without a Q id: {}",
                    v.get("id").unwrap_or(&Value::Null)
                ),
            )
        })?;
    let mut aliases: BTreeMap<Language, Vec<String>> = BTreeMap::new();
    if let Some(obj) = v.get("aliases").and_then(Value::as_object) {
        for (tag, list) in obj {
            let Ok(lang) = tag.parse::<Language>() else {
                continue;
            };
            let vals = list
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|a| a.get("value").and_then(Value::as_str))
                .map(str::to_string);
            aliases.entry(lang).or_default().extend(vals);
        }
    }
    Ok(WikidataEntityRecord {
        entity_id: id.to_string(),
        labels: lang_map(v, "labels"),
        aliases,
        descriptions: lang_map(v, "descriptions"),
        instance_of: item_claims(v, "P31"),
        subclass_of: item_claims(v, "P279"),
        usage_instructions: text_claims(v, "P2559"),
        incoming_link_rank: rank,
    })
}

/// Search plus entity retrieval; records come back in ranking order.
pub fn search_wikidata(
    client: &CachedClient,
    term_form: &str,
    api_base: &str,
    cap: usize,
    page_size: usize,
) -> Result<Vec<WikidataEntityRecord>, ConnectorError> {
    let ids = search_ids(client, api_base, term_form, cap, page_size)?;
    let n = ids.len() as u64;
    let entities = fetch_entities(client, api_base, &ids, "labels|aliases|descriptions|claims")?;
    let position: BTreeMap<&str, u64> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u64))
        .collect();
    entities
        .iter()
        .map(|e| {
            let id = e.get("id").and_then(Value::as_str).unwrap_or_default();
            let rank = n - position.get(id).copied().unwrap_or(n);
            parse_entity(e, rank)
        })
        .collect()
}

/// Labels and superclasses of class entities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassIndex {
    pub labels: BTreeMap<String, BTreeMap<Language, String>>,
    pub parents: BTreeMap<String, Vec<String>>,
}

impl ClassIndex {
    /// Fetches `ids` and their P279 ancestors up to `depth` levels.
    pub fn fetch(
        client: &CachedClient,
        api_base: &str,
        ids: impl IntoIterator<Item = String>,
        depth: usize,
    ) -> Result<Self, ConnectorError> {
        let mut index = ClassIndex::default();
        let mut frontier: BTreeSet<String> = ids.into_iter().filter(|i| is_entity_id(i)).collect();
        for _ in 0..=depth {
            let todo: Vec<String> = frontier
                .iter()
                .filter(|i| !index.labels.contains_key(*i))
                .cloned()
                .collect();
            if todo.is_empty() {
                break;
            }
            let mut next = BTreeSet::new();
            for e in fetch_entities(client, api_base, &todo, "labels|claims")? {
                let rec = parse_entity(&e, 0)?;
                next.extend(rec.subclass_of.iter().cloned());
                index.parents.insert(rec.entity_id.clone(), rec.subclass_of);
                index.labels.insert(rec.entity_id, rec.labels);
            }
            for id in &todo {
                index.labels.entry(id.clone()).or_default();
            }
            frontier = next;
        }
        Ok(index)
    }

    /// The record's P31/P279 targets and all their known ancestors.
    pub fn closure(&self, record: &WikidataEntityRecord) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<&String> = record
            .instance_of
            .iter()
            .chain(&record.subclass_of)
            .collect();
        while let Some(id) = queue.pop_front() {
            if out.insert(id.clone()) {
                queue.extend(self.parents.get(id).into_iter().flatten());
            }
        }
        out
    }

    pub fn label(&self, id: &str, language: Language) -> Option<&str> {
        self.labels.get(id)?.get(&language).map(String::as_str)
    }
}

/// The three removal rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WikidataFilter {
    pub excluded_categories: BTreeSet<String>,
    pub classes: ClassIndex,
    /// Languages whose descriptions are checked for article phrases.
    pub description_languages: Vec<Language>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterReason {
    ExcludedCategory,
    ArticleDescription,
    PersonName,
}

impl WikidataFilter {
    pub fn new(excluded_categories: BTreeSet<String>) -> Self {
        WikidataFilter {
            excluded_categories,
            classes: ClassIndex::default(),
            description_languages: vec![Language::En],
        }
    }

    pub fn reason(&self, record: &WikidataEntityRecord, term_form: &str) -> Option<FilterReason> {
        if !self
            .classes
            .closure(record)
            .is_disjoint(&self.excluded_categories)
        {
            return Some(FilterReason::ExcludedCategory);
        }
        let article = self.description_languages.iter().any(|l| {
            record.descriptions.get(l).is_some_and(|d| {
                let d = d.to_lowercase();
                ARTICLE_PHRASES.iter().any(|p| d.contains(p))
            })
        });
        if article {
            return Some(FilterReason::ArticleDescription);
        }
        if record.instance_of.iter().any(|c| c == HUMAN) && names_person(record, term_form) {
            return Some(FilterReason::PersonName);
        }
        None
    }

    /// Survivors, in input order.
    pub fn apply(
        &self,
        records: Vec<WikidataEntityRecord>,
        term_form: &str,
    ) -> Vec<WikidataEntityRecord> {
        records
            .into_iter()
            .filter(|r| self.reason(r, term_form).is_none())
            .collect()
    }
}

/// The capitalized term appears as whole words, case-sensitively, in a preferred label.
fn names_person(record: &WikidataEntityRecord, term_form: &str) -> bool {
    let needle: Vec<String> = word_tokens(&capitalize_first(term_form.trim()), false)
        .into_iter()
        .map(|t| t.text)
        .collect();
    record.labels.values().any(|label| {
        let hay: Vec<String> = word_tokens(label, false)
            .into_iter()
            .map(|t| t.text)
            .collect();
        find_sequence(&hay, &needle).is_some()
    })
}

/// Applies the filters with direct P31/P279 values only.
pub fn filter_wikidata(
    records: Vec<WikidataEntityRecord>,
    excluded_categories: &BTreeSet<String>,
    term_form: &str,
) -> Vec<WikidataEntityRecord> {
    WikidataFilter::new(excluded_categories.clone()).apply(records, term_form)
}

/// Literals and marker-relevant properties of an entity in one language.
pub fn to_resource_record(
    record: &WikidataEntityRecord,
    language: Language,
    classes: &ClassIndex,
    retrieved_at: DateTime<Utc>,
) -> Result<ResourceRecord, ConnectorError> {
    let resource = ResourceRef::new(
        lodaudit_core::Dataset::Wikidata,
        &record.entity_id,
        language,
    )?;
    let mut rec = ResourceRecord::new(resource.clone());
    let mut push = |path: PropertyPath, text: &str| {
        if let Ok(l) = RetrievedLiteral::new(resource.clone(), path, text, retrieved_at) {
            rec.literals.push(l);
        }
    };
    if let Some(l) = record.labels.get(&language) {
        push(PropertyPath::WikidataPrefLabel, l);
    }
    for a in record.aliases.get(&language).into_iter().flatten() {
        push(PropertyPath::WikidataAltLabel, a);
    }
    if let Some(d) = record.descriptions.get(&language) {
        push(PropertyPath::WikidataDescription, d);
    }
    for (prop, targets) in [("P31", &record.instance_of), ("P279", &record.subclass_of)] {
        for t in targets {
            rec.add_property(prop, t.clone());
            if let Some(label) = classes.label(t, language) {
                rec.add_linked_label(prop, label);
            }
        }
    }
    for text in record
        .usage_instructions
        .get(&language)
        .into_iter()
        .flatten()
    {
        rec.add_property("P2559", text.clone());
    }
    Ok(rec)
}
