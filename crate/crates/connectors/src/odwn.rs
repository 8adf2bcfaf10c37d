//! Open Dutch WordNet literals from its XML lexical database.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use lodaudit_core::model::{
    Dataset, Language, PropertyPath, ResourceRecord, ResourceRef, RetrievedLiteral,
};

use crate::ConnectorError;

#[derive(Debug, Default)]
struct Entry {
    id: String,
    lemmas: Vec<String>,
    definitions: Vec<(String, String)>,
    examples: Vec<(String, String)>,
    synsets: Vec<String>,
    pragmatics: Vec<(String, String)>,
}

fn attrs(
    e: &BytesStart,
    reader: &Reader<&[u8]>,
) -> Result<BTreeMap<String, String>, ConnectorError> {
    let mut out = BTreeMap::new();
    for a in e.attributes() {
        let a = a.map_err(|err| xml_error(reader, err))?;
        let key = String::from_utf8_lossy(a.key.local_name().as_ref()).into_owned();
        let value = a
            .unescape_value()
            .map_err(|err| xml_error(reader, err))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn xml_error(reader: &Reader<&[u8]>, err: impl std::fmt::Display) -> ConnectorError {
    ConnectorError::Xml {
        position: reader.buffer_position(),
        message: err.to_string(),
    }
}

fn dutch(language: Option<&String>) -> bool {
    language.is_none_or(|l| Language::from_tag(l).is_ok_and(|l| l == Language::Nl))
}

/// One record per lexical entry. Synset glosses are attached to every entry
/// with a sense in the synset, with the synset id as origin, and the written
/// forms of the synset's member lemmas are kept under that id in `linked_labels`.
/// Pragmatics attributes become properties.
pub fn parse_odwn(
    xml: &str,
    retrieved_at: DateTime<Utc>,
) -> Result<Vec<ResourceRecord>, ConnectorError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut entries: Vec<Entry> = Vec::new();
    let mut glosses: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current: Option<Entry> = None;
    let mut sense_id = String::new();
    let mut synset: Option<String> = None;
    let mut in_pragmatics = 0usize;
    let mut in_sense_definition = false;
    let mut example_child: Option<String> = None;
    let mut stack: Vec<String> = Vec::new();

    loop {
        let event = reader.read_event().map_err(|e| xml_error(&reader, e))?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(e) = start {
            let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
            let a = attrs(&e, &reader)?;
            match name.as_str() {
                "LexicalEntry" => {
                    current = Some(Entry {
                        id: a.get("id").cloned().unwrap_or_default(),
                        ..Entry::default()
                    });
                }
                "Lemma" => {
                    if let (Some(entry), Some(w)) = (current.as_mut(), a.get("writtenForm")) {
                        entry.lemmas.push(w.clone());
                    }
                }
                "Sense" => {
                    sense_id = a.get("id").cloned().unwrap_or_default();
                    if let Some(entry) = current.as_mut() {
                        if let Some(s) = a.get("synset") {
                            entry.synsets.push(s.clone());
                        }
                        if let Some(d) = a.get("definition").filter(|d| !d.trim().is_empty()) {
                            entry.definitions.push((d.clone(), sense_id.clone()));
                        }
                    }
                }
                "Synset" => synset = a.get("id").cloned(),
                "Definition" if current.is_some() && stack.iter().any(|s| s == "Sense") => {
                    if let Some(g) = a.get("gloss").filter(|_| dutch(a.get("language"))) {
                        current
                            .as_mut()
                            .expect("entry")
                            .definitions
                            .push((g.clone(), sense_id.clone()));
                    } else if !empty {
                        in_sense_definition = true;
                    }
                }
                "Definition" => {
                    if let (Some(s), Some(g)) = (&synset, a.get("gloss")) {
                        if dutch(a.get("language")) && !g.trim().is_empty() {
                            glosses.entry(s.clone()).or_default().push(g.clone());
                        }
                    }
                }
                "Pragmatics" => in_pragmatics += 1,
                "textualForm" | "canonicalForm" if !empty => example_child = Some(name.clone()),
                _ => {}
            }
            if in_pragmatics > 0 && name != "Pragmatics" {
                if let Some(entry) = current.as_mut() {
                    for (k, v) in &a {
                        if k != "id" && !v.is_empty() {
                            entry.pragmatics.push((k.clone(), v.clone()));
                        }
                    }
                }
            }
            if !empty {
                stack.push(name);
            }
            continue;
        }
        match event {
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| xml_error(&reader, e))?
                    .into_owned();
                if text.trim().is_empty() {
                    continue;
                }
                if let Some(entry) = current.as_mut() {
                    if example_child.is_some() {
                        entry.examples.push((text, sense_id.clone()));
                    } else if in_sense_definition {
                        entry.definitions.push((text, sense_id.clone()));
                    }
                }
            }
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                stack.pop();
                match name.as_str() {
                    "LexicalEntry" => entries.extend(current.take()),
                    "Synset" => synset = None,
                    "Pragmatics" => in_pragmatics = in_pragmatics.saturating_sub(1),
                    "Definition" => in_sense_definition = false,
                    "textualForm" | "canonicalForm" => example_child = None,
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    let mut members: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &entries {
        for s in &e.synsets {
            members
                .entry(s)
                .or_default()
                .extend(e.lemmas.iter().map(String::as_str));
        }
    }

    let mut records: BTreeMap<String, ResourceRecord> = BTreeMap::new();
    for e in &entries {
        let Ok(resource) = ResourceRef::new(Dataset::Odwn, &e.id, Language::Nl) else {
            log::warn!("lexical entry without id skipped");
            continue;
        };
        let mut rec = ResourceRecord::new(resource.clone());
        let mut push = |path, text: &str, origin: &str| match RetrievedLiteral::new(
            resource.clone(),
            path,
            text,
            retrieved_at,
        ) {
            Ok(l) => rec.literals.push(if origin.is_empty() {
                l
            } else {
                l.with_origin(origin)
            }),
            Err(err) => log::warn!("{}: {err}", e.id),
        };
        for l in &e.lemmas {
            push(PropertyPath::OdwnLemmaWrittenForm, l, &e.id);
        }
        for (d, s) in &e.definitions {
            push(PropertyPath::OdwnSenseDefinition, d, s);
        }
        for (x, s) in &e.examples {
            push(PropertyPath::OdwnSenseExample, x, s);
        }
        for s in &e.synsets {
            for g in glosses.get(s).into_iter().flatten() {
                push(PropertyPath::OdwnSynsetDefinitionGloss, g, s);
            }
        }
        for s in &e.synsets {
            for m in members.get(s.as_str()).into_iter().flatten() {
                rec.add_linked_label(s.clone(), *m);
            }
        }
        for (k, v) in &e.pragmatics {
            rec.add_property(k.clone(), v.clone());
        }
        match records.get_mut(&e.id) {
            Some(existing) => existing.merge(rec),
            None => {
                records.insert(e.id.clone(), rec);
            }
        }
    }
    Ok(records
        .into_values()
        .filter(|r| !r.literals.is_empty())
        .collect())
}

pub fn load_odwn(
    path: &std::path::Path,
    retrieved_at: DateTime<Utc>,
) -> Result<Vec<ResourceRecord>, ConnectorError> {
    let xml = std::fs::read_to_string(path).map_err(|e| ConnectorError::io(path, e))?;
    parse_odwn(&xml, retrieved_at)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENTRY: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<LexicalResource><Lexicon languageCoding="ISO 639-3" language="nld">
<LexicalEntry id="neger-n-1">
  <Lemma writtenForm="neger" partOfSpeech="noun"/>
  <Sense id="neger-n-1_s1" synset="odwn-10-101-n" definition="persoon met een donkere huidskleur">
    <Pragmatics><Pragmatic connotation="pejorative" chronology="oldfashioned"/></Pragmatics>
    <SenseExamples><SenseExample id="e1"><textualForm>die neger daar</textualForm></SenseExample></SenseExamples>
  </Sense>
  <Sense id="neger-n-1_s2" definition="zwaar werkend persoon"/>
</LexicalEntry>
</Lexicon></LexicalResource>"#;

    #[test]
    fn one_entry_four_literals() {
        let recs = parse_odwn(ENTRY, DateTime::from_timestamp(0, 0).unwrap()).unwrap();
        assert_eq!(recs.len(), 1);
        let got: Vec<_> = recs[0]
            .literals
            .iter()
            .map(|l| (l.property_path.path_id(), l.text.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                ("lemmaWrittenForm", "neger"),
                ("senseDefinition", "persoon met een donkere huidskleur"),
                ("senseDefinition", "zwaar werkend persoon"),
                ("senseExample", "die neger daar"),
            ]
        );
        assert_eq!(recs[0].properties["connotation"], ["pejorative"]);
        assert_eq!(recs[0].properties["chronology"], ["oldfashioned"]);
    }

    #[test]
    fn glosses_examples_and_members() {
        let xml = r#"<LexicalResource><Lexicon>
<LexicalEntry id="a-n-1"><Lemma writtenForm="allochtoon"/>
  <Sense id="s1" synset="syn-1"><SenseExamples><SenseExample>
    <textualForm>hij is allochtoon</textualForm><canonicalForm>allochtoon zijn</canonicalForm>
  </SenseExample></SenseExamples></Sense></LexicalEntry>
<LexicalEntry id="b-n-1"><Lemma writtenForm="migrant"/><Sense id="s2" synset="syn-1"/></LexicalEntry>
<Synset id="syn-1"><Definitions>
  <Definition gloss="iemand van buitenlandse afkomst" language="nl"/>
  <Definition gloss="person of foreign descent" language="en"/>
</Definitions></Synset>
</Lexicon></LexicalResource>"#;
        let recs = parse_odwn(xml, DateTime::from_timestamp(0, 0).unwrap()).unwrap();
        let a = &recs[0];
        let paths: Vec<_> = a
            .literals
            .iter()
            .map(|l| l.property_path.path_id())
            .collect();
        assert_eq!(
            paths,
            [
                "lemmaWrittenForm",
                "senseExample",
                "senseExample",
                "synsetDefinitionGloss"
            ]
        );
        assert_eq!(a.literals[3].origin.as_deref(), Some("syn-1"));
        assert_eq!(a.linked_labels["syn-1"], ["allochtoon", "migrant"]);
        assert_eq!(recs[1].literals.len(), 2);
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err =
            parse_odwn("<LexicalEntry id=\"x\"><Lemma></LexicalEntry>", Utc::now()).unwrap_err();
        assert!(matches!(err, ConnectorError::Xml { .. }), "{err}");
    }
}
