use std::collections::BTreeSet;

use chrono::DateTime;
use lodaudit_core::markers::{
    default_lexemes, default_rules, find_suggestions, label_coverage_report, parse_lexemes,
    parse_rules, scan_explicit, scan_implicit, unmarked_selector_values, write_markers_csv,
    Category, ImplicitScope, MarkerKind, MarkerLexeme,
};
use lodaudit_core::wsd::WsdScore;
use lodaudit_core::{
    ContentiousTerm, Dataset, Language, LiteralStore, PropertyPath, ResourceRecord, ResourceRef,
    RetrievedLiteral, TermLexicon,
};
use proptest::prelude::*;

fn record(dataset: Dataset, id: &str, lang: Language) -> ResourceRecord {
    ResourceRecord::new(ResourceRef::new(dataset, id, lang).unwrap())
}

fn with_prop(dataset: Dataset, id: &str, prop: &str, value: &str) -> ResourceRecord {
    let lang = if dataset == Dataset::Odwn {
        Language::Nl
    } else {
        Language::En
    };
    let mut r = record(dataset, id, lang);
    r.add_property(prop, value);
    r
}

fn with_text(
    dataset: Dataset,
    id: &str,
    lang: Language,
    path: PropertyPath,
    text: &str,
) -> ResourceRecord {
    let mut r = record(dataset, id, lang);
    r.literals.push(lit(&r.resource, path, text));
    r
}

fn lit(r: &ResourceRef, path: PropertyPath, text: &str) -> RetrievedLiteral {
    RetrievedLiteral::new(
        r.clone(),
        path,
        text,
        DateTime::from_timestamp(0, 0).unwrap(),
    )
    .unwrap()
}

#[test]
fn catalog_rules_fire_once_with_their_category() {
    let rules = default_rules();
    let cases = [
        (
            with_prop(Dataset::Wikidata, "Q1135775", "P31", "Q545779"),
            1,
        ),
        (
            with_prop(Dataset::Wikidata, "Q191923", "P31", "Q2042898"),
            2,
        ),
        (
            with_prop(Dataset::Aat, "300000001", "gvp:termKind", "Pejorative"),
            1,
        ),
        (
            with_prop(Dataset::Pwn, "10183757-n", "usage_domain", "disparagement"),
            1,
        ),
        (
            with_prop(Dataset::Odwn, "r_n-1", "connotation", "pejorative"),
            1,
        ),
    ];
    for (rec, cat) in &cases {
        let m = scan_explicit([rec], &rules);
        assert_eq!(m.len(), 1, "{:?}", rec.resource);
        assert_eq!(m[0].category.number(), *cat);
        assert_eq!(m[0].kind, MarkerKind::Explicit);
        assert_eq!(&m[0].resource, &rec.resource);
        assert_eq!(
            rec.properties[&m[0].evidence_property],
            [m[0].evidence_text.clone()]
        );
    }
}

#[test]
fn unrelated_term_kinds_yield_no_marker() {
    let rules = default_rules();
    let recs = [
        with_prop(Dataset::Aat, "1", "gvp:termKind", "Misspelling"),
        with_prop(Dataset::Aat, "2", "gvp:termKind", "Abbreviation"),
        with_prop(Dataset::Wikidata, "Q5", "P31", "Q5"),
        with_prop(Dataset::Pwn, "x", "usage_domain", "botany"),
        // a Wikidata-only selector on another dataset
        with_prop(Dataset::Aat, "3", "P31", "Q545779"),
        record(Dataset::Wikidata, "Q1", Language::En),
    ];
    assert!(scan_explicit(&recs, &rules).is_empty());
    let audit = unmarked_selector_values(&recs, &rules);
    let values: BTreeSet<&str> = audit.iter().map(|(_, _, v)| v.as_str()).collect();
    assert_eq!(
        values,
        BTreeSet::from(["Abbreviation", "Misspelling", "Q5", "botany"])
    );
}

#[test]
fn wildcard_rules_accept_any_value() {
    let rules = default_rules();
    let m = scan_explicit(
        [&with_prop(Dataset::Aat, "1", "gvp:historicFlag", "former")],
        &rules,
    );
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].category, Category::HISTORICAL_USAGE);
    assert_eq!(m[0].evidence_text, "former");
}

#[test]
fn offensive_definition_is_an_implicit_marker() {
    let lexemes = default_lexemes();
    let rec = with_text(
        Dataset::Pwn,
        "1",
        Language::En,
        PropertyPath::PwnDefinition,
        "offensive term for a homosexual man",
    );
    let m = scan_implicit([&rec], &lexemes, ImplicitScope::Descriptive);
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].category, Category::OFFENSIVENESS);
    assert_eq!(m[0].kind, MarkerKind::Implicit);
    assert_eq!(m[0].evidence_text, "offensive");
    assert_eq!(
        m[0].evidence_property,
        PropertyPath::PwnDefinition.path_id()
    );

    let neutral = with_text(
        Dataset::Pwn,
        "2",
        Language::En,
        PropertyPath::PwnDefinition,
        "a man who is sexually attracted to other men",
    );
    assert!(scan_implicit([&neutral], &lexemes, ImplicitScope::Descriptive).is_empty());
}

#[test]
fn scope_note_suggestion_is_category_six() {
    let rec = with_text(
        Dataset::Aat,
        "300017",
        Language::En,
        PropertyPath::AatScopeNoteValue,
        "Term is now considered outdated. Use descriptors such as the name of the people instead.",
    );
    let m = scan_implicit([&rec], &default_lexemes(), ImplicitScope::Descriptive);
    assert!(m.iter().any(|m| m.category == Category::USAGE_SUGGESTIONS
        && m.evidence_text == "use descriptors such as"));
}

#[test]
fn implicit_matching_is_whole_phrase_and_case_insensitive() {
    let lexemes = default_lexemes();
    let hit = with_text(
        Dataset::Wikidata,
        "Q1",
        Language::En,
        PropertyPath::WikidataDescription,
        "OFFENSIVE slang term",
    );
    let cats: BTreeSet<u8> = scan_implicit([&hit], &lexemes, ImplicitScope::Descriptive)
        .iter()
        .map(|m| m.category.number())
        .collect();
    assert_eq!(cats, BTreeSet::from([1, 3]));
    let part = with_text(
        Dataset::Wikidata,
        "Q2",
        Language::En,
        PropertyPath::WikidataDescription,
        "inoffensive slangy",
    );
    assert!(scan_implicit([&part], &lexemes, ImplicitScope::Descriptive).is_empty());
    let label = with_text(
        Dataset::Wikidata,
        "Q3",
        Language::En,
        PropertyPath::WikidataAltLabel,
        "offensive",
    );
    assert!(scan_implicit([&label], &lexemes, ImplicitScope::Descriptive).is_empty());
    assert_eq!(
        scan_implicit([&label], &lexemes, ImplicitScope::AllPaths).len(),
        1
    );
    // Dutch lexemes do not fire on English literals
    let nl = with_text(
        Dataset::Wikidata,
        "Q4",
        Language::En,
        PropertyPath::WikidataDescription,
        "scheldwoord",
    );
    assert!(scan_implicit([&nl], &lexemes, ImplicitScope::Descriptive).is_empty());
}

#[test]
fn one_marker_per_literal_and_lexeme() {
    let mut rec = with_text(
        Dataset::Pwn,
        "1",
        Language::En,
        PropertyPath::PwnDefinition,
        "offensive, offensive",
    );
    rec.literals.push(lit(
        &rec.resource.clone(),
        PropertyPath::PwnExample,
        "an offensive remark",
    ));
    let m = scan_implicit([&rec], &default_lexemes(), ImplicitScope::Descriptive);
    assert_eq!(m.len(), 2);
}

#[test]
fn catalog_files_parse_and_reject_bad_rows() {
    let rules = parse_rules(
        "dataset,selector_property,selector_value,category\naat,gvp:termKind,Pejorative,1\n"
            .as_bytes(),
        "t",
    )
    .unwrap();
    assert_eq!(rules.len(), 1);
    assert!(parse_rules(
        "dataset,selector_property,selector_value,category\naat,gvp:termKind,Pejorative,9\n"
            .as_bytes(),
        "t"
    )
    .is_err());
    assert!(parse_rules(
        "dataset,selector_property,selector_value,category\nfoo,p,v,1\n".as_bytes(),
        "t"
    )
    .is_err());
    assert!(parse_lexemes("language,phrase,category\nfr,injure,1\n".as_bytes(), "t").is_err());
    assert!(default_rules()
        .iter()
        .all(|r| (1..=6).contains(&r.category.number())));
}

#[test]
fn marker_csv_columns() {
    let rec = with_prop(Dataset::Wikidata, "Q1135775", "P31", "Q545779");
    let m = scan_explicit([&rec], &default_rules());
    let mut buf = Vec::new();
    write_markers_csv(&mut buf, &m).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "resource_id,dataset,language,kind,category,evidence_property,evidence_text\nQ1135775,wikidata,en,explicit,1,P31,Q545779\n"
    );
}

fn berber() -> ContentiousTerm {
    let mut t = ContentiousTerm::new("berber", Language::En, "urn:berber");
    t.suggestions = vec!["Amazigh".into(), "Imazighen".into()];
    t
}

#[test]
fn suggestions_found_in_alt_labels() {
    let mut rec = record(Dataset::Wikidata, "Q45315", Language::En);
    let r = rec.resource.clone();
    for label in ["Berber", "Amazigh", "Imazighen"] {
        rec.literals
            .push(lit(&r, PropertyPath::WikidataAltLabel, label));
    }
    let found = find_suggestions(&rec, &berber(), 0.85);
    let names: BTreeSet<&str> = found.iter().map(|s| s.suggestion.as_str()).collect();
    assert_eq!(names, BTreeSet::from(["Amazigh", "Imazighen"]));
    assert!(found.iter().all(|s| s.similarity == 1.0));

    let none = ContentiousTerm::new("berber", Language::En, "urn:berber");
    assert!(find_suggestions(&rec, &none, 0.85).is_empty());
}

#[test]
fn suggestion_span_and_fuzzy_floor() {
    let mut rec = record(Dataset::Wikidata, "Q1", Language::En);
    let r = rec.resource.clone();
    rec.literals.push(lit(
        &r,
        PropertyPath::WikidataDescription,
        "Imazighen peoples of North Africa",
    ));
    let found = find_suggestions(&rec, &berber(), 0.85);
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].span, "Imazighen");
    assert_eq!(found[0].similarity, 1.0);

    // "Amazight" vs "amazigh": one insertion over 8 characters -> 7/8
    let mut typo = record(Dataset::Wikidata, "Q2", Language::En);
    let r = typo.resource.clone();
    typo.literals
        .push(lit(&r, PropertyPath::WikidataAltLabel, "Amazight"));
    let found = find_suggestions(&typo, &berber(), 0.85);
    assert_eq!(found.len(), 1);
    assert!((found[0].similarity - 0.875).abs() < 1e-12);
    assert!(find_suggestions(&typo, &berber(), 0.9).is_empty());
}

#[test]
fn label_coverage_counts_marked_resources() {
    let lex = TermLexicon::from_terms(vec![ContentiousTerm::new("redneck", Language::En, "urn:r")])
        .unwrap();
    let mut store = LiteralStore::new();
    let mut set3 = Vec::new();
    for (id, label) in [
        ("Q1", "redneck"),
        ("Q2", "Redneck Rampage"),
        ("Q3", "hillbilly"),
    ] {
        let mut rec = with_text(
            Dataset::Wikidata,
            id,
            Language::En,
            PropertyPath::WikidataPrefLabel,
            label,
        );
        rec.add_property("P31", "Q545779");
        set3.push(WsdScore {
            resource: rec.resource.clone(),
            canonical_form: "redneck".into(),
            similarity: Some(0.9),
            included: true,
        });
        store.insert(rec);
    }
    let none = label_coverage_report(&set3, &store, &lex, &[]);
    assert_eq!(
        (
            none[&Dataset::Wikidata].with_term,
            none[&Dataset::Wikidata].marked
        ),
        (2, 0)
    );
    let markers = scan_explicit(store.records(), &default_rules());
    let all = label_coverage_report(&set3, &store, &lex, &markers);
    assert_eq!(
        (
            all[&Dataset::Wikidata].with_term,
            all[&Dataset::Wikidata].marked
        ),
        (2, 2)
    );
    assert_eq!(all[&Dataset::Aat].with_term, 0);
}

const PHRASES: [&str; 8] = [
    "offensive",
    "slang",
    "archaic",
    "use instead",
    "older term",
    "ethnic slur",
    "informal",
    "foo bar",
];

fn arb_lexemes() -> impl Strategy<Value = Vec<MarkerLexeme>> {
    prop::collection::vec((0..PHRASES.len(), 1u8..=6), 0..6).prop_map(|v| {
        v.into_iter()
            .map(|(p, c)| MarkerLexeme {
                language: Language::En,
                phrase: PHRASES[p].into(),
                category: Category::new(c).unwrap(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn implicit_scanning_is_additive(a in arb_lexemes(), b in arb_lexemes(), words in prop::collection::vec(0..PHRASES.len(), 1..6)) {
        let text = words.iter().map(|i| PHRASES[*i]).collect::<Vec<_>>().join(" and ");
        let rec = with_text(Dataset::Pwn, "1", Language::En, PropertyPath::PwnDefinition, &text);
        let union: Vec<MarkerLexeme> = a.iter().chain(&b).cloned().collect();
        let both: BTreeSet<_> = scan_implicit([&rec], &union, ImplicitScope::Descriptive).into_iter().collect();
        let mut sep: BTreeSet<_> = scan_implicit([&rec], &a, ImplicitScope::Descriptive).into_iter().collect();
        sep.extend(scan_implicit([&rec], &b, ImplicitScope::Descriptive));
        prop_assert_eq!(both, sep);
    }
}
