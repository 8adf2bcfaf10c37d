use std::collections::{BTreeMap, BTreeSet};

use chrono::DateTime;
use lodaudit_core::matcher::{
    aggregate, build_set1, count_hits, match_term, totals, FormGrouping, Hit, HitAggregate,
};
use lodaudit_core::{
    ContentiousTerm, Dataset, Language, LiteralStore, PropertyPath, ResourceRecord, ResourceRef,
    RetrievedLiteral, TermLexicon,
};
use proptest::prelude::*;

fn term(canonical: &str, lang: Language, forms: &[&str]) -> ContentiousTerm {
    let mut t = ContentiousTerm::new(canonical, lang, format!("urn:{canonical}"));
    for f in forms {
        t.add_form(f);
    }
    t
}

fn lexicon() -> TermLexicon {
    TermLexicon::from_terms(vec![
        term("slave", Language::En, &["slaves"]),
        term("gypsy", Language::En, &["gypsies"]),
        term("servant", Language::En, &["servants"]),
        term("bush negro", Language::En, &["bush negroes"]),
        term("colored", Language::En, &["coloured"]),
        term("slaaf", Language::Nl, &["slaven"]),
    ])
    .unwrap()
}

fn lit(
    dataset: Dataset,
    id: &str,
    lang: Language,
    path: PropertyPath,
    text: &str,
) -> RetrievedLiteral {
    let r = ResourceRef::new(dataset, id, lang).unwrap();
    RetrievedLiteral::new(r, path, text, DateTime::from_timestamp(0, 0).unwrap()).unwrap()
}

fn set<const N: usize>(xs: [&str; N]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn match_term_examples() {
    assert_eq!(
        match_term("The gypsies roamed the woods", &["gypsy", "gypsies"]),
        set(["gypsies"])
    );
    assert!(match_term("colorful painting", &["colored"]).is_empty());
    assert_eq!(match_term("slave of a slave", &["slave"]), set(["slave"]));
    assert_eq!(
        match_term("Maroon communities of Bush Negroes", &["bush negroes"]),
        set(["bush negroes"])
    );
    assert!(match_term("métis", &["metis"]).is_empty());
    assert!(match_term("bush and negroes", &["bush negroes"]).is_empty());
}

#[test]
fn separate_property_values_are_separate_hits() {
    let lex = lexicon();
    let lits = [
        lit(
            Dataset::Aat,
            "1",
            Language::En,
            PropertyPath::AatAltLabelLiteralForm,
            "slave owner",
        ),
        lit(
            Dataset::Aat,
            "1",
            Language::En,
            PropertyPath::AatAltLabelLiteralForm,
            "slave master",
        ),
    ];
    let hits = count_hits(&lits, &lex);
    assert_eq!(hits.len(), 2);
    assert!(hits.iter().all(|h| h.canonical_form == "slave"));
}

#[test]
fn repeated_forms_in_one_literal_are_one_hit() {
    let lex = lexicon();
    let lits = [lit(
        Dataset::Pwn,
        "01",
        Language::En,
        PropertyPath::PwnDefinition,
        "relating to or involving slaves or appropriate for slaves or servants",
    )];
    let hits = count_hits(&lits, &lex);
    let slave: Vec<&Hit> = hits
        .iter()
        .filter(|h| h.canonical_form == "slave")
        .collect();
    assert_eq!(slave.len(), 1);
    assert_eq!(slave[0].matched_form, "slaves");
    assert_eq!(hits.len(), 2);
    assert!(count_hits(std::iter::empty(), &lex).is_empty());
}

#[test]
fn literals_match_only_their_own_language() {
    let lex = lexicon();
    let lits = [
        lit(
            Dataset::Aat,
            "1",
            Language::Nl,
            PropertyPath::AatPrefLabelLiteralForm,
            "slave",
        ),
        lit(
            Dataset::Aat,
            "2",
            Language::Nl,
            PropertyPath::AatPrefLabelLiteralForm,
            "slaven",
        ),
    ];
    let hits = count_hits(&lits, &lex);
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].canonical_form, "slaaf");
}

#[test]
fn inflected_forms_fold_into_canonical() {
    let lex = lexicon();
    let mut lits = Vec::new();
    for i in 0..2 {
        lits.push(lit(
            Dataset::Aat,
            &format!("p{i}"),
            Language::En,
            PropertyPath::AatPrefLabelLiteralForm,
            "slave",
        ));
    }
    for i in 0..17 {
        lits.push(lit(
            Dataset::Aat,
            &format!("a{i}"),
            Language::En,
            PropertyPath::AatAltLabelLiteralForm,
            "slave hut",
        ));
    }
    for i in 0..2 {
        lits.push(lit(
            Dataset::Aat,
            &format!("s{i}"),
            Language::En,
            PropertyPath::AatScopeNoteValue,
            "a slave",
        ));
    }
    for i in 0..19 {
        lits.push(lit(
            Dataset::Aat,
            &format!("x{i}"),
            Language::En,
            PropertyPath::AatScopeNoteValue,
            "for slaves",
        ));
    }
    let hits = count_hits(&lits, &lex);
    let canon = aggregate(&hits, FormGrouping::Canonical);
    assert_eq!(totals(&canon)[&("slave".to_string(), Language::En)], 40);
    let per_form = aggregate(&hits, FormGrouping::PerForm);
    let slaves: u64 = per_form
        .iter()
        .filter(|a| a.form.as_deref() == Some("slaves"))
        .map(|a| a.count)
        .sum();
    assert_eq!(slaves, 19);

    let one = aggregate(&hits[..1], FormGrouping::Canonical);
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].count, 1);
}

#[test]
fn set1_counts_hits_in_related_resources_only() {
    let mut slave = term("slave", Language::En, &["slaves"]);
    let mut only_aat = term("gypsy", Language::En, &[]);
    let refs: Vec<ResourceRef> = ["1", "2", "3"]
        .iter()
        .map(|id| ResourceRef::new(Dataset::Aat, *id, Language::En).unwrap())
        .collect();
    for r in &refs {
        slave.add_related(r.clone());
    }
    only_aat.add_related(ResourceRef::new(Dataset::Aat, "9", Language::En).unwrap());
    let lex = TermLexicon::from_terms(vec![slave, only_aat]).unwrap();

    let mut store = LiteralStore::new();
    let texts = ["slave", "slaves", "bondsman"];
    for (r, text) in refs.iter().zip(texts) {
        let mut rec = ResourceRecord::new(r.clone());
        rec.literals.push(lit(
            Dataset::Aat,
            &r.resource_id,
            Language::En,
            PropertyPath::AatPrefLabelLiteralForm,
            text,
        ));
        store.insert(rec);
    }
    let mut other = ResourceRecord::new(ResourceRef::new(Dataset::Aat, "4", Language::En).unwrap());
    other.literals.push(lit(
        Dataset::Aat,
        "4",
        Language::En,
        PropertyPath::AatPrefLabelLiteralForm,
        "slave",
    ));
    store.insert(other);

    let s1 = build_set1(&lex, &store);
    assert_eq!(s1.hits.len(), 2);
    assert_eq!(
        s1.missing,
        [ResourceRef::new(Dataset::Aat, "9", Language::En).unwrap()]
    );
    assert_eq!(
        s1.uncovered[&(Dataset::Wikidata, Language::En)],
        ["gypsy", "slave"]
    );
    assert!(!s1.uncovered.contains_key(&(Dataset::Aat, Language::En)));

    let empty = build_set1(&lex, &LiteralStore::new());
    assert!(empty.hits.is_empty());
}

const TEXTS: [&str; 10] = [
    "slave",
    "slaves and servants",
    "The gypsies roamed the woods",
    "a coloured print",
    "bush negroes",
    "unrelated text",
    "slave of a slave",
    "Gypsy caravan",
    "servant",
    "colorful",
];

fn paths() -> Vec<PropertyPath> {
    PropertyPath::for_dataset(Dataset::Aat)
        .chain(PropertyPath::for_dataset(Dataset::Pwn))
        .chain(PropertyPath::for_dataset(Dataset::Wikidata))
        .collect()
}

fn arb_literals() -> impl Strategy<Value = Vec<RetrievedLiteral>> {
    let n_paths = paths().len();
    prop::collection::vec((0..TEXTS.len(), 0..n_paths, 0u8..5), 0..60).prop_map(|specs| {
        let paths = paths();
        specs
            .into_iter()
            .map(|(t, p, r)| {
                let path = paths[p];
                lit(
                    path.dataset(),
                    &format!("r{r}"),
                    Language::En,
                    path,
                    TEXTS[t],
                )
            })
            .collect()
    })
}

fn sorted(mut aggs: Vec<HitAggregate>) -> Vec<HitAggregate> {
    let key = |a: &HitAggregate| {
        (
            a.canonical_form.clone(),
            a.dataset.as_str(),
            a.language.as_str(),
            a.property_path.path_id(),
            a.form.clone(),
        )
    };
    aggs.sort_by_key(key);
    aggs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn aggregation_invariants_under_permutation(
        lits in arb_literals(),
        perm in Just(()).prop_perturb(|_, mut rng| rng.next_u64()),
    ) {
        let lex = lexicon();
        let hits = count_hits(&lits, &lex);
        let mut shuffled = hits.clone();
        // Fisher-Yates with the proptest-supplied seed
        let mut state = perm | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }

        let canon = aggregate(&hits, FormGrouping::Canonical);
        let canon_perm = aggregate(&shuffled, FormGrouping::Canonical);
        prop_assert_eq!(&canon, &canon_perm);
        let per_form = aggregate(&shuffled, FormGrouping::PerForm);
        prop_assert_eq!(&per_form, &aggregate(&hits, FormGrouping::PerForm));

        let total: u64 = canon.iter().map(|a| a.count).sum();
        prop_assert_eq!(total, hits.len() as u64);
        prop_assert_eq!(per_form.iter().map(|a| a.count).sum::<u64>(), total);

        let mut folded: BTreeMap<(String, Dataset, Language, PropertyPath), u64> = BTreeMap::new();
        for a in &per_form {
            prop_assert!(lex.lookup(a.form.as_deref().unwrap(), a.language).unwrap().canonical_form == a.canonical_form);
            *folded.entry((a.canonical_form.clone(), a.dataset, a.language, a.property_path)).or_insert(0) += a.count;
        }
        let direct: BTreeMap<_, _> = canon
            .iter()
            .map(|a| ((a.canonical_form.clone(), a.dataset, a.language, a.property_path), a.count))
            .collect();
        prop_assert_eq!(folded, direct);
        prop_assert_eq!(sorted(canon.clone()), canon);

        // at most one hit per (literal, canonical)
        for h in &hits {
            let key = (h.literal.resource.clone(), h.literal.property_path, h.literal.text.clone(), h.canonical_form.clone());
            let dup = hits.iter().filter(|o| {
                (o.literal.resource.clone(), o.literal.property_path, o.literal.text.clone(), o.canonical_form.clone()) == key
            }).count();
            let lits_same = lits.iter().filter(|l| {
                (l.resource.clone(), l.property_path, l.text.clone()) == (key.0.clone(), key.1, key.2.clone())
            }).count();
            prop_assert_eq!(dup, lits_same);
        }
    }
}
