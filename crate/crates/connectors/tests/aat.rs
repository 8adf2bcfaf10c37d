use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::DateTime;
use lodaudit_connectors::aat::{build_aat_subgraph, extract_records};
use lodaudit_connectors::http::RetryPolicy;
use lodaudit_connectors::{
    CachedClient, ConnectorError, NetworkMode, ResponseCache, UreqTransport,
};
use lodaudit_core::matcher::{aggregate, count_hits, FormGrouping};
use lodaudit_core::rdf::Graph;
use lodaudit_core::{ContentiousTerm, Language, PropertyPath, TermLexicon};
use lodaudit_testkit::sparql_endpoint;

fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/aat")
        .join(name);
    std::fs::read_to_string(p).unwrap()
}

fn client(cache: &Path, mode: NetworkMode) -> CachedClient {
    let t = UreqTransport::new(Duration::from_secs(10), "lodaudit-test");
    CachedClient::new(Box::new(t), ResponseCache::new(cache), 1000.0, mode).with_retry(
        RetryPolicy {
            max_attempts: 1,
            initial_backoff: Duration::from_millis(1),
        },
    )
}

fn subgraph(endpoint: &str, cache: &Path, out: &Path, lang: Language, page: usize) -> usize {
    build_aat_subgraph(
        &client(cache, NetworkMode::Online),
        endpoint,
        lang,
        out,
        page,
    )
    .unwrap()
}

fn slave_lexicon() -> TermLexicon {
    let mut t = ContentiousTerm::new("slave", Language::En, "urn:slave");
    t.add_form("slaves");
    let mut nl = ContentiousTerm::new("slaaf", Language::Nl, "urn:slaaf");
    nl.add_form("slaven");
    TermLexicon::from_terms(vec![t, nl]).unwrap()
}

#[test]
fn paged_subgraph_has_every_triple_once() {
    let server = sparql_endpoint(&fixture("slave.ttl"));
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.nt");
    let large = dir.path().join("large.nt");
    assert_eq!(
        subgraph(
            &server.url(),
            &dir.path().join("c1"),
            &small,
            Language::En,
            3
        ),
        94
    );
    assert_eq!(
        subgraph(
            &server.url(),
            &dir.path().join("c2"),
            &large,
            Language::En,
            10_000
        ),
        94
    );
    assert_eq!(
        std::fs::read(&small).unwrap(),
        std::fs::read(&large).unwrap()
    );

    let nl = dir.path().join("nl.nt");
    assert_eq!(
        subgraph(&server.url(), &dir.path().join("c3"), &nl, Language::Nl, 3),
        4
    );

    // rerun overwrites with identical bytes
    let before = std::fs::read(&small).unwrap();
    subgraph(
        &server.url(),
        &dir.path().join("c4"),
        &small,
        Language::En,
        3,
    );
    assert_eq!(std::fs::read(&small).unwrap(), before);
}

#[test]
fn extracted_literals_per_path() {
    let server = sparql_endpoint(&fixture("slave.ttl"));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("en.nt");
    subgraph(&server.url(), &dir.path().join("c"), &out, Language::En, 5);
    let g = Graph::load(&out).unwrap();
    let recs = extract_records(&g, Language::En, DateTime::from_timestamp(0, 0).unwrap());
    assert_eq!(recs.len(), 6);
    let mut per_path: BTreeMap<PropertyPath, usize> = BTreeMap::new();
    for r in &recs {
        for l in &r.literals {
            assert_eq!(l.resource, r.resource);
            *per_path.entry(l.property_path).or_default() += 1;
        }
    }
    let expected = BTreeMap::from([
        (PropertyPath::AatPrefLabelLiteralForm, 6),
        (PropertyPath::AatAltLabelLiteralForm, 27),
        (PropertyPath::AatAltLabelComment, 1),
        (PropertyPath::AatScopeNoteValue, 13),
    ]);
    assert_eq!(per_path, expected);
    let flagged: Vec<_> = recs
        .iter()
        .filter_map(|r| r.properties.get("gvp:termKind"))
        .collect();
    assert_eq!(flagged, [&vec!["Misspelling".to_string()]]);
}

#[test]
fn slave_fixture_counts_forty_hits() {
    let server = sparql_endpoint(&fixture("slave.ttl"));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("en.nt");
    subgraph(&server.url(), &dir.path().join("c"), &out, Language::En, 7);
    let recs = extract_records(
        &Graph::load(&out).unwrap(),
        Language::En,
        DateTime::from_timestamp(0, 0).unwrap(),
    );
    let lits: Vec<_> = recs
        .iter()
        .flat_map(|r| r.literals.iter().cloned())
        .collect();
    let hits = count_hits(&lits, &slave_lexicon());
    assert_eq!(hits.len(), 40);
    let mut by_path: BTreeMap<(PropertyPath, String), u64> = BTreeMap::new();
    for a in aggregate(&hits, FormGrouping::PerForm) {
        *by_path
            .entry((a.property_path, a.form.unwrap()))
            .or_default() += a.count;
    }
    assert_eq!(
        by_path[&(PropertyPath::AatPrefLabelLiteralForm, "slave".into())],
        2
    );
    assert_eq!(
        by_path[&(PropertyPath::AatAltLabelLiteralForm, "slave".into())],
        17
    );
    assert_eq!(
        by_path[&(PropertyPath::AatScopeNoteValue, "slave".into())],
        2
    );
    let slaves: u64 = by_path
        .iter()
        .filter(|((_, f), _)| f == "slaves")
        .map(|(_, n)| n)
        .sum();
    assert_eq!(slaves, 19);
}

#[test]
fn empty_endpoint_gives_empty_file() {
    let server = sparql_endpoint("");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("en.nt");
    assert_eq!(
        subgraph(&server.url(), &dir.path().join("c"), &out, Language::En, 10),
        0
    );
    assert_eq!(std::fs::read(&out).unwrap(), b"");
}

#[test]
fn offline_replay_matches_and_misses_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cache: PathBuf = dir.path().join("cache");
    let online = dir.path().join("online.nt");
    let offline = dir.path().join("offline.nt");
    let server = sparql_endpoint(&fixture("slave.ttl"));
    let url = server.url();
    subgraph(&url, &cache, &online, Language::En, 4);
    let served = server.hits();
    build_aat_subgraph(
        &client(&cache, NetworkMode::Offline),
        &url,
        Language::En,
        &offline,
        4,
    )
    .unwrap();
    assert_eq!(server.hits(), served);
    assert_eq!(
        std::fs::read(&online).unwrap(),
        std::fs::read(&offline).unwrap()
    );

    let err = build_aat_subgraph(
        &client(&cache, NetworkMode::Offline),
        &url,
        Language::Nl,
        &offline,
        4,
    )
    .unwrap_err();
    assert!(matches!(err, ConnectorError::CacheMiss { .. }), "{err}");
}
