mod common;

use std::collections::BTreeMap;
use std::process::{Command, Stdio};

use common::E2e;
use lodaudit_connectors::NetworkMode;
use lodaudit_report::{load_config, Pipeline, Stage};
use serde_json::Value;

const TABLES: &[&str] = &[
    "aggregates_set1.csv",
    "aggregates_set2.csv",
    "aggregates_set2_forms.csv",
    "aggregates_set3.csv",
    "aggregates_set3_forms.csv",
    "hit_matrix.csv",
    "label_coverage.csv",
    "literal_inventory.csv",
    "marker_summary.csv",
    "markers.csv",
    "sample.csv",
    "set1_coverage.csv",
    "set1_sanity.csv",
    "suggestions.csv",
    "unmarked_selector_values.csv",
    "wsd_no_background.csv",
    "wsd_scores.csv",
];

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn bundle_lists_every_table_and_manifest() {
    let e = E2e::start();
    let b = e
        .run(&e.config("run", ""), "out", NetworkMode::Online)
        .unwrap();
    for t in TABLES {
        assert!(b.files.contains_key(&format!("tables/{t}")), "{t}");
    }
    let top: Vec<_> = b
        .table_names()
        .filter(|n| n.starts_with("tables/top_terms_"))
        .collect();
    // two sets x (wikidata, aat) x 2 languages + pwn/en + odwn/nl
    assert_eq!(top.len(), 12);
    assert!(b.files.contains_key("plot_data.json"));

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(e.path("out/manifest.json")).unwrap())
            .unwrap();
    let listed: BTreeMap<String, String> =
        serde_json::from_value(manifest["tables"].clone()).unwrap();
    assert_eq!(listed, b.files);
    assert_eq!(manifest["run_id"], b.run_id.as_str());
    assert_eq!(manifest["seed"], 42);

    let mut digest = e.digest("out");
    assert!(digest.remove("manifest.json").is_some());
    assert_eq!(digest, b.files);
}

#[test]
fn hit_matrix_is_the_sum_of_the_aggregates() {
    let e = E2e::start();
    e.run(&e.config("run", ""), "out", NetworkMode::Online)
        .unwrap();

    let mut expected: BTreeMap<(String, String, String), u64> = BTreeMap::new();
    for set in ["set1", "set2", "set3"] {
        for row in csv_rows(&e.table("out", &format!("aggregates_{set}.csv"))) {
            let key = (row[1].clone(), row[3].clone(), format!("{set}_{}", row[2]));
            *expected.entry(key).or_default() += row[4].parse::<u64>().unwrap();
        }
    }

    let text = e.table("out", "hit_matrix.csv");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        [
            "dataset",
            "property_path",
            "set1_en",
            "set1_nl",
            "set2_en",
            "set2_nl",
            "set3_en",
            "set3_nl"
        ]
    );
    let mut rows_per_dataset: BTreeMap<String, usize> = BTreeMap::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        *rows_per_dataset.entry(cells[0].to_string()).or_default() += 1;
        for (col, cell) in header[2..].iter().zip(&cells[2..]) {
            let lang = &col[5..];
            let na = (cells[0] == "pwn" && lang == "nl") || (cells[0] == "odwn" && lang == "en");
            if na {
                assert_eq!(*cell, "N/A", "{line}");
                continue;
            }
            let want = expected
                .remove(&(cells[0].to_string(), cells[1].to_string(), col.to_string()))
                .unwrap_or(0);
            assert_eq!(cell.parse::<u64>().unwrap(), want, "{line} {col}");
        }
    }
    assert!(expected.is_empty(), "unplaced aggregates {expected:?}");
    assert_eq!(
        rows_per_dataset,
        BTreeMap::from([
            ("aat".into(), 5),
            ("odwn".into(), 4),
            ("pwn".into(), 3),
            ("wikidata".into(), 3)
        ])
    );
}

#[test]
fn top_terms_split_canonical_hits_from_inflections() {
    let e = E2e::start();
    e.run(&e.config("run", ""), "out", NetworkMode::Online)
        .unwrap();
    let text = e.table("out", "top_terms_set2_aat_en.csv");
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rank,canonical,total,prefLabel/literalForm,prefLabel/comment,altLabel/literalForm,altLabel/comment,scopeNote/value,inflected_forms"
    );
    assert_eq!(lines.next().unwrap(), "1,slave,40,2,0,17,0,2,19");
    for row in csv_rows(&text) {
        let parts: u64 = row[3..].iter().map(|c| c.parse::<u64>().unwrap()).sum();
        assert_eq!(parts, row[2].parse::<u64>().unwrap());
    }
}

#[test]
fn missing_embedding_fails_at_wsd_and_keeps_earlier_exports() {
    let e = E2e::start();
    let cfg = e.config("run", "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("embedding_nl.txt", "missing.txt");
    std::fs::write(&cfg, text).unwrap();
    let err = e.run(&cfg, "out", NetworkMode::Online).unwrap_err();
    assert_eq!(err.stage, Stage::Wsd);
    assert!(err.message.contains("missing.txt"), "{}", err.message);
    assert_eq!(err.checkpoint, e.path("out/work/checkpoint.json"));
    for t in [
        "literal_inventory.csv",
        "aggregates_set1.csv",
        "aggregates_set2.csv",
    ] {
        assert!(e.path("out/tables").join(t).exists(), "{t}");
    }
    assert!(!e.path("out/tables/hit_matrix.csv").exists());
    assert!(!e.path("out/manifest.json").exists());

    let checkpoint: Value =
        serde_json::from_str(&std::fs::read_to_string(&err.checkpoint).unwrap()).unwrap();
    let done: Vec<&String> = checkpoint["completed"]
        .as_object()
        .unwrap()
        .keys()
        .collect();
    assert_eq!(done, ["harvest", "match", "set1"]);
}

#[test]
fn rerun_resumes_from_checkpoint_without_requests() {
    let e = E2e::start();
    let cfg = e.config("run", "");
    let first = e.run(&cfg, "out", NetworkMode::Online).unwrap();
    let before = e.digest("out");
    let served = (e.aat.hits(), e.wikidata.hits());
    let second = e.run(&cfg, "out", NetworkMode::Online).unwrap();
    assert_eq!((e.aat.hits(), e.wikidata.hits()), served);
    assert_eq!(first, second);
    assert_eq!(e.digest("out"), before);

    // a changed harvest section invalidates the harvest checkpoint
    let changed = e.config("changed", "");
    let text = std::fs::read_to_string(&changed)
        .unwrap()
        .replace("page_size = 25", "page_size = 30");
    std::fs::write(&changed, text).unwrap();
    let mut p = Pipeline::new(
        load_config(&changed, None, Some(&e.path("out"))).unwrap(),
        NetworkMode::Offline,
    );
    p.harvest().unwrap_err();
}

#[test]
fn cli_exit_codes() {
    let e = E2e::start();
    let bin = env!("CARGO_BIN_EXE_lodaudit");
    let status = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("RUST_LOG", "off")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .unwrap()
            .code()
    };

    let cfg = e.config("run", "");
    let cfg = cfg.to_str().unwrap();
    let out = e.path("cli");
    let out = out.to_str().unwrap();
    assert_eq!(status(&["--config", cfg, "--out", out, "run"]), Some(0));
    assert!(e.path("cli/manifest.json").exists());

    let offline = e.path("cli-offline");
    assert_eq!(
        status(&[
            "--config",
            cfg,
            "--out",
            offline.to_str().unwrap(),
            "--offline",
            "run"
        ]),
        Some(0)
    );
    assert_eq!(e.digest("cli"), e.digest("cli-offline"));

    assert_eq!(status(&["--config", "/nonexistent.toml", "run"]), Some(2));
    let bad = e.path("bad.toml");
    std::fs::write(&bad, "seed = \"x\"\n").unwrap();
    assert_eq!(
        status(&["--config", bad.to_str().unwrap(), "--out", out, "run"]),
        Some(2)
    );

    let broken = e.config("broken", "");
    let text = std::fs::read_to_string(&broken)
        .unwrap()
        .replace("embedding_en.txt", "missing.txt");
    std::fs::write(&broken, text).unwrap();
    let fresh = e.path("cli-broken");
    assert_eq!(
        status(&[
            "--config",
            broken.to_str().unwrap(),
            "--out",
            fresh.to_str().unwrap(),
            "disambiguate"
        ]),
        Some(3)
    );
    assert_eq!(
        status(&[
            "--config",
            broken.to_str().unwrap(),
            "--out",
            fresh.to_str().unwrap(),
            "match"
        ]),
        Some(0)
    );
}

#[test]
fn annotation_sheets_feed_the_alpha_command() {
    let e = E2e::start();
    let b = e
        .run(
            &e.config("run", "annotators = [\"ann1\", \"ann2\"]\n"),
            "out",
            NetworkMode::Online,
        )
        .unwrap();
    assert!(b.files.contains_key("sheets/ann1.csv") && b.files.contains_key("sheets/ann2.csv"));
    let sample_rows = csv_rows(
        &e.table("out", "sample.csv")
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n"),
    );
    assert!(!sample_rows.is_empty());

    let mut files = Vec::new();
    for ann in ["ann1", "ann2"] {
        let path = e.path(&format!("out/sheets/{ann}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let mut filled = format!("{}\n", lines.next().unwrap());
        for (i, l) in lines.enumerate() {
            assert!(l.ends_with(&format!(",{ann},")), "{l}");
            filled += &format!(
                "{l}{}\n",
                if i % 3 == 0 {
                    "not_relevant"
                } else {
                    "relevant"
                }
            );
        }
        assert_eq!(filled.lines().count(), sample_rows.len() + 1);
        std::fs::write(&path, filled).unwrap();
        files.push(path);
    }
    let out = Command::new(env!("CARGO_BIN_EXE_lodaudit"))
        .arg("alpha")
        .args(&files)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["alpha"], 1.0);
    assert_eq!(report["n_raters"], 2);
    assert_eq!(report["n_items"], sample_rows.len());

    let bad = e.config("bad", "annotators = [\"a b\"]\n");
    assert!(load_config(&bad, None, Some(&e.path("x"))).is_err());
}
