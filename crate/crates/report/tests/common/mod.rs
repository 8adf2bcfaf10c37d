//! End-to-end harness: mock AAT and Wikidata services over the fixture corpus
//! and a pipeline configuration pointing at them.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lodaudit_connectors::NetworkMode;
use lodaudit_report::{bundle_digest, load_config, run_pipeline, ReportBundle, StageError};
use lodaudit_testkit::{sparql_endpoint, wikidata_api, MockServer};
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap()
}

pub struct E2e {
    pub aat: MockServer,
    pub wikidata: MockServer,
    pub dir: tempfile::TempDir,
}

impl E2e {
    pub fn start() -> Self {
        let turtle = read("aat/slave.ttl") + &read("aat/markers.ttl");
        let wd: Value = serde_json::from_str(&read("e2e/wikidata.json")).unwrap();
        let search: BTreeMap<String, Vec<String>> =
            serde_json::from_value(wd["search"].clone()).unwrap();
        let entities = wd["entities"].as_array().unwrap().clone();
        E2e {
            aat: sparql_endpoint(&turtle),
            wikidata: wikidata_api(search, entities),
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Writes `<name>.toml`; `extra` is appended verbatim.
    pub fn config(&self, name: &str, extra: &str) -> PathBuf {
        let f = fixtures();
        let p = |rel: &str| f.join(rel).display().to_string();
        let text = format!(
            r#"seed = 42

[lexicon]
kg = "{kg}"
inflections = "{infl}"
odwn_links = "{links}"

[harvest]
languages = ["en", "nl"]
pwn = "{pwn}"
odwn = "{odwn}"

[harvest.http]
cache_dir = "cache"
requests_per_second = 1000.0
max_attempts = 1

[harvest.wikidata]
api = "{wd}"
page_size = 2

[harvest.aat]
endpoint = "{aat}"
page_size = 25

[wsd]
embedding_en = "{emb_en}"
embedding_nl = "{emb_nl}"

[evaluation]
per_quartile = 2
{extra}"#,
            kg = p("e2e/lexicon.ttl"),
            infl = p("e2e/inflections.csv"),
            links = p("e2e/odwn_links.csv"),
            pwn = p("pwn/wordnet.ttl"),
            odwn = p("odwn/odwn.xml"),
            wd = self.wikidata.url(),
            aat = self.aat.url(),
            emb_en = p("e2e/embedding_en.txt"),
            emb_nl = p("e2e/embedding_nl.txt"),
        );
        let path = self.path(&format!("{name}.toml"));
        std::fs::write(&path, text).unwrap();
        path
    }

    pub fn run(
        &self,
        config: &Path,
        out: &str,
        mode: NetworkMode,
    ) -> Result<ReportBundle, StageError> {
        let cfg = load_config(config, None, Some(&self.path(out))).unwrap();
        run_pipeline(cfg, mode)
    }

    pub fn digest(&self, out: &str) -> BTreeMap<String, String> {
        bundle_digest(&self.path(out)).unwrap()
    }

    pub fn table(&self, out: &str, name: &str) -> String {
        std::fs::read_to_string(self.path(out).join("tables").join(name)).unwrap()
    }
}
