//! The staged end-to-end run: harvest, match, Set 1, WSD, markers, sample, report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use lodaudit_connectors::http::{CachedClient, NetworkMode};
use lodaudit_connectors::wikidata::{self, ClassIndex, WikidataFilter};
use lodaudit_connectors::{aat, odwn, pwn};
use lodaudit_core::evaluation::{export_annotation_sheet, export_sample, stratify};
use lodaudit_core::lexicon::LexiconLoader;
use lodaudit_core::markers::{self, ImplicitScope, Marker};
use lodaudit_core::matcher::{self, FormGrouping, Hit, HitAggregate, Set1};
use lodaudit_core::rdf::Graph;
use lodaudit_core::wsd::{self, BagOfWords, EmbeddingModel, Preprocessor, WsdError, WsdScore};
use lodaudit_core::{Dataset, Language, LiteralStore, ResourceRef, TermLexicon};

use crate::config::LoadedConfig;
use crate::tables::{self, ResultSet};

pub const TOP_K_TERMS: usize = 10;
const CHECKPOINT: &str = "checkpoint.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Lexicon,
    Harvest,
    Match,
    Set1,
    Wsd,
    Markers,
    Sample,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Lexicon => "lexicon",
            Stage::Harvest => "harvest",
            Stage::Match => "match",
            Stage::Set1 => "set1",
            Stage::Wsd => "wsd",
            Stage::Markers => "markers",
            Stage::Sample => "sample",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {message} (checkpoint {})", checkpoint.display())]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Checkpoint {
    /// Stage name to the hash of the configuration it ran under.
    completed: BTreeMap<String, String>,
}

/// Named outputs of a completed run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportBundle {
    pub run_id: String,
    pub out_dir: PathBuf,
    /// Bundle-relative path to SHA-256, for every table and the plot data.
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Pipeline {
    cfg: LoadedConfig,
    out: PathBuf,
    work: PathBuf,
    mode: NetworkMode,
    client: Option<CachedClient>,
    lexicon: Option<TermLexicon>,
    store: Option<LiteralStore>,
    set1_store: Option<LiteralStore>,
    set2_hits: Option<Vec<Hit>>,
    set2_aggs: Vec<HitAggregate>,
    set2_forms: Vec<HitAggregate>,
    set1: Option<Set1>,
    set1_aggs: Vec<HitAggregate>,
    scores: Option<Vec<WsdScore>>,
    set3_aggs: Vec<HitAggregate>,
    set3_forms: Vec<HitAggregate>,
    markers: Option<Vec<Marker>>,
    sampled: bool,
    written: BTreeSet<String>,
    checkpoint: Checkpoint,
}

impl Pipeline {
    pub fn new(cfg: LoadedConfig, mode: NetworkMode) -> Self {
        let out = cfg
            .config
            .out_dir
            .clone()
            .expect("validated config has an output directory");
        let work = out.join("work");
        let checkpoint = fs::read_to_string(work.join(CHECKPOINT))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        Pipeline {
            cfg,
            out,
            work,
            mode,
            client: None,
            lexicon: None,
            store: None,
            set1_store: None,
            set2_hits: None,
            set2_aggs: Vec::new(),
            set2_forms: Vec::new(),
            set1: None,
            set1_aggs: Vec::new(),
            scores: None,
            set3_aggs: Vec::new(),
            set3_forms: Vec::new(),
            markers: None,
            sampled: false,
            written: BTreeSet::new(),
            checkpoint,
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    fn fail(&self, stage: Stage, message: impl fmt::Display) -> StageError {
        StageError {
            stage,
            message: message.to_string(),
            checkpoint: self.work.join(CHECKPOINT),
        }
    }

    /// Hash of the configuration parts a stage's result depends on.
    fn stage_key(&self, stage: Stage) -> String {
        let c = &self.cfg.config;
        let relevant = match stage {
            Stage::Harvest => json!([c.lexicon, c.harvest, c.snapshot]),
            _ => json!(self.cfg.snapshot),
        };
        sha256_hex(relevant.to_string().as_bytes())
    }

    fn mark_done(&mut self, stage: Stage) -> Result<(), StageError> {
        self.checkpoint
            .completed
            .insert(stage.as_str().to_string(), self.stage_key(stage));
        let text = serde_json::to_string_pretty(&self.checkpoint).expect("checkpoint serializes");
        self.write_work(stage, CHECKPOINT, text.as_bytes())
    }

    fn resumable(&self, stage: Stage) -> bool {
        self.checkpoint.completed.get(stage.as_str()) == Some(&self.stage_key(stage))
    }

    fn write_work(&self, stage: Stage, name: &str, bytes: &[u8]) -> Result<(), StageError> {
        lodaudit_connectors::http::write_atomic(&self.work.join(name), bytes)
            .map_err(|e| self.fail(stage, e))
    }

    /// Writes a bundle file; `name` is relative to the output directory.
    fn export(&mut self, stage: Stage, name: &str, bytes: &[u8]) -> Result<(), StageError> {
        lodaudit_connectors::http::write_atomic(&self.out.join(name), bytes)
            .map_err(|e| self.fail(stage, e))?;
        self.written.insert(name.to_string());
        Ok(())
    }

    fn export_csv(
        &mut self,
        stage: Stage,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    ) -> Result<(), StageError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| self.fail(stage, e))?;
        self.export(stage, name, &buf)
    }

    fn client(&mut self) -> &CachedClient {
        if self.client.is_none() {
            self.client = Some(self.cfg.config.harvest.client(self.mode));
        }
        self.client.as_ref().expect("client set")
    }

    fn languages(&self) -> Vec<Language> {
        self.cfg.config.harvest.languages()
    }

    pub fn lexicon(&mut self) -> Result<&TermLexicon, StageError> {
        if self.lexicon.is_none() {
            let l = &self.cfg.config.lexicon;
            let mut loader = LexiconLoader::new(&l.kg);
            if let Some(p) = &l.inflections {
                loader = loader.inflections(p);
            }
            if let Some(p) = &l.odwn_links {
                loader = loader.odwn_links(p);
            }
            if let Some(p) = &l.suggestion_predicate {
                loader = loader.suggestion_predicate(p);
            }
            let lex = loader.load().map_err(|e| self.fail(Stage::Lexicon, e))?;
            log::info!(
                "lexicon: {} terms, {} EN and {} NL forms",
                lex.terms().len(),
                lex.form_count(Language::En),
                lex.form_count(Language::Nl)
            );
            self.lexicon = Some(lex);
        }
        Ok(self.lexicon.as_ref().expect("lexicon set"))
    }

    fn related(&mut self) -> Result<BTreeSet<ResourceRef>, StageError> {
        let langs = self.languages();
        Ok(self
            .lexicon()?
            .terms()
            .iter()
            .filter(|t| langs.contains(&t.language))
            .flat_map(|t| t.related_resources.iter().cloned())
            .collect())
    }

    pub fn harvest(&mut self) -> Result<(), StageError> {
        if self.store.is_some() {
            return Ok(());
        }
        const S: Stage = Stage::Harvest;
        let related = self.related()?;
        let (store, set1_store) = if self.resumable(S) {
            log::info!("harvest: resuming from {}", self.work.display());
            (
                self.read_store(S, &self.work.join("store.json"))?,
                self.read_store(S, &self.work.join("set1_store.json"))?,
            )
        } else if let Some(snap) = self.cfg.config.snapshot.clone() {
            (
                self.read_store(S, &snap.store)?,
                self.read_store(S, &snap.set1_store)?,
            )
        } else {
            self.harvest_sources(&related)?
        };
        for (name, s) in [("store.json", &store), ("set1_store.json", &set1_store)] {
            let json = serde_json::to_vec(s).expect("store serializes");
            self.write_work(S, name, &json)?;
        }
        let inventory = tables::literal_inventory(&store);
        self.export_csv(S, "tables/literal_inventory.csv", |w| {
            tables::write_inventory_csv(w, &inventory)
        })?;
        self.store = Some(store);
        self.set1_store = Some(set1_store);
        self.mark_done(S)
    }

    fn read_store(&self, stage: Stage, path: &Path) -> Result<LiteralStore, StageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| self.fail(stage, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| self.fail(stage, format!("{}: {e}", path.display())))
    }

    fn harvest_sources(
        &mut self,
        related: &BTreeSet<ResourceRef>,
    ) -> Result<(LiteralStore, LiteralStore), StageError> {
        const S: Stage = Stage::Harvest;
        let now = Utc::now();
        let langs = self.languages();
        let h = self.cfg.config.harvest.clone();
        let mut store = LiteralStore::new();
        let mut set1_store = LiteralStore::new();

        if let Some(wd) = &h.wikidata {
            let excluded = h.excluded_categories().map_err(|e| self.fail(S, e))?;
            let mut queries: Vec<(Language, String)> = Vec::new();
            for t in self
                .lexicon()?
                .terms()
                .iter()
                .filter(|t| langs.contains(&t.language))
            {
                for f in &t.inflected_forms {
                    queries.push((t.language, f.clone()));
                }
            }
            let mut found = Vec::new();
            for (lang, form) in queries {
                let recs = wikidata::search_wikidata(
                    self.client(),
                    &form,
                    &wd.api,
                    wd.max_results,
                    wd.page_size,
                )
                .map_err(|e| self.fail(S, e))?;
                found.push((lang, form, recs));
            }
            let related_ids: Vec<String> = related
                .iter()
                .filter(|r| r.dataset == Dataset::Wikidata)
                .map(|r| r.resource_id.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let related_raw = wikidata::fetch_entities(
                self.client(),
                &wd.api,
                &related_ids,
                "labels|aliases|descriptions|claims",
            )
            .map_err(|e| self.fail(S, e))?;
            let related_recs = related_raw
                .iter()
                .map(|v| wikidata::parse_entity(v, 0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| self.fail(S, e))?;
            let class_ids: BTreeSet<String> = found
                .iter()
                .flat_map(|(_, _, recs)| recs.iter())
                .chain(related_recs.iter())
                .flat_map(|r| r.instance_of.iter().chain(&r.subclass_of).cloned())
                .collect();
            let classes = ClassIndex::fetch(self.client(), &wd.api, class_ids, wd.class_depth)
                .map_err(|e| self.fail(S, e))?;
            let mut filter = WikidataFilter::new(excluded);
            filter.classes = classes;
            filter.description_languages = wd.description_languages.clone();
            for (lang, form, recs) in found {
                let n = recs.len();
                let kept = filter.apply(recs, &form);
                log::info!("wikidata {lang} {form:?}: {n} found, {} kept", kept.len());
                for r in kept {
                    store.insert(
                        wikidata::to_resource_record(&r, lang, &filter.classes, now)
                            .map_err(|e| self.fail(S, e))?,
                    );
                }
            }
            for r in &related_recs {
                for lang in &langs {
                    let rr = ResourceRef::new(Dataset::Wikidata, &r.entity_id, *lang)
                        .map_err(|e| self.fail(S, e))?;
                    if related.contains(&rr) {
                        set1_store.insert(
                            wikidata::to_resource_record(r, *lang, &filter.classes, now)
                                .map_err(|e| self.fail(S, e))?,
                        );
                    }
                }
            }
        }

        if let Some(a) = &h.aat {
            for lang in &langs {
                let path = self.work.join(format!("aat_{lang}.nt"));
                let endpoint = a.endpoint.clone();
                let n =
                    aat::build_aat_subgraph(self.client(), &endpoint, *lang, &path, a.page_size)
                        .map_err(|e| self.fail(S, e))?;
                log::info!("aat {lang}: {n} triples");
                let g = Graph::load(&path).map_err(|e| self.fail(S, e))?;
                store.extend(aat::extract_records(&g, *lang, now));
            }
        }
        if let (Some(p), true) = (&h.pwn, langs.contains(&Language::En)) {
            let g = Graph::load(p).map_err(|e| self.fail(S, e))?;
            store.extend(pwn::extract_records(&g, now));
        }
        if let (Some(p), true) = (&h.odwn, langs.contains(&Language::Nl)) {
            store.extend(odwn::load_odwn(p, now).map_err(|e| self.fail(S, e))?);
        }
        let local: Vec<&ResourceRef> = related
            .iter()
            .filter(|r| r.dataset != Dataset::Wikidata)
            .collect();
        set1_store.extend(store.subset(local).records().cloned());
        Ok((store, set1_store))
    }

    pub fn match_set2(&mut self) -> Result<(), StageError> {
        if self.set2_hits.is_some() {
            return Ok(());
        }
        self.harvest()?;
        const S: Stage = Stage::Match;
        self.lexicon()?;
        let lex = self.lexicon.as_ref().expect("lexicon");
        let hits = matcher::count_hits(self.store.as_ref().expect("store").literals(), lex);
        self.set2_aggs = matcher::aggregate(&hits, FormGrouping::Canonical);
        self.set2_forms = matcher::aggregate(&hits, FormGrouping::PerForm);
        let (a, f) = (self.set2_aggs.clone(), self.set2_forms.clone());
        self.export_csv(S, "tables/aggregates_set2.csv", |w| {
            matcher::write_aggregates_csv(w, &a)
        })?;
        self.export_csv(S, "tables/aggregates_set2_forms.csv", |w| {
            matcher::write_aggregates_csv(w, &f)
        })?;
        log::info!("set 2: {} hits", hits.len());
        self.set2_hits = Some(hits);
        self.mark_done(S)
    }

    pub fn set1(&mut self) -> Result<(), StageError> {
        if self.set1.is_some() {
            return Ok(());
        }
        self.harvest()?;
        const S: Stage = Stage::Set1;
        self.lexicon()?;
        let lex = self.lexicon.as_ref().expect("lexicon");
        let s1 = matcher::build_set1(lex, self.set1_store.as_ref().expect("set1 store"));
        self.set1_aggs = matcher::aggregate(&s1.hits, FormGrouping::Canonical);
        let aggs = self.set1_aggs.clone();
        self.export_csv(S, "tables/aggregates_set1.csv", |w| {
            matcher::write_aggregates_csv(w, &aggs)
        })?;
        let langs = self.languages();
        let coverage = s1.clone();
        self.export_csv(S, "tables/set1_coverage.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["dataset", "language", "uncovered_terms", "terms"])?;
            for ((d, l), terms) in coverage
                .uncovered
                .iter()
                .filter(|((_, l), _)| langs.contains(l))
            {
                w.write_record([
                    d.as_str(),
                    l.as_str(),
                    &terms.len().to_string(),
                    &terms.join(";"),
                ])?;
            }
            for (l, terms) in coverage
                .uncovered_everywhere
                .iter()
                .filter(|(l, _)| langs.contains(l))
            {
                w.write_record(["*", l.as_str(), &terms.len().to_string(), &terms.join(";")])?;
            }
            w.flush()?;
            Ok(())
        })?;
        self.set1 = Some(s1);
        self.mark_done(S)
    }

    pub fn disambiguate(&mut self) -> Result<(), StageError> {
        if self.scores.is_some() {
            return Ok(());
        }
        self.match_set2()?;
        self.set1()?;
        const S: Stage = Stage::Wsd;
        let (scores, without): (Vec<WsdScore>, Vec<(String, Language, String)>) =
            if self.resumable(S) {
                let path = self.work.join("wsd_scores.json");
                let text = fs::read_to_string(&path).map_err(|e| self.fail(S, e))?;
                serde_json::from_str(&text).map_err(|e| self.fail(S, e))?
            } else {
                self.score()?
            };
        self.write_work(
            S,
            "wsd_scores.json",
            &serde_json::to_vec(&(&scores, &without)).expect("scores serialize"),
        )?;
        self.export_csv(S, "tables/wsd_no_background.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["canonical", "language", "reason"])?;
            for (c, l, r) in &without {
                w.write_record([c.as_str(), l.as_str(), r.as_str()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let included: BTreeSet<(&str, &ResourceRef)> = scores
            .iter()
            .filter(|s| s.included)
            .map(|s| (s.canonical_form.as_str(), &s.resource))
            .collect();
        let set3_hits: Vec<Hit> = self
            .set2_hits
            .as_ref()
            .expect("set 2")
            .iter()
            .filter(|h| included.contains(&(h.canonical_form.as_str(), &h.literal.resource)))
            .cloned()
            .collect();
        self.set3_aggs = matcher::aggregate(&set3_hits, FormGrouping::Canonical);
        self.set3_forms = matcher::aggregate(&set3_hits, FormGrouping::PerForm);
        let related: Vec<ResourceRef> = self
            .set1_store
            .as_ref()
            .expect("set1 store")
            .records()
            .map(|r| r.resource.clone())
            .filter(|r| self.store.as_ref().expect("store").contains(r))
            .collect();
        let missing = wsd::sanity_check_set1(&scores, &related);
        let (a, f) = (self.set3_aggs.clone(), self.set3_forms.clone());
        self.export_csv(S, "tables/wsd_scores.csv", |w| {
            wsd::write_scores_csv(w, &scores)
        })?;
        self.export_csv(S, "tables/aggregates_set3.csv", |w| {
            matcher::write_aggregates_csv(w, &a)
        })?;
        self.export_csv(S, "tables/aggregates_set3_forms.csv", |w| {
            matcher::write_aggregates_csv(w, &f)
        })?;
        self.export_csv(S, "tables/set1_sanity.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["dataset", "language", "resource_id"])?;
            for ((d, l), rs) in &missing {
                for r in rs {
                    w.write_record([d.as_str(), l.as_str(), r.resource_id.as_str()])?;
                }
            }
            w.flush()?;
            Ok(())
        })?;
        self.scores = Some(scores);
        self.mark_done(S)
    }

    /// Scores plus the terms left without a background and why.
    #[allow(clippy::type_complexity)]
    fn score(&mut self) -> Result<(Vec<WsdScore>, Vec<(String, Language, String)>), StageError> {
        const S: Stage = Stage::Wsd;
        let langs = self.languages();
        let mut models: BTreeMap<Language, EmbeddingModel> = BTreeMap::new();
        for lang in &langs {
            let path = match lang {
                Language::En => self.cfg.config.wsd.embedding_en.clone(),
                Language::Nl => self.cfg.config.wsd.embedding_nl.clone(),
            }
            .ok_or_else(|| self.fail(S, format!("no embedding configured for {lang}")))?;
            models.insert(
                *lang,
                EmbeddingModel::load(&path).map_err(|e| self.fail(S, e))?,
            );
        }
        let pre_en = Preprocessor::shipped(Language::En);
        let pre_nl = Preprocessor::shipped(Language::Nl);
        let lex = self.lexicon.as_ref().expect("lexicon");
        let set1_store = self.set1_store.as_ref().expect("set1 store");
        let mut backgrounds: BTreeMap<(String, Language), BagOfWords> = BTreeMap::new();
        let mut without: Vec<(String, Language, String)> = Vec::new();
        for t in lex.terms().iter().filter(|t| langs.contains(&t.language)) {
            let pre = if t.language == Language::En {
                &pre_en
            } else {
                &pre_nl
            };
            match wsd::build_background(t, set1_store, pre) {
                Ok(bag) => {
                    backgrounds.insert((t.canonical_form.clone(), t.language), bag);
                }
                Err(e @ WsdError::NoBackground { .. }) => {
                    without.push((t.canonical_form.clone(), t.language, e.to_string()));
                }
                Err(e) => return Err(self.fail(S, e)),
            }
        }
        let candidates = wsd::candidates_from_hits(
            self.set2_hits.as_ref().expect("set 2"),
            self.store.as_ref().expect("store"),
            &pre_en,
            &pre_nl,
        );
        let mut scores = Vec::new();
        let mut unscored = Vec::new();
        for lang in &langs {
            let (with_bg, no_bg): (Vec<_>, Vec<_>) = candidates
                .iter()
                .filter(|c| c.resource.language == *lang)
                .cloned()
                .partition(|c| backgrounds.contains_key(&(c.canonical_form.clone(), *lang)));
            let s = wsd::disambiguate(
                &with_bg,
                &backgrounds,
                &models[lang],
                self.cfg.config.wsd.threshold,
                self.cfg.config.wsd.top_k,
            )
            .map_err(|e| self.fail(S, e))?;
            scores.extend(s);
            unscored.extend(no_bg.into_iter().map(|c| WsdScore {
                resource: c.resource,
                canonical_form: c.canonical_form,
                similarity: None,
                included: false,
            }));
        }
        log::info!(
            "wsd: {} scored, {} included, {} without background",
            scores.len(),
            scores.iter().filter(|s| s.included).count(),
            unscored.len()
        );
        scores.extend(unscored);
        Ok((scores, without))
    }

    pub fn markers(&mut self) -> Result<(), StageError> {
        if self.markers.is_some() {
            return Ok(());
        }
        self.disambiguate()?;
        const S: Stage = Stage::Markers;
        let mc = self.cfg.config.markers.clone();
        let lexemes = match &mc.lexemes {
            Some(p) => markers::load_lexemes(p).map_err(|e| self.fail(S, e))?,
            None => markers::default_lexemes(),
        };
        let rules = match &mc.rules {
            Some(p) => markers::load_rules(p).map_err(|e| self.fail(S, e))?,
            None => markers::default_rules(),
        };
        let scope = if mc.implicit_on_labels {
            ImplicitScope::AllPaths
        } else {
            ImplicitScope::Descriptive
        };
        let store = self.store.as_ref().expect("store");
        let scores = self.scores.as_ref().expect("scores");
        let lex = self.lexicon.as_ref().expect("lexicon");
        let included: BTreeSet<&ResourceRef> = scores
            .iter()
            .filter(|s| s.included)
            .map(|s| &s.resource)
            .collect();
        let records: Vec<_> = included.iter().filter_map(|r| store.get(r)).collect();
        let mut found = markers::scan_implicit(records.iter().copied(), &lexemes, scope);
        found.extend(markers::scan_explicit(records.iter().copied(), &rules));
        found.sort();
        let unmarked = markers::unmarked_selector_values(records.iter().copied(), &rules);
        let coverage = markers::label_coverage_report(scores, store, lex, &found);
        let mut suggestions = Vec::new();
        for s in scores.iter().filter(|s| s.included) {
            let (Some(term), Some(rec)) = (
                lex.term(&s.canonical_form, s.resource.language),
                store.get(&s.resource),
            ) else {
                continue;
            };
            for m in markers::find_suggestions(rec, term, mc.suggestion_floor) {
                suggestions.push((s.resource.clone(), s.canonical_form.clone(), m));
            }
        }
        let summary = tables::marker_summary(&found);
        self.export_csv(S, "tables/markers.csv", |w| {
            markers::write_markers_csv(w, &found)
        })?;
        self.export_csv(S, "tables/marker_summary.csv", |w| {
            tables::write_marker_summary_csv(w, &summary)
        })?;
        self.export_csv(S, "tables/label_coverage.csv", |w| {
            tables::write_label_coverage_csv(w, &coverage)
        })?;
        self.export_csv(S, "tables/unmarked_selector_values.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["dataset", "language", "resource_id", "property", "value"])?;
            for (r, p, v) in &unmarked {
                w.write_record([
                    r.dataset.as_str(),
                    r.language.as_str(),
                    r.resource_id.as_str(),
                    p,
                    v,
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        self.export_csv(S, "tables/suggestions.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "dataset",
                "language",
                "resource_id",
                "canonical",
                "suggestion",
                "property_path",
                "span",
                "similarity",
            ])?;
            for (r, c, m) in &suggestions {
                w.write_record([
                    r.dataset.as_str(),
                    r.language.as_str(),
                    r.resource_id.as_str(),
                    c,
                    &m.suggestion,
                    m.property_path.path_id(),
                    &m.span,
                    &format!("{:.6}", m.similarity),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        self.markers = Some(found);
        self.mark_done(S)
    }

    pub fn sample(&mut self) -> Result<(), StageError> {
        if self.sampled {
            return Ok(());
        }
        self.disambiguate()?;
        const S: Stage = Stage::Sample;
        let mut counts: BTreeMap<(String, Dataset, Language), u64> = BTreeMap::new();
        for a in &self.set2_aggs {
            *counts
                .entry((a.canonical_form.clone(), a.dataset, a.language))
                .or_insert(0) += a.count;
        }
        let (sample, warnings) = stratify(
            self.scores.as_ref().expect("scores"),
            &counts,
            self.cfg.config.seed,
            self.cfg.config.evaluation.per_quartile,
        );
        for w in &warnings {
            log::warn!(
                "sample {}/{} quartile {}: {} drawn",
                w.dataset,
                w.language,
                w.quartile,
                w.drawn
            );
        }
        let path = self.out.join("tables/sample.csv");
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| self.fail(S, e))?;
        }
        export_sample(&sample, &path).map_err(|e| self.fail(S, e))?;
        self.written.insert("tables/sample.csv".into());
        fs::create_dir_all(self.out.join("sheets")).map_err(|e| self.fail(S, e))?;
        for a in self.cfg.config.evaluation.annotators.clone() {
            let name = format!("sheets/{a}.csv");
            export_annotation_sheet(&sample, &a, &self.out.join(&name))
                .map_err(|e| self.fail(S, e))?;
            self.written.insert(name);
        }
        self.sampled = true;
        self.mark_done(S)
    }

    /// Runs every stage and writes the hit matrix, top terms, plot data and manifest.
    pub fn report(&mut self) -> Result<ReportBundle, StageError> {
        self.markers()?;
        self.sample()?;
        const S: Stage = Stage::Report;
        let matrix = tables::build_hit_matrix(&[
            (ResultSet::Set1, &self.set1_aggs),
            (ResultSet::Set2, &self.set2_aggs),
            (ResultSet::Set3, &self.set3_aggs),
        ]);
        self.export_csv(S, "tables/hit_matrix.csv", |w| matrix.write_csv(w))?;
        let mut plot = BTreeMap::new();
        for (set, aggs, forms) in [
            (
                ResultSet::Set2,
                self.set2_aggs.clone(),
                self.set2_forms.clone(),
            ),
            (
                ResultSet::Set3,
                self.set3_aggs.clone(),
                self.set3_forms.clone(),
            ),
        ] {
            for lang in self.languages() {
                for d in Dataset::ALL.into_iter().filter(|d| d.supports(lang)) {
                    let ranking = tables::top_terms(&aggs, &forms, d, lang, TOP_K_TERMS);
                    let name = format!("tables/top_terms_{}_{}_{}.csv", set.as_str(), d, lang);
                    self.export_csv(S, &name, |w| tables::write_top_terms_csv(w, d, &ranking))?;
                    plot.insert(
                        format!("top_terms/{}/{}/{}", set.as_str(), d, lang),
                        ranking,
                    );
                }
            }
        }
        let plot_json =
            serde_json::to_vec_pretty(&json!({ "series": plot })).expect("plot data serializes");
        self.export(S, "plot_data.json", &plot_json)?;
        self.mark_done(S)?;
        self.write_manifest()
    }

    fn write_manifest(&mut self) -> Result<ReportBundle, StageError> {
        const S: Stage = Stage::Report;
        let mut files = BTreeMap::new();
        for name in &self.written {
            let bytes = fs::read(self.out.join(name)).map_err(|e| self.fail(S, e))?;
            files.insert(name.clone(), sha256_hex(&bytes));
        }
        let c = &self.cfg.config;
        let mut inputs: BTreeMap<&str, Option<&PathBuf>> = BTreeMap::new();
        inputs.insert("lexicon.kg", Some(&c.lexicon.kg));
        inputs.insert("lexicon.inflections", c.lexicon.inflections.as_ref());
        inputs.insert("lexicon.odwn_links", c.lexicon.odwn_links.as_ref());
        inputs.insert("harvest.pwn", c.harvest.pwn.as_ref());
        inputs.insert("harvest.odwn", c.harvest.odwn.as_ref());
        inputs.insert("wsd.embedding_en", c.wsd.embedding_en.as_ref());
        inputs.insert("wsd.embedding_nl", c.wsd.embedding_nl.as_ref());
        inputs.insert("markers.lexemes", c.markers.lexemes.as_ref());
        inputs.insert("markers.rules", c.markers.rules.as_ref());
        inputs.insert(
            "harvest.wikidata.excluded_categories",
            c.harvest
                .wikidata
                .as_ref()
                .and_then(|w| w.excluded_categories.as_ref()),
        );
        if let Some(s) = &c.snapshot {
            inputs.insert("snapshot.store", Some(&s.store));
            inputs.insert("snapshot.set1_store", Some(&s.set1_store));
        }
        let mut input_hashes = BTreeMap::new();
        for (k, p) in inputs {
            if let Some(p) = p {
                let bytes =
                    fs::read(p).map_err(|e| self.fail(S, format!("{}: {e}", p.display())))?;
                input_hashes.insert(k, sha256_hex(&bytes));
            }
        }
        let fingerprint = lodaudit_connectors::ResponseCache::new(&c.harvest.http.cache_dir)
            .fingerprint()
            .map_err(|e| self.fail(S, e))?;
        let cache_hash = sha256_hex(
            fingerprint
                .iter()
                .map(|(p, h)| format!("{p} {h}\n"))
                .collect::<String>()
                .as_bytes(),
        );
        let run_id = sha256_hex(
            json!([self.cfg.snapshot, input_hashes, cache_hash])
                .to_string()
                .as_bytes(),
        )[..16]
            .to_string();
        let manifest = json!({
            "tool": "lodaudit",
            "version": env!("CARGO_PKG_VERSION"),
            "run_id": run_id,
            "seed": c.seed,
            "config": self.cfg.snapshot,
            "inputs": input_hashes,
            "caches": { "http": { "files": fingerprint.len(), "sha256": cache_hash } },
            "stages": ["lexicon", "harvest", "match", "set1", "wsd", "markers", "sample", "report"],
            "tables": files,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        lodaudit_connectors::http::write_atomic(&self.out.join("manifest.json"), &bytes)
            .map_err(|e| self.fail(S, e))?;
        Ok(ReportBundle {
            run_id,
            out_dir: self.out.clone(),
            files,
        })
    }
}

/// Runs every stage end to end.
pub fn run_pipeline(cfg: LoadedConfig, mode: NetworkMode) -> Result<ReportBundle, StageError> {
    Pipeline::new(cfg, mode).report()
}

/// SHA-256 over every bundle file (all outputs except the work directory),
/// keyed by path relative to `out`.
pub fn bundle_digest(out: &Path) -> std::io::Result<BTreeMap<String, String>> {
    fn walk(dir: &Path, root: &Path, acc: &mut BTreeMap<String, String>) -> std::io::Result<()> {
        for e in fs::read_dir(dir)? {
            let p = e?.path();
            let rel = p
                .strip_prefix(root)
                .expect("under root")
                .to_string_lossy()
                .replace('\\', "/");
            if p.is_dir() {
                if rel != "work" {
                    walk(&p, root, acc)?;
                }
            } else {
                acc.insert(rel, sha256_hex(&fs::read(&p)?));
            }
        }
        Ok(())
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc)?;
    Ok(acc)
}
