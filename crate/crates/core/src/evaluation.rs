//! Stratified annotation samples, annotation files and Krippendorff's alpha.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, Language, ResourceRef};
use crate::wsd::WsdScore;

pub const PER_QUARTILE: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("alpha is undefined: {0}")]
    UndefinedAlpha(String),
    #[error("annotator {annotator:?} rated {resource} twice in sample {sample_id:?}")]
    DuplicateRating {
        sample_id: String,
        resource: ResourceRef,
        annotator: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleEntry {
    pub resource: ResourceRef,
    pub canonical_form: String,
    /// 1..=4, lowest result counts first.
    pub quartile: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSample {
    pub sample_id: String,
    pub rng_seed: u64,
    pub entries: Vec<SampleEntry>,
}

/// Quartile (1..=4) per term: ascending by count, cut at the 25/50/75 % ranks,
/// with a term tied on count to its predecessor kept in the predecessor's quartile.
pub fn quartiles(counts: &BTreeMap<String, u64>) -> BTreeMap<String, u8> {
    let mut terms: Vec<(&String, u64)> = counts.iter().map(|(t, &c)| (t, c)).collect();
    terms.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    let n = terms.len();
    let mut out = BTreeMap::new();
    let mut prev: Option<(u64, u8)> = None;
    for (i, (term, count)) in terms.into_iter().enumerate() {
        let by_rank = (4 * i / n) as u8 + 1;
        let q = match prev {
            Some((c, q)) if c == count => q,
            _ => by_rank,
        };
        prev = Some((count, q));
        out.insert(term.clone(), q);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifyWarning {
    pub dataset: Dataset,
    pub language: Language,
    pub quartile: u8,
    pub drawn: usize,
}

/// Draws up to `per_quartile` included Set-3 resources from each quartile of
/// terms, per dataset and language, without replacement. `result_counts` maps
/// (canonical, dataset, language) to its Set-2 hit count.
pub fn stratify(
    set3: &[WsdScore],
    result_counts: &BTreeMap<(String, Dataset, Language), u64>,
    seed: u64,
    per_quartile: usize,
) -> (AnnotationSample, Vec<StratifyWarning>) {
    let mut by_group: BTreeMap<(Dataset, Language), BTreeMap<String, BTreeSet<&ResourceRef>>> =
        BTreeMap::new();
    for s in set3.iter().filter(|s| s.included) {
        by_group
            .entry((s.resource.dataset, s.resource.language))
            .or_default()
            .entry(s.canonical_form.clone())
            .or_default()
            .insert(&s.resource);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for ((dataset, language), terms) in by_group {
        let counts: BTreeMap<String, u64> = terms
            .keys()
            .map(|t| {
                let c = result_counts
                    .get(&(t.clone(), dataset, language))
                    .copied()
                    .unwrap_or(0);
                (t.clone(), c)
            })
            .collect();
        let q_of = quartiles(&counts);
        let mut taken: BTreeSet<&ResourceRef> = BTreeSet::new();
        for q in 1..=4u8 {
            let mut pool: Vec<(&ResourceRef, &str)> = Vec::new();
            let mut seen = BTreeSet::new();
            for (term, resources) in &terms {
                if q_of[term] != q {
                    continue;
                }
                for r in resources {
                    if !taken.contains(r) && seen.insert(*r) {
                        pool.push((r, term.as_str()));
                    }
                }
            }
            pool.sort();
            let mut drawn: Vec<(&ResourceRef, &str)> = pool
                .choose_multiple(&mut rng, per_quartile)
                .copied()
                .collect();
            drawn.sort();
            if drawn.len() < per_quartile {
                log::warn!(
                    "{dataset}/{language} quartile {q}: only {} candidates",
                    drawn.len()
                );
                warnings.push(StratifyWarning {
                    dataset,
                    language,
                    quartile: q,
                    drawn: drawn.len(),
                });
            }
            for (r, term) in drawn {
                taken.insert(r);
                entries.push(SampleEntry {
                    resource: r.clone(),
                    canonical_form: term.to_string(),
                    quartile: q,
                });
            }
        }
    }
    (
        AnnotationSample {
            sample_id: format!("sample-{seed}"),
            rng_seed: seed,
            entries,
        },
        warnings,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Relevant,
    NotRelevant,
}

impl Judgment {
    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::Relevant => "relevant",
            Judgment::NotRelevant => "not_relevant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relevant" => Some(Judgment::Relevant),
            "not_relevant" => Some(Judgment::NotRelevant),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub resource: ResourceRef,
    pub annotator_id: String,
    pub judgment: Judgment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub alpha: f64,
    /// Items rated at least twice.
    pub n_items: usize,
    pub n_raters: usize,
    /// Share of items judged relevant by a strict majority of their raters.
    pub relevant_fraction: f64,
    /// Share judged relevant among items all raters agree on; `None` without agreed items.
    pub relevant_fraction_agreed: Option<f64>,
}

/// Nominal-metric alpha from the coincidence matrix of pairable values.
pub fn krippendorff_alpha(records: &[AnnotationRecord]) -> Result<AgreementReport, EvalError> {
    let mut units: BTreeMap<(&str, &ResourceRef), BTreeMap<&str, Judgment>> = BTreeMap::new();
    for r in records {
        let unit = units
            .entry((r.sample_id.as_str(), &r.resource))
            .or_default();
        if unit.insert(r.annotator_id.as_str(), r.judgment).is_some() {
            return Err(EvalError::DuplicateRating {
                sample_id: r.sample_id.clone(),
                resource: r.resource.clone(),
                annotator: r.annotator_id.clone(),
            });
        }
    }
    let raters: BTreeSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
    if raters.len() < 2 {
        return Err(EvalError::UndefinedAlpha("fewer than two raters".into()));
    }
    let values: Vec<Vec<Judgment>> = units
        .values()
        .map(|u| u.values().copied().collect::<Vec<_>>())
        .filter(|v| v.len() >= 2)
        .collect();
    if values.is_empty() {
        return Err(EvalError::UndefinedAlpha("no item was rated twice".into()));
    }
    let idx = |j: Judgment| match j {
        Judgment::Relevant => 0,
        Judgment::NotRelevant => 1,
    };
    let mut o = [[0.0f64; 2]; 2];
    for vals in &values {
        let m = vals.len() as f64;
        for (i, a) in vals.iter().enumerate() {
            for (j, b) in vals.iter().enumerate() {
                if i != j {
                    o[idx(*a)][idx(*b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let n_c = [o[0][0] + o[0][1], o[1][0] + o[1][1]];
    let n = n_c[0] + n_c[1];
    let observed = o[0][1] + o[1][0];
    let expected = 2.0 * n_c[0] * n_c[1];
    let alpha = if observed == 0.0 {
        1.0
    } else {
        1.0 - (n - 1.0) * observed / expected
    };

    let majority = values
        .iter()
        .filter(|v| 2 * v.iter().filter(|j| **j == Judgment::Relevant).count() > v.len())
        .count();
    let agreed: Vec<&Vec<Judgment>> = values
        .iter()
        .filter(|v| v.iter().all(|j| *j == v[0]))
        .collect();
    let agreed_relevant = agreed.iter().filter(|v| v[0] == Judgment::Relevant).count();
    Ok(AgreementReport {
        alpha,
        n_items: values.len(),
        n_raters: raters.len(),
        relevant_fraction: majority as f64 / values.len() as f64,
        relevant_fraction_agreed: (!agreed.is_empty())
            .then(|| agreed_relevant as f64 / agreed.len() as f64),
    })
}

const SAMPLE_HEADER: [&str; 6] = [
    "sample_id",
    "dataset",
    "language",
    "resource_id",
    "canonical",
    "quartile",
];
const SEED_PREFIX: &str = "# rng_seed=";

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |source| EvalError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Sample CSV, preceded by a `# rng_seed=N` line.
pub fn export_sample(sample: &AnnotationSample, path: &Path) -> Result<(), EvalError> {
    let mut buf = format!("{SEED_PREFIX}{}\n", sample.rng_seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(SAMPLE_HEADER).map_err(csv_err(path))?;
        for e in &sample.entries {
            w.write_record([
                sample.sample_id.as_str(),
                e.resource.dataset.as_str(),
                e.resource.language.as_str(),
                e.resource.resource_id.as_str(),
                e.canonical_form.as_str(),
                &e.quartile.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))
}

struct Rows {
    rows: Vec<(u64, csv::StringRecord)>,
    seed: Option<u64>,
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Rows, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let seed = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix(SEED_PREFIX))
        .and_then(|s| s.trim().parse().ok());
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let found = rdr.headers().map_err(csv_err(path))?.clone();
    let bad = |line: u64, message: String| EvalError::Row {
        path: path.display().to_string(),
        line,
        message,
    };
    if found.iter().collect::<Vec<_>>() != header {
        return Err(bad(1, format!("expected header {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(bad(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok(Rows { rows, seed })
}

fn parse_entry(rec: &csv::StringRecord) -> Result<SampleEntry, String> {
    let dataset: Dataset = rec[1]
        .parse()
        .map_err(|e: crate::model::ModelError| e.to_string())?;
    let language: Language = rec[2]
        .parse()
        .map_err(|e: crate::model::ModelError| e.to_string())?;
    let resource = ResourceRef::new(dataset, &rec[3], language).map_err(|e| e.to_string())?;
    let quartile: u8 = rec[5]
        .parse()
        .ok()
        .filter(|q| (1..=4).contains(q))
        .ok_or_else(|| format!("quartile {:?} outside 1..4", &rec[5]))?;
    if rec[4].trim().is_empty() {
        return Err("empty canonical form".into());
    }
    Ok(SampleEntry {
        resource,
        canonical_form: rec[4].to_string(),
        quartile,
    })
}

pub fn import_sample(path: &Path) -> Result<AnnotationSample, EvalError> {
    let Rows { rows, seed } = read_rows(path, &SAMPLE_HEADER)?;
    let mut sample_id = None;
    let mut entries = Vec::new();
    for (line, rec) in rows {
        let bad = |message: String| EvalError::Row {
            path: path.display().to_string(),
            line,
            message,
        };
        match &sample_id {
            None => sample_id = Some(rec[0].to_string()),
            Some(id) if id != &rec[0] => {
                return Err(bad(format!("mixed sample ids {id:?} and {:?}", &rec[0])))
            }
            Some(_) => {}
        }
        entries.push(parse_entry(&rec).map_err(bad)?);
    }
    Ok(AnnotationSample {
        sample_id: sample_id.unwrap_or_default(),
        rng_seed: seed.unwrap_or(0),
        entries,
    })
}

const ANNOTATION_HEADER: [&str; 8] = [
    "sample_id",
    "dataset",
    "language",
    "resource_id",
    "canonical",
    "quartile",
    "annotator_id",
    "judgment",
];

/// Annotator ids are non-empty ASCII letters, digits, `_`, `-` and `.`.
pub fn valid_annotator(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Reads one annotator file; judgments must be `relevant` or `not_relevant`.
pub fn import_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, EvalError> {
    let Rows { rows, .. } = read_rows(path, &ANNOTATION_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, rec) in rows {
        let bad = |message: String| EvalError::Row {
            path: path.display().to_string(),
            line,
            message,
        };
        let entry = parse_entry(&rec).map_err(bad)?;
        let annotator = rec[6].trim();
        if !valid_annotator(annotator) {
            return Err(bad(format!("invalid annotator id {annotator:?}")));
        }
        let judgment = Judgment::parse(rec[7].trim()).ok_or_else(|| {
            bad(format!(
                "judgment {:?} is not relevant/not_relevant",
                &rec[7]
            ))
        })?;
        if !seen.insert((
            rec[0].to_string(),
            entry.resource.clone(),
            annotator.to_string(),
        )) {
            return Err(bad(format!(
                "duplicate rating of {} by {annotator}",
                entry.resource
            )));
        }
        out.push(AnnotationRecord {
            sample_id: rec[0].to_string(),
            resource: entry.resource,
            annotator_id: annotator.to_string(),
            judgment,
        });
    }
    Ok(out)
}

/// Concatenates annotator files, rejecting a repeated (sample, resource, annotator).
pub fn merge_annotations(
    batches: impl IntoIterator<Item = Vec<AnnotationRecord>>,
) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in batches.into_iter().flatten() {
        if !seen.insert((
            r.sample_id.clone(),
            r.resource.clone(),
            r.annotator_id.clone(),
        )) {
            return Err(EvalError::DuplicateRating {
                sample_id: r.sample_id,
                resource: r.resource,
                annotator: r.annotator_id,
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// Annotation sheet for one annotator with the judgment column left blank.
pub fn export_annotation_sheet(
    sample: &AnnotationSample,
    annotator: &str,
    path: &Path,
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(ANNOTATION_HEADER).map_err(csv_err(path))?;
    for e in &sample.entries {
        w.write_record([
            sample.sample_id.as_str(),
            e.resource.dataset.as_str(),
            e.resource.language.as_str(),
            e.resource.resource_id.as_str(),
            e.canonical_form.as_str(),
            &e.quartile.to_string(),
            annotator,
            "",
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(item: &str, annotator: &str, j: Judgment) -> AnnotationRecord {
        AnnotationRecord {
            sample_id: "s".into(),
            resource: ResourceRef::new(Dataset::Aat, item, Language::En).unwrap(),
            annotator_id: annotator.into(),
            judgment: j,
        }
    }

    use Judgment::{NotRelevant as B, Relevant as A};

    #[test]
    fn perfect_agreement_is_one() {
        let recs: Vec<_> = (0..10)
            .flat_map(|i| {
                let j = if i % 3 == 0 { B } else { A };
                [rec(&i.to_string(), "x", j), rec(&i.to_string(), "y", j)]
            })
            .collect();
        let r = krippendorff_alpha(&recs).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.n_items, 10);
        assert_eq!(r.relevant_fraction_agreed, Some(0.6));
    }

    #[test]
    fn single_value_data_is_one() {
        let recs = [rec("1", "x", A), rec("1", "y", A)];
        assert_eq!(krippendorff_alpha(&recs).unwrap().alpha, 1.0);
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(
            krippendorff_alpha(&[rec("1", "x", A), rec("2", "x", B)]),
            Err(EvalError::UndefinedAlpha(_))
        ));
        assert!(matches!(
            krippendorff_alpha(&[rec("1", "x", A), rec("2", "y", B)]),
            Err(EvalError::UndefinedAlpha(_))
        ));
        assert!(matches!(
            krippendorff_alpha(&[rec("1", "x", A), rec("1", "x", B)]),
            Err(EvalError::DuplicateRating { .. })
        ));
    }

    #[test]
    fn majority_and_agreed_fractions() {
        let recs = [
            rec("1", "x", A),
            rec("1", "y", A),
            rec("2", "x", A),
            rec("2", "y", B),
            rec("3", "x", B),
            rec("3", "y", B),
            rec("3", "z", A),
        ];
        let r = krippendorff_alpha(&recs).unwrap();
        assert_eq!(r.n_raters, 3);
        assert!((r.relevant_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.relevant_fraction_agreed, Some(1.0));
    }

    #[test]
    fn quartile_ties_stay_low() {
        let counts: BTreeMap<String, u64> = [
            ("a", 1),
            ("b", 1),
            ("c", 1),
            ("d", 5),
            ("e", 7),
            ("f", 9),
            ("g", 9),
            ("h", 20),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let q = quartiles(&counts);
        let got: Vec<u8> = "abcdefgh".chars().map(|c| q[&c.to_string()]).collect();
        assert_eq!(got, [1, 1, 1, 2, 3, 3, 3, 4]);
    }
}
