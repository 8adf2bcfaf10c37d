//! Report tables: literal inventory, hit matrix, top terms and marker summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};

use lodaudit_core::markers::{LabelCoverage, Marker};
use lodaudit_core::matcher::HitAggregate;
use lodaudit_core::model::{Dataset, Language, LiteralStore, PropertyPath};

pub const NOT_APPLICABLE: &str = "N/A";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultSet {
    Set1,
    Set2,
    Set3,
}

impl ResultSet {
    pub const ALL: [ResultSet; 3] = [ResultSet::Set1, ResultSet::Set2, ResultSet::Set3];

    pub fn as_str(self) -> &'static str {
        match self {
            ResultSet::Set1 => "set1",
            ResultSet::Set2 => "set2",
            ResultSet::Set3 => "set3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub dataset: Dataset,
    pub property_path: PropertyPath,
    /// `None` where the dataset has no literals in that language.
    pub cells: BTreeMap<(ResultSet, Language), Option<u64>>,
}

/// One row per property path, one column per (set, language).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HitMatrix {
    pub rows: Vec<MatrixRow>,
}

pub fn build_hit_matrix(sets: &[(ResultSet, &[HitAggregate])]) -> HitMatrix {
    let mut sums: BTreeMap<(PropertyPath, ResultSet, Language), u64> = BTreeMap::new();
    for (set, aggs) in sets {
        for a in *aggs {
            *sums.entry((a.property_path, *set, a.language)).or_insert(0) += a.count;
        }
    }
    let rows = PropertyPath::ALL
        .into_iter()
        .map(|path| {
            let dataset = path.dataset();
            let mut cells = BTreeMap::new();
            for set in ResultSet::ALL {
                for lang in Language::ALL {
                    let v = dataset
                        .supports(lang)
                        .then(|| sums.get(&(path, set, lang)).copied().unwrap_or(0));
                    cells.insert((set, lang), v);
                }
            }
            MatrixRow {
                dataset,
                property_path: path,
                cells,
            }
        })
        .collect();
    HitMatrix { rows }
}

impl HitMatrix {
    pub fn cell(&self, path: PropertyPath, set: ResultSet, language: Language) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.property_path == path)
            .and_then(|r| r.cells.get(&(set, language)).copied().flatten())
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["dataset".to_string(), "property_path".to_string()];
        for set in ResultSet::ALL {
            for lang in Language::ALL {
                header.push(format!("{}_{}", set.as_str(), lang.as_str()));
            }
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.dataset.as_str().to_string(),
                r.property_path.path_id().to_string(),
            ];
            for set in ResultSet::ALL {
                for lang in Language::ALL {
                    rec.push(match r.cells[&(set, lang)] {
                        Some(n) => n.to_string(),
                        None => NOT_APPLICABLE.to_string(),
                    });
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRanking {
    pub canonical: String,
    pub total: u64,
    /// Hits per property path id.
    pub by_property: BTreeMap<String, u64>,
    /// Hits per matched surface form; filled from per-form aggregates.
    pub by_form: BTreeMap<String, u64>,
    /// Hits of the canonical form itself per property path id.
    pub canonical_by_property: BTreeMap<String, u64>,
    /// Hits folded in from the other inflected forms.
    pub inflected: u64,
}

/// The `k` terms with most hits in one dataset and language, ties by canonical.
/// Rankings use `aggregates`; `per_form` rows fill `by_form`,
/// `canonical_by_property` and `inflected`.
pub fn top_terms(
    aggregates: &[HitAggregate],
    per_form: &[HitAggregate],
    dataset: Dataset,
    language: Language,
    k: usize,
) -> Vec<TermRanking> {
    let mut terms: BTreeMap<&str, TermRanking> = BTreeMap::new();
    for a in aggregates
        .iter()
        .filter(|a| a.dataset == dataset && a.language == language && a.form.is_none())
    {
        let t = terms
            .entry(&a.canonical_form)
            .or_insert_with(|| TermRanking {
                canonical: a.canonical_form.clone(),
                total: 0,
                by_property: BTreeMap::new(),
                by_form: BTreeMap::new(),
                canonical_by_property: BTreeMap::new(),
                inflected: 0,
            });
        t.total += a.count;
        *t.by_property
            .entry(a.property_path.path_id().to_string())
            .or_insert(0) += a.count;
    }
    for a in per_form
        .iter()
        .filter(|a| a.dataset == dataset && a.language == language)
    {
        if let (Some(t), Some(form)) = (terms.get_mut(a.canonical_form.as_str()), &a.form) {
            *t.by_form.entry(form.clone()).or_insert(0) += a.count;
            if *form == a.canonical_form {
                *t.canonical_by_property
                    .entry(a.property_path.path_id().to_string())
                    .or_insert(0) += a.count;
            } else {
                t.inflected += a.count;
            }
        }
    }
    let mut ranked: Vec<TermRanking> = terms.into_values().collect();
    ranked.sort_by(|a, b| {
        b.total
            .cmp(&a.total)
            .then_with(|| a.canonical.cmp(&b.canonical))
    });
    ranked.truncate(k);
    ranked
}

/// One row per term: the canonical form's hits per property, then the hits
/// folded in from inflected forms. The breakdown columns sum to `total`.
pub fn write_top_terms_csv<W: io::Write>(
    out: W,
    dataset: Dataset,
    ranking: &[TermRanking],
) -> csv::Result<()> {
    let paths: Vec<&str> = PropertyPath::for_dataset(dataset)
        .map(PropertyPath::path_id)
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rank", "canonical", "total"];
    header.extend(&paths);
    header.push("inflected_forms");
    w.write_record(&header)?;
    for (i, t) in ranking.iter().enumerate() {
        let mut rec = vec![
            (i + 1).to_string(),
            t.canonical.clone(),
            t.total.to_string(),
        ];
        for p in &paths {
            rec.push(
                t.canonical_by_property
                    .get(*p)
                    .copied()
                    .unwrap_or(0)
                    .to_string(),
            );
        }
        rec.push(t.inflected.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InventoryRow {
    pub property_path: PropertyPath,
    pub language: Language,
    pub resources: usize,
    pub literals: usize,
}

/// Literal and resource counts per property path and supported language.
pub fn literal_inventory(store: &LiteralStore) -> Vec<InventoryRow> {
    let mut literals: BTreeMap<(PropertyPath, Language), usize> = BTreeMap::new();
    let mut resources: BTreeMap<(PropertyPath, Language), BTreeSet<&str>> = BTreeMap::new();
    for l in store.literals() {
        let key = (l.property_path, l.resource.language);
        *literals.entry(key).or_insert(0) += 1;
        resources
            .entry(key)
            .or_default()
            .insert(&l.resource.resource_id);
    }
    let mut out = Vec::new();
    for path in PropertyPath::ALL {
        for lang in Language::ALL
            .into_iter()
            .filter(|l| path.dataset().supports(*l))
        {
            out.push(InventoryRow {
                property_path: path,
                language: lang,
                resources: resources.get(&(path, lang)).map_or(0, BTreeSet::len),
                literals: literals.get(&(path, lang)).copied().unwrap_or(0),
            });
        }
    }
    out
}

pub fn write_inventory_csv<W: io::Write>(out: W, rows: &[InventoryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "property_path",
        "source_property",
        "language",
        "resources",
        "literals",
    ])?;
    for r in rows {
        w.write_record([
            r.property_path.dataset().as_str(),
            r.property_path.path_id(),
            r.property_path.source_property(),
            r.language.as_str(),
            &r.resources.to_string(),
            &r.literals.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MarkerSummaryRow {
    pub dataset: Dataset,
    pub language: Language,
    pub kind: &'static str,
    pub category: u8,
    pub markers: usize,
    pub resources: usize,
}

pub fn marker_summary(markers: &[Marker]) -> Vec<MarkerSummaryRow> {
    type Key = (Dataset, Language, &'static str, u8);
    let mut groups: BTreeMap<Key, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for m in markers {
        let g = groups
            .entry((
                m.resource.dataset,
                m.resource.language,
                m.kind.as_str(),
                m.category.number(),
            ))
            .or_default();
        g.0 += 1;
        g.1.insert(&m.resource.resource_id);
    }
    groups
        .into_iter()
        .map(
            |((dataset, language, kind, category), (n, rs))| MarkerSummaryRow {
                dataset,
                language,
                kind,
                category,
                markers: n,
                resources: rs.len(),
            },
        )
        .collect()
}

pub fn write_marker_summary_csv<W: io::Write>(
    out: W,
    rows: &[MarkerSummaryRow],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "language",
        "kind",
        "category",
        "markers",
        "resources",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset.as_str(),
            r.language.as_str(),
            r.kind,
            &r.category.to_string(),
            &r.markers.to_string(),
            &r.resources.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_label_coverage_csv<W: io::Write>(
    out: W,
    coverage: &BTreeMap<Dataset, LabelCoverage>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "with_term", "marked"])?;
    for (d, c) in coverage {
        w.write_record([d.as_str(), &c.with_term.to_string(), &c.marked.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
